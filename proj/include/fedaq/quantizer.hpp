#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "fedaq/error.hpp"
#include "fedaq/param_vector.hpp"
#include "fedaq/rng.hpp"

namespace fedaq {

// N-bit stochastic uniform quantizer: the value range [min, max] is divided
// into s = 2^N - 1 bins whose s + 1 edges are the representable levels.
struct QuantizerSpec {
    int bits;

    explicit QuantizerSpec(int bits_) : bits(bits_) {
        if (bits < 1 || bits > 32) {
            throw std::invalid_argument("QuantizerSpec: bits must be in [1, 32]");
        }
    }

    std::uint64_t bins() const { return (std::uint64_t{1} << bits) - 1; }
};

// Wire object for both links: range metadata + bit width + packed level
// indices. Payload is little-endian bit-contiguous, zero-padded to a byte
// boundary. rng_seed records the seed that produced the tensor.
struct QuantizedTensor {
    double min = 0.0;
    double max = 0.0;
    int bits = 1;
    std::uint32_t d = 0;
    std::uint64_t rng_seed = 0;
    std::vector<std::uint8_t> payload;

    std::uint64_t bins() const { return (std::uint64_t{1} << bits) - 1; }

    static std::size_t payload_bytes(std::uint32_t d, int bits) {
        return (static_cast<std::size_t>(d) * static_cast<std::size_t>(bits) + 7) / 8;
    }

    bool operator==(const QuantizedTensor& other) const = default;
};

namespace detail {

inline void pack_levels(std::span<const std::uint64_t> levels, int bits,
                        std::vector<std::uint8_t>& out) {
    out.assign(QuantizedTensor::payload_bytes(static_cast<std::uint32_t>(levels.size()), bits), 0);
    std::size_t cursor = 0;
    for (std::uint64_t level : levels) {
        for (int b = 0; b < bits; ++b) {
            out[cursor / 8] |= static_cast<std::uint8_t>(((level >> b) & 1u) << (cursor % 8));
            ++cursor;
        }
    }
}

inline std::vector<std::uint64_t> unpack_levels(const QuantizedTensor& q) {
    if (q.payload.size() != QuantizedTensor::payload_bytes(q.d, q.bits)) {
        throw FormatError("QuantizedTensor: payload has " + std::to_string(q.payload.size()) +
                          " bytes, expected " +
                          std::to_string(QuantizedTensor::payload_bytes(q.d, q.bits)));
    }
    std::vector<std::uint64_t> levels(q.d, 0);
    std::size_t cursor = 0;
    for (std::uint32_t j = 0; j < q.d; ++j) {
        std::uint64_t level = 0;
        for (int b = 0; b < q.bits; ++b) {
            level |= static_cast<std::uint64_t>((q.payload[cursor / 8] >> (cursor % 8)) & 1u) << b;
            ++cursor;
        }
        levels[j] = level;
    }
    return levels;
}

}  // namespace detail

// Maps each element to one of the two adjacent bin edges: the lower edge h'
// with probability (h'' - x)/(h'' - h'), the upper edge h'' otherwise, which
// makes the result unbiased. Elements exactly on an edge keep it with
// probability 1. A zero-range vector quantizes losslessly (all levels 0).
// Deterministic given (v, spec, seed); element j draws from (seed, j) so the
// result is independent of evaluation order.
inline QuantizedTensor quantize(const ParamVector& v, QuantizerSpec spec, std::uint64_t seed) {
    const RangeStat rs = range_of(v);
    const std::uint64_t s = spec.bins();
    const auto d = static_cast<std::uint32_t>(v.size());

    std::vector<std::uint64_t> levels(d, 0);
    if (rs.range > 0.0) {
        const double scale = static_cast<double>(s) / rs.range;
        for (std::uint32_t j = 0; j < d; ++j) {
            // pos in [0, s]; the final multiply cannot exceed s by more than
            // rounding, which the k >= s branch absorbs.
            const double pos = (v[j] - rs.min) * scale;
            const auto k = static_cast<std::uint64_t>(pos);
            if (k >= s) {
                levels[j] = s;
                continue;
            }
            const double frac = pos - static_cast<double>(k);
            const double u = counter_uniform01(seed, j);
            levels[j] = k + (u < frac ? 1 : 0);
        }
    }

    QuantizedTensor q;
    q.min = rs.min;
    q.max = rs.max;
    q.bits = spec.bits;
    q.d = d;
    q.rng_seed = seed;
    detail::pack_levels(levels, spec.bits, q.payload);
    return q;
}

// Inverse map: v_j = min + level_j * (max - min)/s, clamped into [min, max]
// so rounding never pushes a coordinate outside the recorded range.
inline ParamVector dequantize(const QuantizedTensor& q) {
    if (q.max < q.min) {
        throw FormatError("QuantizedTensor: min > max");
    }
    const std::vector<std::uint64_t> levels = detail::unpack_levels(q);
    const double range = q.max - q.min;
    const auto s = static_cast<double>(q.bins());
    std::vector<double> out(q.d);
    for (std::uint32_t j = 0; j < q.d; ++j) {
        if (range == 0.0) {
            out[j] = q.min;
            continue;
        }
        double x = q.min + static_cast<double>(levels[j]) * range / s;
        out[j] = std::min(std::max(x, q.min), q.max);
    }
    return ParamVector(std::move(out));
}

// ||dequantize(quantize(v)) - v||^2 for one seed.
inline double quantization_error_sq(const ParamVector& v, QuantizerSpec spec, std::uint64_t seed) {
    const ParamVector round_trip = dequantize(quantize(v, spec, seed));
    double acc = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double diff = round_trip[j] - v[j];
        acc += diff * diff;
    }
    return acc;
}

namespace detail {

inline void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t x) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((x >> (8 * i)) & 0xff));
}

inline void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t x) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((x >> (8 * i)) & 0xff));
}

inline void put_f64_le(std::vector<std::uint8_t>& out, double x) {
    put_u64_le(out, std::bit_cast<std::uint64_t>(x));
}

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32_le() { return static_cast<std::uint32_t>(read(4)); }
    std::uint64_t u64_le() { return read(8); }
    std::uint8_t u8() { return static_cast<std::uint8_t>(read(1)); }
    double f64_le() { return std::bit_cast<double>(read(8)); }

    std::span<const std::uint8_t> rest() { return bytes_.subspan(offset_); }
    std::size_t offset() const { return offset_; }

private:
    std::uint64_t read(std::size_t n) {
        if (offset_ + n > bytes_.size()) {
            throw FormatError("QuantizedTensor: truncated header at byte " +
                              std::to_string(offset_));
        }
        std::uint64_t x = 0;
        for (std::size_t i = 0; i < n; ++i) {
            x |= static_cast<std::uint64_t>(bytes_[offset_ + i]) << (8 * i);
        }
        offset_ += n;
        return x;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t offset_ = 0;
};

}  // namespace detail

// Header {d: u32 LE, bits: u8, min: f64 LE, max: f64 LE, seed: u64 LE}
// followed by the packed payload. Bit-exact.
inline std::vector<std::uint8_t> to_bytes(const QuantizedTensor& q) {
    std::vector<std::uint8_t> out;
    out.reserve(29 + q.payload.size());
    detail::put_u32_le(out, q.d);
    out.push_back(static_cast<std::uint8_t>(q.bits));
    detail::put_f64_le(out, q.min);
    detail::put_f64_le(out, q.max);
    detail::put_u64_le(out, q.rng_seed);
    out.insert(out.end(), q.payload.begin(), q.payload.end());
    return out;
}

inline QuantizedTensor tensor_from_bytes(std::span<const std::uint8_t> bytes) {
    detail::ByteReader reader(bytes);
    QuantizedTensor q;
    q.d = reader.u32_le();
    q.bits = reader.u8();
    if (q.bits < 1 || q.bits > 32) {
        throw FormatError("QuantizedTensor: bit width " + std::to_string(q.bits) +
                          " out of range");
    }
    q.min = reader.f64_le();
    q.max = reader.f64_le();
    if (!(q.min <= q.max)) {
        throw FormatError("QuantizedTensor: min > max in header");
    }
    q.rng_seed = reader.u64_le();
    const auto rest = reader.rest();
    if (rest.size() != QuantizedTensor::payload_bytes(q.d, q.bits)) {
        throw FormatError("QuantizedTensor: payload has " + std::to_string(rest.size()) +
                          " bytes at offset " + std::to_string(reader.offset()) + ", expected " +
                          std::to_string(QuantizedTensor::payload_bytes(q.d, q.bits)));
    }
    q.payload.assign(rest.begin(), rest.end());
    return q;
}

}  // namespace fedaq
