#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>

// Deterministic, platform-independent randomness. Standard-library
// distributions and std::shuffle are implementation-defined, so everything
// that must reproduce byte-identical output goes through this header.

namespace fedaq {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer (Steele et al.). Bijective on u64.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Order-sensitive seed derivation. hash64(a, b) != hash64(b, a).
inline constexpr std::uint64_t hash64(std::uint64_t a, std::uint64_t b) {
    return mix64(a + kGolden + mix64(b + kGolden));
}

inline constexpr std::uint64_t hash64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return hash64(hash64(a, b), c);
}

inline constexpr std::uint64_t hash64(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                                      std::uint64_t d) {
    return hash64(hash64(a, b, c), d);
}

// Counter-indexed u64: the k-th output of the SplitMix64 stream with the
// given seed, without stepping through the first k-1.
inline constexpr std::uint64_t counter_u64(std::uint64_t seed, std::uint64_t counter) {
    return mix64(seed + (counter + 1) * kGolden);
}

// Uniform double in [0, 1) with 53-bit granularity.
inline double to_unit_double(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double counter_uniform01(std::uint64_t seed, std::uint64_t counter) {
    return to_unit_double(counter_u64(seed, counter));
}

// Sequential SplitMix64 engine for shuffles and sample generation.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix64(state_);
    }

    double next_unit() { return to_unit_double(next_u64()); }

    // Unbiased integer in [0, bound) by rejection.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    // Standard normal via Box-Muller; one draw cached.
    double next_normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// Fisher-Yates with our own bounded draw; identical on every platform.
template <typename T>
void shuffle_span(std::span<T> items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace fedaq
