#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedaq/error.hpp"
#include "fedaq/rng.hpp"

namespace fedaq {

struct Dataset {
    std::vector<double> features;  // N x F, row-major
    std::vector<int> labels;       // in [0, classes)
    int feature_dim = 0;
    int classes = 0;
    std::string name;

    std::size_t size() const { return labels.size(); }

    std::span<const double> row(std::size_t idx) const {
        return std::span<const double>(features)
            .subspan(idx * static_cast<std::size_t>(feature_dim), feature_dim);
    }
};

inline void validate(const Dataset& ds) {
    if (ds.size() < 1) throw std::invalid_argument("Dataset: empty");
    if (ds.features.size() != ds.size() * static_cast<std::size_t>(ds.feature_dim)) {
        throw std::invalid_argument("Dataset: feature matrix shape mismatch");
    }
    for (int label : ds.labels) {
        if (label < 0 || label >= ds.classes) {
            throw std::invalid_argument("Dataset: label out of range");
        }
    }
    for (double x : ds.features) {
        if (!std::isfinite(x)) throw NumericError("Dataset: non-finite feature");
    }
}

// Gaussian blobs around fixed per-class means of norm 2. Means are placed
// deterministically (evenly on a circle in the first two feature dimensions,
// evenly on [-2, 2] when feature_dim == 1) so classes stay separable as
// cluster_spread -> 0. Sample noise is deterministic per seed.
inline Dataset synth_generate(int n_samples, int feature_dim, int classes, double cluster_spread,
                              std::uint64_t seed) {
    if (classes < 2 || n_samples < classes || feature_dim < 1) {
        throw std::invalid_argument("synth_generate: need classes >= 2, n_samples >= classes");
    }
    if (cluster_spread < 0.0) {
        throw std::invalid_argument("synth_generate: cluster_spread must be >= 0");
    }

    std::vector<std::vector<double>> means(classes, std::vector<double>(feature_dim, 0.0));
    for (int c = 0; c < classes; ++c) {
        if (feature_dim == 1) {
            means[c][0] = -2.0 + 4.0 * c / (classes - 1);
        } else {
            const double theta = 2.0 * 3.14159265358979323846 * c / classes;
            means[c][0] = 2.0 * std::cos(theta);
            means[c][1] = 2.0 * std::sin(theta);
        }
    }

    Dataset ds;
    ds.feature_dim = feature_dim;
    ds.classes = classes;
    ds.name = "synthetic";
    ds.features.resize(static_cast<std::size_t>(n_samples) * feature_dim);
    ds.labels.resize(n_samples);
    SplitMix64 noise(hash64(seed, 1));
    for (int k = 0; k < n_samples; ++k) {
        const int c = k % classes;
        ds.labels[k] = c;
        for (int f = 0; f < feature_dim; ++f) {
            ds.features[static_cast<std::size_t>(k) * feature_dim + f] =
                means[c][f] + cluster_spread * noise.next_normal();
        }
    }
    return ds;
}

namespace detail {

inline std::uint32_t read_u32_be(std::istream& in, const std::string& path,
                                 std::size_t* offset) {
    std::uint8_t bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (in.gcount() != 4) {
        throw FormatError(path + ": truncated at byte " + std::to_string(*offset));
    }
    *offset += 4;
    return (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
           (std::uint32_t{bytes[2]} << 8) | std::uint32_t{bytes[3]};
}

}  // namespace detail

// Big-endian IDX pair: u8 image tensor (magic 0x00000803, dims
// count x rows x cols) and u8 label vector (magic 0x00000801). Pixels are
// scaled to [0, 1] by /255.
inline Dataset idx_load(const std::string& images_path, const std::string& labels_path) {
    std::ifstream images(images_path, std::ios::binary);
    if (!images) throw FormatError(images_path + ": cannot open");
    std::size_t offset = 0;
    const std::uint32_t image_magic = detail::read_u32_be(images, images_path, &offset);
    if (image_magic != 0x00000803u) {
        throw FormatError(images_path + ": bad magic at byte 0 (got " +
                          std::to_string(image_magic) + ", want 2051)");
    }
    const std::uint32_t count = detail::read_u32_be(images, images_path, &offset);
    const std::uint32_t rows = detail::read_u32_be(images, images_path, &offset);
    const std::uint32_t cols = detail::read_u32_be(images, images_path, &offset);
    const std::size_t pixels = static_cast<std::size_t>(count) * rows * cols;
    std::vector<std::uint8_t> raw(pixels);
    images.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels));
    if (static_cast<std::size_t>(images.gcount()) != pixels) {
        throw FormatError(images_path + ": truncated payload at byte " +
                          std::to_string(offset + static_cast<std::size_t>(images.gcount())));
    }

    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) throw FormatError(labels_path + ": cannot open");
    std::size_t label_offset = 0;
    const std::uint32_t label_magic = detail::read_u32_be(labels, labels_path, &label_offset);
    if (label_magic != 0x00000801u) {
        throw FormatError(labels_path + ": bad magic at byte 0 (got " +
                          std::to_string(label_magic) + ", want 2049)");
    }
    const std::uint32_t label_count = detail::read_u32_be(labels, labels_path, &label_offset);
    if (label_count != count) {
        throw FormatError(labels_path + ": label count " + std::to_string(label_count) +
                          " does not match image count " + std::to_string(count));
    }
    std::vector<std::uint8_t> raw_labels(label_count);
    labels.read(reinterpret_cast<char*>(raw_labels.data()),
                static_cast<std::streamsize>(label_count));
    if (static_cast<std::size_t>(labels.gcount()) != label_count) {
        throw FormatError(labels_path + ": truncated payload at byte " +
                          std::to_string(label_offset +
                                         static_cast<std::size_t>(labels.gcount())));
    }

    Dataset ds;
    ds.feature_dim = static_cast<int>(rows * cols);
    ds.name = images_path;
    ds.features.resize(pixels);
    for (std::size_t i = 0; i < pixels; ++i) ds.features[i] = raw[i] / 255.0;
    ds.labels.assign(raw_labels.begin(), raw_labels.end());
    int max_label = 0;
    for (int label : ds.labels) max_label = std::max(max_label, label);
    ds.classes = max_label + 1;
    return ds;
}

// Disjoint near-equal split of [0, N): client i holds client_indices[i],
// p[i] = |client i| / N.
struct Partition {
    std::vector<std::vector<int>> client_indices;
    std::vector<double> p;
};

inline Partition iid_partition(const Dataset& ds, int n, std::uint64_t seed) {
    const auto total = static_cast<int>(ds.size());
    if (n < 1 || n > total) {
        throw std::invalid_argument("iid_partition: need 1 <= n <= dataset size");
    }
    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(seed);
    shuffle_span(std::span<int>(order), rng);

    Partition part;
    part.client_indices.resize(n);
    part.p.resize(n);
    const int base = total / n;
    const int remainder = total % n;
    int cursor = 0;
    for (int i = 0; i < n; ++i) {
        const int size = base + (i < remainder ? 1 : 0);
        part.client_indices[i].assign(order.begin() + cursor, order.begin() + cursor + size);
        part.p[i] = static_cast<double>(size) / static_cast<double>(total);
        cursor += size;
    }
    return part;
}

}  // namespace fedaq
