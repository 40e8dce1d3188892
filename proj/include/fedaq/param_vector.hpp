#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedaq/error.hpp"

namespace fedaq {

// Flat vector of model parameters or updates. Immutable after construction;
// every entry is guaranteed finite so downstream range math never sees
// NaN/Inf.
class ParamVector {
public:
    explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) {
            throw std::invalid_argument("ParamVector: dimension must be >= 1");
        }
        for (std::size_t j = 0; j < values_.size(); ++j) {
            if (!std::isfinite(values_[j])) {
                throw NumericError("ParamVector: non-finite entry at index " + std::to_string(j));
            }
        }
    }

    static ParamVector zeros(std::size_t d) { return ParamVector(std::vector<double>(d, 0.0)); }

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t j) const { return values_[j]; }
    const std::vector<double>& values() const { return values_; }
    std::span<const double> span() const { return values_; }

    bool operator==(const ParamVector& other) const { return values_ == other.values_; }

private:
    std::vector<double> values_;
};

struct RangeStat {
    double min = 0.0;
    double max = 0.0;
    double range = 0.0;  // max - min, >= 0
};

inline RangeStat range_of(const ParamVector& v) {
    double lo = v[0];
    double hi = v[0];
    for (std::size_t j = 1; j < v.size(); ++j) {
        lo = std::min(lo, v[j]);
        hi = std::max(hi, v[j]);
    }
    const double range = hi - lo;
    if (!std::isfinite(range)) {
        throw NumericError("range_of: max - min overflows");
    }
    return RangeStat{lo, hi, range};
}

// ca*a + cb*b elementwise.
inline ParamVector combine(const ParamVector& a, const ParamVector& b, double ca, double cb) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("combine: length mismatch");
    }
    if (!std::isfinite(ca) || !std::isfinite(cb)) {
        throw std::invalid_argument("combine: non-finite coefficient");
    }
    std::vector<double> out(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
        out[j] = ca * a[j] + cb * b[j];
        if (!std::isfinite(out[j])) {
            throw NumericError("combine: non-finite result at index " + std::to_string(j));
        }
    }
    return ParamVector(std::move(out));
}

inline double l2_norm_sq(const ParamVector& v) {
    double acc = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) acc += v[j] * v[j];
    return acc;
}

inline double l2_norm_sq(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return acc;
}

}  // namespace fedaq
