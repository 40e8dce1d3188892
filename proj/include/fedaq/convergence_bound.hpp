#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fedaq/bit_allocation.hpp"
#include "fedaq/param_vector.hpp"
#include "fedaq/rng.hpp"

namespace fedaq {

// Analysis constants and per-round bin counts for evaluating the convergence
// bounds. L, sigma^2 and f(w0) - f* are user-supplied assumption constants,
// not estimated from training.
struct BoundInputs {
    double smoothness = 1.0;      // L
    double eta = 0.1;
    double sigma_sq = 0.0;
    double f0_minus_fstar = 0.0;
    int d = 1;
    int n = 1;
    int rounds = 1;  // K
    int tau = 1;
    RangeTrace trace;
    std::vector<std::vector<double>> s_up;  // bins per [round][client]
    std::vector<double> s_dn;               // bins per round
};

struct BoundTerms {
    double uplink_term = 0.0;
    double downlink_term = 0.0;
    double init_term = 0.0;
    double sgd_term = 0.0;
    double total = 0.0;
    bool eta_ok = true;
};

// Step-size feasibility: 1 - L*eta - 2*tau*(tau-1)*L^2*eta^2 >= 0.
inline bool eta_condition_ok(double smoothness, double eta, int tau) {
    if (!(smoothness > 0.0) || !(eta > 0.0) || tau < 1) {
        throw std::invalid_argument("eta_condition_ok: need L > 0, eta > 0, tau >= 1");
    }
    const double quad =
        2.0 * tau * (tau - 1) * smoothness * smoothness * eta * eta;
    return 1.0 - smoothness * eta - quad >= 0.0;
}

namespace detail {

inline void validate_bound_inputs(const BoundInputs& b) {
    if (!(b.smoothness > 0) || !(b.eta > 0) || b.sigma_sq < 0 || b.f0_minus_fstar < 0) {
        throw std::invalid_argument("BoundInputs: invalid analysis constants");
    }
    if (b.d < 1 || b.n < 1 || b.rounds < 1 || b.tau < 1) {
        throw std::invalid_argument("BoundInputs: d, n, rounds, tau must be >= 1");
    }
    if (b.trace.rounds() != static_cast<std::size_t>(b.rounds) ||
        b.s_up.size() != static_cast<std::size_t>(b.rounds) ||
        b.s_dn.size() != static_cast<std::size_t>(b.rounds)) {
        throw std::invalid_argument("BoundInputs: round count mismatch");
    }
    for (std::size_t m = 0; m < b.s_up.size(); ++m) {
        if (b.s_up[m].size() != static_cast<std::size_t>(b.n) ||
            b.trace.uplink[m].size() != static_cast<std::size_t>(b.n)) {
            throw std::invalid_argument("BoundInputs: client count mismatch");
        }
        for (double s : b.s_up[m]) {
            if (!(s >= 1.0)) throw std::invalid_argument("BoundInputs: uplink bins < 1");
        }
        if (!(b.s_dn[m] >= 1.0)) throw std::invalid_argument("BoundInputs: downlink bins < 1");
    }
}

}  // namespace detail

// Full bound, returned term by term: the two quantization terms are what the
// allocation optimizes, so callers need them decomposed.
inline BoundTerms joint_bound(const BoundInputs& b) {
    detail::validate_bound_inputs(b);
    const double L = b.smoothness;
    const double n = static_cast<double>(b.n);
    const double K = static_cast<double>(b.rounds);
    const double tau = static_cast<double>(b.tau);

    double sum_up = 0.0;
    double sum_dn = 0.0;
    for (std::size_t m = 0; m < b.trace.rounds(); ++m) {
        for (std::size_t i = 0; i < b.s_up[m].size(); ++i) {
            const double ratio = b.trace.uplink[m][i] / b.s_up[m][i];
            sum_up += ratio * ratio;
        }
        const double ratio = b.trace.downlink[m] / b.s_dn[m];
        sum_dn += ratio * ratio;
    }

    BoundTerms t;
    t.uplink_term = L * b.d / (n * n * K * tau * b.eta) * sum_up;
    t.downlink_term = 2.0 * L * b.d / (K * tau * b.eta) * sum_dn;
    t.init_term = 2.0 * b.f0_minus_fstar / (K * tau * b.eta);
    t.sgd_term =
        (L * b.eta * b.sigma_sq + L * L * b.eta * b.eta * (n + 1.0) * (tau - 1.0) * b.sigma_sq) /
        n;
    t.total = t.uplink_term + t.downlink_term + t.init_term + t.sgd_term;
    t.eta_ok = eta_condition_ok(b.smoothness, b.eta, b.tau);
    return t;
}

// Uplink-only bound: the downlink term is dropped.
inline double uplink_only_bound(const BoundInputs& b) {
    const BoundTerms t = joint_bound(b);
    return t.uplink_term + t.init_term + t.sgd_term;
}

// Downlink-only bound: the uplink term is dropped.
inline double downlink_only_bound(const BoundInputs& b) {
    const BoundTerms t = joint_bound(b);
    return t.downlink_term + t.init_term + t.sgd_term;
}

// Crude smoothness estimate for reports: max gradient-difference ratio over
// random coordinate perturbations around the given points. Not used by any
// bound computation.
template <typename GradFn>
double estimate_smoothness(GradFn&& grad, const std::vector<ParamVector>& probes, double step,
                           std::uint64_t seed) {
    SplitMix64 rng(seed);
    double worst = 0.0;
    for (const ParamVector& w : probes) {
        std::vector<double> shifted = w.values();
        for (double& x : shifted) x += step * (2.0 * rng.next_unit() - 1.0);
        const ParamVector w2(shifted);
        const ParamVector g1 = grad(w);
        const ParamVector g2 = grad(w2);
        const double dg = std::sqrt(l2_norm_sq(combine(g1, g2, 1.0, -1.0)));
        const double dw = std::sqrt(l2_norm_sq(combine(w, w2, 1.0, -1.0)));
        if (dw > 0.0) worst = std::max(worst, dg / dw);
    }
    return worst;
}

}  // namespace fedaq
