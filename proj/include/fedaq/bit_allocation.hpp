#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fedaq/error.hpp"

namespace fedaq {

// Observed communication ranges for a whole run: uplink[m][i] is the model
// update range of client i in round m, downlink[m] the global model range.
struct RangeTrace {
    std::vector<std::vector<double>> uplink;
    std::vector<double> downlink;

    std::size_t rounds() const { return downlink.size(); }
    std::size_t clients() const { return uplink.empty() ? 0 : uplink[0].size(); }
};

struct EnergyParams {
    double e1 = 1.0;     // uplink energy per bit, pJ/b
    double e2 = 1.0;     // downlink energy per bit, pJ/b
    double budget = 0;   // total energy budget E, pJ
    int d = 1;           // model dimension
    int n = 1;           // clients
    int rounds = 1;      // communication rounds K
};

inline void validate(const EnergyParams& ep) {
    if (ep.e1 <= 0 || ep.e2 <= 0 || ep.budget <= 0) {
        throw std::invalid_argument("EnergyParams: e1, e2, budget must be positive");
    }
    if (ep.d < 1 || ep.n < 1 || ep.rounds < 1) {
        throw std::invalid_argument("EnergyParams: d, n, rounds must be >= 1");
    }
}

inline void validate(const RangeTrace& trace, const EnergyParams& ep) {
    if (trace.rounds() != static_cast<std::size_t>(ep.rounds) ||
        trace.uplink.size() != trace.downlink.size()) {
        throw std::invalid_argument("RangeTrace: round count mismatch");
    }
    for (const auto& row : trace.uplink) {
        if (row.size() != static_cast<std::size_t>(ep.n)) {
            throw std::invalid_argument("RangeTrace: client count mismatch");
        }
        for (double r : row) {
            if (!(r > 0.0)) throw std::invalid_argument("RangeTrace: nonpositive uplink range");
        }
    }
    for (double r : trace.downlink) {
        if (!(r > 0.0)) throw std::invalid_argument("RangeTrace: nonpositive downlink range");
    }
}

// log2 of a zero range is undefined and a zero-range tensor is transmitted
// losslessly anyway, so zeros are replaced by the smallest positive range
// observed on the same link.
inline RangeTrace replace_zero_ranges(RangeTrace trace) {
    double min_up = std::numeric_limits<double>::infinity();
    double min_dn = std::numeric_limits<double>::infinity();
    for (const auto& row : trace.uplink) {
        for (double r : row) {
            if (r > 0.0) min_up = std::min(min_up, r);
        }
    }
    for (double r : trace.downlink) {
        if (r > 0.0) min_dn = std::min(min_dn, r);
    }
    if (!std::isfinite(min_up) || !std::isfinite(min_dn)) {
        throw std::invalid_argument("RangeTrace: a link has no positive range to substitute");
    }
    for (auto& row : trace.uplink) {
        for (double& r : row) {
            if (!(r > 0.0)) r = min_up;
        }
    }
    for (double& r : trace.downlink) {
        if (!(r > 0.0)) r = min_dn;
    }
    return trace;
}

inline constexpr int kMinBits = 1;
inline constexpr int kMaxBits = 32;

// Counts how often a bit rule left [1, 32] and had to be clamped.
struct ClampCounter {
    std::int64_t low = 0;
    std::int64_t high = 0;
};

namespace detail {

inline int clamp_bits(double raw_bits, ClampCounter* counter) {
    const double ceiled = std::ceil(raw_bits);
    if (ceiled < kMinBits) {
        if (counter) ++counter->low;
        return kMinBits;
    }
    if (ceiled > kMaxBits) {
        if (counter) ++counter->high;
        return kMaxBits;
    }
    return static_cast<int>(ceiled);
}

}  // namespace detail

// Uplink rule: ceil(log2(R / alpha)), clamped into [1, 32].
inline int bits_uplink(double range, double alpha, ClampCounter* counter = nullptr) {
    if (!(range > 0.0) || !(alpha > 0.0)) {
        throw std::invalid_argument("bits_uplink: range and alpha must be positive");
    }
    return detail::clamp_bits(std::log2(range / alpha), counter);
}

// Downlink rule: ceil(log2(sqrt(2n) * R / alpha)), i.e. the uplink rule with
// beta = alpha / sqrt(2n).
inline int bits_downlink(double range, double alpha, int n, ClampCounter* counter = nullptr) {
    if (!(range > 0.0) || !(alpha > 0.0)) {
        throw std::invalid_argument("bits_downlink: range and alpha must be positive");
    }
    if (n < 1) throw std::invalid_argument("bits_downlink: n must be >= 1");
    return detail::clamp_bits(std::log2(std::sqrt(2.0 * n) * range / alpha), counter);
}

// Joint closed-form ratio: with s_m^i = R_m^i/alpha and
// s_m = sqrt(2n)*R_m/alpha, the continuous (pre-ceiling) energy
//   e1*sum d*log2(s_m^i) + e2*sum n*d*log2(s_m)
// equals the budget exactly.
inline double alpha_joint(const RangeTrace& trace, const EnergyParams& ep) {
    validate(ep);
    validate(trace, ep);
    const double K = static_cast<double>(ep.rounds);
    const double n = static_cast<double>(ep.n);
    double sum_log_up = 0.0;
    for (const auto& row : trace.uplink) {
        for (double r : row) sum_log_up += std::log2(r);
    }
    double sum_log_dn = 0.0;
    for (double r : trace.downlink) sum_log_dn += std::log2(std::sqrt(2.0 * n) * r);

    const double e_sum = ep.e1 + ep.e2;
    const double exponent = ep.e1 * sum_log_up / (K * n * e_sum) +
                            ep.e2 * sum_log_dn / (K * e_sum) -
                            ep.budget / (K * n * ep.d * e_sum);
    return std::exp2(exponent);
}

// Uplink-only variant; ep.budget is the uplink budget E1 and only e1 is used.
inline double alpha_uplink_only(const RangeTrace& trace, const EnergyParams& ep) {
    validate(ep);
    validate(trace, ep);
    const double K = static_cast<double>(ep.rounds);
    const double n = static_cast<double>(ep.n);
    double sum_log_up = 0.0;
    for (const auto& row : trace.uplink) {
        for (double r : row) sum_log_up += std::log2(r);
    }
    return std::exp2(sum_log_up / (K * n) - ep.budget / (K * n * ep.d * ep.e1));
}

// Downlink-only variant; ep.budget is the downlink budget E2 and only e2 is
// used. Bits per round follow ceil(log2(R_m / beta)).
inline double beta_downlink_only(const RangeTrace& trace, const EnergyParams& ep) {
    validate(ep);
    validate(trace, ep);
    const double K = static_cast<double>(ep.rounds);
    double sum_log_dn = 0.0;
    for (double r : trace.downlink) sum_log_dn += std::log2(r);
    return std::exp2(sum_log_dn / K - ep.budget / (K * ep.n * ep.d * ep.e2));
}

// --- Allocation policies ---------------------------------------------------

struct FixedPolicy {
    int bits = 8;
};

struct JointAdaptivePolicy {
    double alpha = 0.004;
};

struct UplinkOnlyAdaptivePolicy {
    double alpha = 0.004;  // downlink is transmitted losslessly
};

struct DownlinkOnlyAdaptivePolicy {
    double beta = 0.002;  // uplink is transmitted losslessly
};

struct SchedulePolicy {
    std::vector<int> uplink_bits;    // one entry per round
    std::vector<int> downlink_bits;  // one entry per round
};

using AllocationPolicy = std::variant<FixedPolicy, JointAdaptivePolicy, UplinkOnlyAdaptivePolicy,
                                      DownlinkOnlyAdaptivePolicy, SchedulePolicy>;

inline void validate(const AllocationPolicy& policy, int rounds) {
    if (const auto* fixed = std::get_if<FixedPolicy>(&policy)) {
        if (fixed->bits < kMinBits || fixed->bits > kMaxBits) {
            throw std::invalid_argument("FixedPolicy: bits must be in [1, 32]");
        }
    } else if (const auto* joint = std::get_if<JointAdaptivePolicy>(&policy)) {
        if (!(joint->alpha > 0)) throw std::invalid_argument("JointAdaptivePolicy: alpha <= 0");
    } else if (const auto* up = std::get_if<UplinkOnlyAdaptivePolicy>(&policy)) {
        if (!(up->alpha > 0)) throw std::invalid_argument("UplinkOnlyAdaptivePolicy: alpha <= 0");
    } else if (const auto* dn = std::get_if<DownlinkOnlyAdaptivePolicy>(&policy)) {
        if (!(dn->beta > 0)) throw std::invalid_argument("DownlinkOnlyAdaptivePolicy: beta <= 0");
    } else if (const auto* sched = std::get_if<SchedulePolicy>(&policy)) {
        if (sched->uplink_bits.size() != static_cast<std::size_t>(rounds) ||
            sched->downlink_bits.size() != static_cast<std::size_t>(rounds)) {
            throw std::invalid_argument("SchedulePolicy: need one bit width per round");
        }
        for (int b : sched->uplink_bits) {
            if (b < kMinBits || b > kMaxBits) {
                throw std::invalid_argument("SchedulePolicy: uplink bits out of [1, 32]");
            }
        }
        for (int b : sched->downlink_bits) {
            if (b < kMinBits || b > kMaxBits) {
                throw std::invalid_argument("SchedulePolicy: downlink bits out of [1, 32]");
            }
        }
    }
}

// --- Integer allocation oracle ---------------------------------------------

// Constants of the convergence objective that multiply the two quantization
// terms; they are fixed across compared assignments.
struct ObjectiveConstants {
    double smoothness = 1.0;  // L
    double eta = 1.0;
    int tau = 1;
};

struct BitAssignment {
    std::vector<std::vector<int>> uplink;  // [round][client]
    std::vector<int> downlink;             // [round]
};

struct AllocationResult {
    BitAssignment assignment;
    double objective = 0.0;
    double energy = 0.0;
};

inline double assignment_energy(const BitAssignment& a, const EnergyParams& ep) {
    double energy = 0.0;
    for (const auto& row : a.uplink) {
        for (int b : row) energy += ep.e1 * ep.d * b;
    }
    for (int b : a.downlink) energy += ep.e2 * static_cast<double>(ep.n) * ep.d * b;
    return energy;
}

// Convergence-objective value of an integer assignment, with s = 2^bits - 1.
inline double assignment_objective(const RangeTrace& trace, const BitAssignment& a,
                                   const EnergyParams& ep, const ObjectiveConstants& c) {
    const double n = static_cast<double>(ep.n);
    const double K = static_cast<double>(ep.rounds);
    const double w_up = c.smoothness * ep.d / (n * n * K * c.tau * c.eta);
    const double w_dn = 2.0 * c.smoothness * ep.d / (K * c.tau * c.eta);
    double total = 0.0;
    for (std::size_t m = 0; m < trace.rounds(); ++m) {
        for (std::size_t i = 0; i < trace.uplink[m].size(); ++i) {
            const double s = static_cast<double>((std::uint64_t{1} << a.uplink[m][i]) - 1);
            const double ratio = trace.uplink[m][i] / s;
            total += w_up * ratio * ratio;
        }
        const double s = static_cast<double>((std::uint64_t{1} << a.downlink[m]) - 1);
        const double ratio = trace.downlink[m] / s;
        total += w_dn * ratio * ratio;
    }
    return total;
}

// Ceiling-rounded bits of the closed-form joint rule for a full trace.
inline BitAssignment closed_form_assignment(const RangeTrace& trace, const EnergyParams& ep,
                                            double alpha, ClampCounter* counter = nullptr) {
    BitAssignment a;
    a.uplink.resize(trace.rounds());
    a.downlink.resize(trace.rounds());
    for (std::size_t m = 0; m < trace.rounds(); ++m) {
        a.uplink[m].resize(trace.uplink[m].size());
        for (std::size_t i = 0; i < trace.uplink[m].size(); ++i) {
            a.uplink[m][i] = bits_uplink(trace.uplink[m][i], alpha, counter);
        }
        a.downlink[m] = bits_downlink(trace.downlink[m], alpha, ep.n, counter);
    }
    return a;
}

namespace detail {

// min-objective table over "exactly B total bits spread over the first j
// slots"; per-slot bits restricted to [grid_min, grid_max].
struct LinkTable {
    std::vector<std::vector<double>> best;  // [j][B]
    std::vector<std::vector<int>> choice;   // bits picked for slot j-1
};

inline LinkTable link_dp(const std::vector<double>& weighted_ranges_sq, int grid_min,
                         int grid_max) {
    const std::size_t slots = weighted_ranges_sq.size();
    const std::size_t max_total = slots * static_cast<std::size_t>(grid_max);
    const double inf = std::numeric_limits<double>::infinity();
    LinkTable t;
    t.best.assign(slots + 1, std::vector<double>(max_total + 1, inf));
    t.choice.assign(slots + 1, std::vector<int>(max_total + 1, 0));
    t.best[0][0] = 0.0;
    for (std::size_t j = 1; j <= slots; ++j) {
        for (std::size_t total = 0; total <= max_total; ++total) {
            for (int b = grid_min; b <= grid_max; ++b) {
                if (static_cast<std::size_t>(b) > total) break;
                const double prev = t.best[j - 1][total - b];
                if (prev == inf) continue;
                const double s = static_cast<double>((std::uint64_t{1} << b) - 1);
                const double value = prev + weighted_ranges_sq[j - 1] / (s * s);
                if (value < t.best[j][total]) {
                    t.best[j][total] = value;
                    t.choice[j][total] = b;
                }
            }
        }
    }
    return t;
}

inline std::vector<int> link_backtrack(const LinkTable& t, std::size_t slots, std::size_t total) {
    std::vector<int> bits(slots);
    for (std::size_t j = slots; j > 0; --j) {
        bits[j - 1] = t.choice[j][total];
        total -= static_cast<std::size_t>(bits[j - 1]);
    }
    return bits;
}

}  // namespace detail

// Exact integer minimizer of the convergence objective under the energy
// budget e1*sum(d*b_up) + e2*sum(n*d*b_dn) <= E, enumerated by dynamic
// programming over per-link total bit counts (all slots on one link share a
// per-bit cost, so the search space collapses without losing any
// assignment). Intended as a small-instance oracle for the closed form.
inline AllocationResult brute_force_allocation(const RangeTrace& trace, const EnergyParams& ep,
                                               int grid_min, int grid_max,
                                               const ObjectiveConstants& c = {}) {
    validate(ep);
    validate(trace, ep);
    if (grid_min < kMinBits || grid_max > 12 || grid_min > grid_max) {
        throw std::invalid_argument("brute_force_allocation: bit grid must lie in [1, 12]");
    }

    const double n = static_cast<double>(ep.n);
    const double K = static_cast<double>(ep.rounds);
    const double w_up = c.smoothness * ep.d / (n * n * K * c.tau * c.eta);
    const double w_dn = 2.0 * c.smoothness * ep.d / (K * c.tau * c.eta);

    std::vector<double> up_terms;
    up_terms.reserve(trace.rounds() * trace.clients());
    for (const auto& row : trace.uplink) {
        for (double r : row) up_terms.push_back(w_up * r * r);
    }
    std::vector<double> dn_terms;
    dn_terms.reserve(trace.rounds());
    for (double r : trace.downlink) dn_terms.push_back(w_dn * r * r);

    const detail::LinkTable up = detail::link_dp(up_terms, grid_min, grid_max);
    const detail::LinkTable dn = detail::link_dp(dn_terms, grid_min, grid_max);

    const double cost_up = ep.e1 * ep.d;               // per uplink bit
    const double cost_dn = ep.e2 * n * ep.d;           // per downlink bit
    const double inf = std::numeric_limits<double>::infinity();

    double best = inf;
    std::size_t best_up_total = 0;
    std::size_t best_dn_total = 0;
    for (std::size_t bu = 0; bu < up.best[up_terms.size()].size(); ++bu) {
        const double obj_up = up.best[up_terms.size()][bu];
        if (obj_up == inf) continue;
        for (std::size_t bd = 0; bd < dn.best[dn_terms.size()].size(); ++bd) {
            const double obj_dn = dn.best[dn_terms.size()][bd];
            if (obj_dn == inf) continue;
            if (cost_up * static_cast<double>(bu) + cost_dn * static_cast<double>(bd) >
                ep.budget) {
                break;  // bd only grows from here
            }
            if (obj_up + obj_dn < best) {
                best = obj_up + obj_dn;
                best_up_total = bu;
                best_dn_total = bd;
            }
        }
    }
    if (best == inf) {
        throw InfeasibleBudgetError("brute_force_allocation: no assignment fits budget " +
                                    std::to_string(ep.budget));
    }

    const std::vector<int> up_flat = detail::link_backtrack(up, up_terms.size(), best_up_total);
    AllocationResult result;
    result.assignment.uplink.resize(trace.rounds());
    std::size_t cursor = 0;
    for (std::size_t m = 0; m < trace.rounds(); ++m) {
        result.assignment.uplink[m].assign(up_flat.begin() + cursor,
                                           up_flat.begin() + cursor + trace.uplink[m].size());
        cursor += trace.uplink[m].size();
    }
    result.assignment.downlink = detail::link_backtrack(dn, dn_terms.size(), best_dn_total);
    result.objective = best;
    result.energy = assignment_energy(result.assignment, ep);
    return result;
}

// --- Continuous-allocation diagnostics used by identity tests ---------------

// Pre-ceiling energy of the continuous joint allocation at a given alpha.
inline double continuous_energy_joint(const RangeTrace& trace, const EnergyParams& ep,
                                      double alpha) {
    const double n = static_cast<double>(ep.n);
    double energy = 0.0;
    for (const auto& row : trace.uplink) {
        for (double r : row) energy += ep.e1 * ep.d * std::log2(r / alpha);
    }
    for (double r : trace.downlink) {
        energy += ep.e2 * n * ep.d * std::log2(std::sqrt(2.0 * n) * r / alpha);
    }
    return energy;
}

// Objective value of the continuous joint allocation at a given alpha. Every
// uplink ratio equals alpha and every downlink ratio equals beta there, so
// the ranges cancel out.
inline double continuous_objective_joint(const EnergyParams& ep, double alpha,
                                         const ObjectiveConstants& c = {}) {
    const double n = static_cast<double>(ep.n);
    const double K = static_cast<double>(ep.rounds);
    const double w_up = c.smoothness * ep.d / (n * n * K * c.tau * c.eta);
    const double w_dn = 2.0 * c.smoothness * ep.d / (K * c.tau * c.eta);
    const double beta = alpha / std::sqrt(2.0 * n);
    return w_up * K * n * alpha * alpha + w_dn * K * beta * beta;
}

// Product-form lower bound on the two quantization terms for arbitrary
// continuous bin counts.
inline double product_form_lower_bound(const RangeTrace& trace, const EnergyParams& ep,
                                       const std::vector<std::vector<double>>& s_up,
                                       const std::vector<double>& s_dn,
                                       const ObjectiveConstants& c = {}) {
    const double n = static_cast<double>(ep.n);
    const double K = static_cast<double>(ep.rounds);
    double sum_up = 0.0;
    for (std::size_t m = 0; m < trace.rounds(); ++m) {
        for (std::size_t i = 0; i < trace.uplink[m].size(); ++i) {
            sum_up += trace.uplink[m][i] / s_up[m][i];
        }
    }
    double sum_dn = 0.0;
    for (std::size_t m = 0; m < trace.rounds(); ++m) sum_dn += trace.downlink[m] / s_dn[m];
    const double coeff =
        2.0 * std::sqrt(2.0) * c.smoothness * ep.d / (n * std::sqrt(n) * K * K * c.tau * c.eta);
    return coeff * sum_dn * sum_up;
}

}  // namespace fedaq
