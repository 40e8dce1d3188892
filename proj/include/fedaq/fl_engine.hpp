#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fedaq/bit_allocation.hpp"
#include "fedaq/dataset.hpp"
#include "fedaq/energy_ledger.hpp"
#include "fedaq/model.hpp"
#include "fedaq/param_vector.hpp"
#include "fedaq/quantizer.hpp"
#include "fedaq/rng.hpp"

namespace fedaq {

// Anything trainable by minibatch SGD over an indexed sample set.
class LocalObjective {
public:
    virtual ~LocalObjective() = default;
    virtual std::size_t dim() const = 0;
    virtual std::size_t sample_count() const = 0;
    // Mean loss over the batch; gradient written into grad.
    virtual double loss_and_grad(std::span<const double> w, std::span<const int> batch,
                                 std::vector<double>& grad) const = 0;
};

class ClassificationObjective final : public LocalObjective {
public:
    ClassificationObjective(ModelSpec spec, const Dataset& data) : spec_(spec), data_(&data) {
        validate(spec_);
        validate(data);
    }

    std::size_t dim() const override { return static_cast<std::size_t>(spec_.param_count()); }
    std::size_t sample_count() const override { return data_->size(); }

    double loss_and_grad(std::span<const double> w, std::span<const int> batch,
                         std::vector<double>& grad) const override {
        return loss_and_grad_into(spec_, w, *data_, batch, grad);
    }

    const ModelSpec& spec() const { return spec_; }

private:
    ModelSpec spec_;
    const Dataset* data_;
};

struct SgdOptions {
    double eta = 0.01;
    int batch_size = 64;
    double momentum = 0.0;
};

// Seeded minibatch SGD over one client's shard. Batch order comes from a
// Fisher-Yates reshuffle per epoch, so consuming tau steps in one call or
// across several calls on the same trainer yields identical trajectories.
class LocalTrainer {
public:
    LocalTrainer(const LocalObjective& objective, std::span<const int> shard, SgdOptions opt,
                 std::uint64_t seed)
        : objective_(&objective),
          shard_(shard.begin(), shard.end()),
          opt_(opt),
          rng_(seed),
          velocity_(objective.dim(), 0.0) {
        if (shard_.empty()) throw std::invalid_argument("LocalTrainer: empty shard");
        if (!(opt_.eta > 0.0)) throw std::invalid_argument("LocalTrainer: eta must be positive");
        if (opt_.batch_size < 1) throw std::invalid_argument("LocalTrainer: batch_size < 1");
        if (opt_.momentum < 0.0 || opt_.momentum >= 1.0) {
            throw std::invalid_argument("LocalTrainer: momentum must be in [0, 1)");
        }
        if (opt_.batch_size > static_cast<int>(shard_.size())) {
            opt_.batch_size = static_cast<int>(shard_.size());
            batch_clamped_ = true;
        }
    }

    // tau SGD steps w <- w - eta * v, v <- momentum * v + grad.
    ParamVector train(const ParamVector& w_start, int tau) {
        if (tau < 1) throw std::invalid_argument("LocalTrainer: tau must be >= 1");
        std::vector<double> w = w_start.values();
        std::vector<double> grad;
        for (int t = 0; t < tau; ++t) {
            const std::span<const int> batch = next_batch();
            const double loss = objective_->loss_and_grad(w, batch, grad);
            loss_sum_ += loss;
            double norm_sq = 0.0;
            for (std::size_t j = 0; j < w.size(); ++j) {
                norm_sq += grad[j] * grad[j];
                velocity_[j] = opt_.momentum * velocity_[j] + grad[j];
                w[j] -= opt_.eta * velocity_[j];
            }
            grad_norm_sq_sum_ += norm_sq;
            ++steps_;
        }
        return ParamVector(std::move(w));
    }

    double mean_step_loss() const { return steps_ ? loss_sum_ / steps_ : 0.0; }
    double mean_grad_norm_sq() const { return steps_ ? grad_norm_sq_sum_ / steps_ : 0.0; }
    bool batch_clamped() const { return batch_clamped_; }

private:
    std::span<const int> next_batch() {
        if (cursor_ + static_cast<std::size_t>(opt_.batch_size) > shard_.size()) {
            cursor_ = 0;
        }
        if (cursor_ == 0) {
            shuffle_span(std::span<int>(shard_), rng_);
        }
        const std::span<const int> batch(shard_.data() + cursor_,
                                         static_cast<std::size_t>(opt_.batch_size));
        cursor_ += static_cast<std::size_t>(opt_.batch_size);
        return batch;
    }

    const LocalObjective* objective_;
    std::vector<int> shard_;
    SgdOptions opt_;
    SplitMix64 rng_;
    std::vector<double> velocity_;
    std::size_t cursor_ = 0;
    long steps_ = 0;
    double loss_sum_ = 0.0;
    double grad_norm_sq_sum_ = 0.0;
    bool batch_clamped_ = false;
};

// Per-round metrics. A bits value of 0 marks a losslessly transmitted link;
// test metrics are evaluated on the post-aggregation model of the round.
struct RoundRecord {
    int round = 0;
    double train_loss = 0.0;
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    std::vector<double> uplink_ranges;
    double downlink_range = 0.0;
    std::vector<int> uplink_bits;
    int downlink_bits = 0;
    double round_energy_up = 0.0;
    double round_energy_down = 0.0;
    double grad_norm_sq_mean = 0.0;
};

struct FederatedConfig {
    int rounds = 30;  // K
    int tau = 5;
    double eta = 0.01;
    int batch_size = 64;
    double momentum = 0.0;
    AllocationPolicy policy = FixedPolicy{8};
    bool lossless_uplink = false;    // passthrough, no quantization or energy
    bool lossless_downlink = false;
    double e1 = 1.0;  // pJ/b
    double e2 = 1.0;  // pJ/b
    std::uint64_t seed = 0;
    // Separate stream for quantizer draws; defaults to `seed`. Letting it
    // vary alone keeps batch orders fixed while resampling quantization,
    // which the unbiasedness and error-bound studies need.
    std::optional<std::uint64_t> quant_seed;
};

struct RunResult {
    std::vector<RoundRecord> history;
    EnergyLedger ledger;
    ParamVector final_model;
    ClampCounter clamps;
    std::vector<std::string> warnings;
};

namespace detail {

inline constexpr std::uint64_t kDownlinkTag = 0xd01u;
inline constexpr std::uint64_t kUplinkTag = 0x0a1u;
inline constexpr std::uint64_t kTrainTag = 0x7a7u;

// Bit width for one tensor under the policy; 0 means lossless. Zero ranges
// fall back to the 1-bit clamp floor (the quantizer transmits them
// losslessly regardless).
inline int link_bits(const AllocationPolicy& policy, Link link, double range, int n, int round,
                     ClampCounter* clamps) {
    const auto adaptive = [&](double ratio_constant, bool downlink_rule) {
        if (!(range > 0.0)) {
            if (clamps) ++clamps->low;
            return kMinBits;
        }
        return downlink_rule ? bits_downlink(range, ratio_constant, n, clamps)
                             : bits_uplink(range, ratio_constant, clamps);
    };
    if (const auto* fixed = std::get_if<FixedPolicy>(&policy)) {
        return fixed->bits;
    }
    if (const auto* joint = std::get_if<JointAdaptivePolicy>(&policy)) {
        return adaptive(joint->alpha, link == Link::Downlink);
    }
    if (const auto* up = std::get_if<UplinkOnlyAdaptivePolicy>(&policy)) {
        return link == Link::Uplink ? adaptive(up->alpha, false) : 0;
    }
    if (const auto* dn = std::get_if<DownlinkOnlyAdaptivePolicy>(&policy)) {
        // Downlink rule with an explicit beta: ceil(log2(R / beta)).
        return link == Link::Downlink ? adaptive(dn->beta, false) : 0;
    }
    const auto& sched = std::get<SchedulePolicy>(policy);
    return link == Link::Uplink ? sched.uplink_bits[static_cast<std::size_t>(round)]
                                : sched.downlink_bits[static_cast<std::size_t>(round)];
}

}  // namespace detail

// One federated training run: broadcast-quantize, local SGD, update-quantize,
// weighted aggregation. Clients are processed in ascending id order and all
// randomness is derived from (seed, round, client, link), so results do not
// depend on execution order.
class FederatedRun {
public:
    FederatedRun(const LocalObjective& objective, const Partition& partition, ParamVector init,
                 FederatedConfig cfg,
                 std::function<Evaluation(const ParamVector&)> evaluator = nullptr)
        : objective_(&objective),
          partition_(&partition),
          cfg_(cfg),
          evaluator_(std::move(evaluator)),
          ledger_(cfg.e1, cfg.e2),
          w_global_(std::move(init)) {
        if (cfg_.rounds < 0) throw std::invalid_argument("FederatedRun: rounds must be >= 0");
        if (cfg_.tau < 1) throw std::invalid_argument("FederatedRun: tau must be >= 1");
        if (partition_->client_indices.empty()) {
            throw std::invalid_argument("FederatedRun: partition has no clients");
        }
        if (w_global_.size() != objective_->dim()) {
            throw std::invalid_argument("FederatedRun: model dimension mismatch");
        }
        validate(cfg_.policy, cfg_.rounds);
        // Single-link adaptive policies leave the other link unquantized.
        if (std::holds_alternative<UplinkOnlyAdaptivePolicy>(cfg_.policy)) {
            cfg_.lossless_downlink = true;
        }
        if (std::holds_alternative<DownlinkOnlyAdaptivePolicy>(cfg_.policy)) {
            cfg_.lossless_uplink = true;
        }
    }

    // Executes round `round_` (Algorithm round m) and appends its record.
    const RoundRecord& step() {
        const int m = round_;
        const int n = static_cast<int>(partition_->client_indices.size());
        const auto d = static_cast<int>(w_global_.size());
        RoundRecord rec;
        rec.round = m;

        // Downlink: quantize once, deliver the same tensor to every client,
        // but charge receive energy per client.
        const RangeStat down_range = range_of(w_global_);
        rec.downlink_range = down_range.range;
        ParamVector w_received = w_global_;
        if (!cfg_.lossless_downlink) {
            const int bits =
                detail::link_bits(cfg_.policy, Link::Downlink, down_range.range, n, m, &clamps_);
            rec.downlink_bits = bits;
            const std::uint64_t seed =
                hash64(cfg_.quant_seed.value_or(cfg_.seed), static_cast<std::uint64_t>(m), 0,
                       detail::kDownlinkTag);
            const QuantizedTensor broadcast = quantize(w_global_, QuantizerSpec(bits), seed);
            for (int i = 0; i < n; ++i) {
                ledger_.record(m, Link::Downlink, i, d, bits);
                rec.round_energy_down +=
                    static_cast<double>(bits) * static_cast<double>(d) * cfg_.e2;
            }
            w_received = dequantize(broadcast);
        }

        // Clients: local SGD from the received model, quantized update back.
        std::vector<ParamVector> updates;
        updates.reserve(static_cast<std::size_t>(n));
        double loss_sum = 0.0;
        double grad_norm_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            LocalTrainer trainer(
                *objective_, partition_->client_indices[static_cast<std::size_t>(i)],
                SgdOptions{cfg_.eta, cfg_.batch_size, cfg_.momentum},
                hash64(cfg_.seed, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(i),
                       detail::kTrainTag));
            ParamVector w_local = trainer.train(w_received, cfg_.tau);
            if (trainer.batch_clamped() && !batch_warned_) {
                warnings_.push_back("batch_size exceeds client shard size; clamped");
                batch_warned_ = true;
            }
            loss_sum += trainer.mean_step_loss();
            grad_norm_sum += trainer.mean_grad_norm_sq();

            const bool fully_lossless = cfg_.lossless_uplink && cfg_.lossless_downlink;
            ParamVector delta = combine(w_local, w_received, 1.0, -1.0);
            const RangeStat up_range = range_of(delta);
            rec.uplink_ranges.push_back(up_range.range);
            if (cfg_.lossless_uplink) {
                rec.uplink_bits.push_back(0);
                // In the fully lossless limit the run must reproduce plain
                // FedAvg bit for bit, so keep the local models themselves and
                // average them below instead of accumulating deltas.
                updates.push_back(fully_lossless ? std::move(w_local) : std::move(delta));
            } else {
                const int bits =
                    detail::link_bits(cfg_.policy, Link::Uplink, up_range.range, n, m, &clamps_);
                rec.uplink_bits.push_back(bits);
                const std::uint64_t seed =
                    hash64(cfg_.quant_seed.value_or(cfg_.seed), static_cast<std::uint64_t>(m),
                           static_cast<std::uint64_t>(i), detail::kUplinkTag);
                const QuantizedTensor q = quantize(delta, QuantizerSpec(bits), seed);
                ledger_.record(m, Link::Uplink, i, d, bits);
                rec.round_energy_up +=
                    static_cast<double>(bits) * static_cast<double>(d) * cfg_.e1;
                updates.push_back(dequantize(q));
            }
        }
        rec.train_loss = loss_sum / n;
        rec.grad_norm_sq_mean = grad_norm_sum / n;

        // w_{m+1} = w_m + sum_i p_i * update_i, in ascending client order.
        // Fully lossless runs average the local models directly (identical in
        // exact arithmetic since sum_i p_i = 1, and bitwise equal to FedAvg).
        std::vector<double> w_next;
        if (cfg_.lossless_uplink && cfg_.lossless_downlink) {
            double p_sum = 0.0;
            for (double p : partition_->p) p_sum += p;
            w_next.assign(w_global_.size(), 0.0);
            for (std::size_t j = 0; j < w_next.size(); ++j) {
                w_next[j] = (1.0 - p_sum) * w_global_[j];
            }
        } else {
            w_next = w_global_.values();
        }
        for (int i = 0; i < n; ++i) {
            const double p = partition_->p[static_cast<std::size_t>(i)];
            const ParamVector& u = updates[static_cast<std::size_t>(i)];
            for (std::size_t j = 0; j < w_next.size(); ++j) w_next[j] += p * u[j];
        }
        w_global_ = ParamVector(std::move(w_next));

        if (evaluator_) {
            const Evaluation eval = evaluator_(w_global_);
            rec.test_accuracy = eval.accuracy;
            rec.test_loss = eval.loss;
        }
        history_.push_back(std::move(rec));
        ++round_;
        return history_.back();
    }

    RunResult run() {
        for (int m = round_; m < cfg_.rounds; ++m) step();
        return RunResult{history_, ledger_, w_global_, clamps_, warnings_};
    }

    const ParamVector& global_model() const { return w_global_; }
    const EnergyLedger& ledger() const { return ledger_; }
    const std::vector<RoundRecord>& history() const { return history_; }
    const ClampCounter& clamps() const { return clamps_; }

private:
    const LocalObjective* objective_;
    const Partition* partition_;
    FederatedConfig cfg_;
    std::function<Evaluation(const ParamVector&)> evaluator_;
    EnergyLedger ledger_;
    ParamVector w_global_;
    std::vector<RoundRecord> history_;
    ClampCounter clamps_;
    std::vector<std::string> warnings_;
    int round_ = 0;
    bool batch_warned_ = false;
};

inline RunResult run_federated(const LocalObjective& objective, const Partition& partition,
                               ParamVector init, const FederatedConfig& cfg,
                               std::function<Evaluation(const ParamVector&)> evaluator = nullptr) {
    FederatedRun run(objective, partition, std::move(init), cfg, std::move(evaluator));
    return run.run();
}

// Deterministic small-magnitude initial weights shared by the CLI and tests.
inline ParamVector default_init(std::size_t dim, std::uint64_t seed) {
    std::vector<double> w(dim);
    SplitMix64 rng(hash64(seed, 0x1417u));
    for (double& x : w) x = 0.01 * (2.0 * rng.next_unit() - 1.0);
    return ParamVector(std::move(w));
}

}  // namespace fedaq
