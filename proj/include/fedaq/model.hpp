#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedaq/dataset.hpp"
#include "fedaq/param_vector.hpp"

namespace fedaq {

enum class ModelKind { Logistic, Mlp };

// Multinomial logistic regression or a one-hidden-layer ReLU MLP with a
// softmax head. Parameters live in one flat vector:
//   logistic: W[F x C], b[C]
//   mlp:      W1[F x H], b1[H], W2[H x C], b2[C]
struct ModelSpec {
    ModelKind kind = ModelKind::Logistic;
    int input_dim = 1;   // F
    int hidden_dim = 0;  // H, mlp only
    int classes = 2;     // C

    int param_count() const {
        if (kind == ModelKind::Logistic) {
            return input_dim * classes + classes;
        }
        return input_dim * hidden_dim + hidden_dim + hidden_dim * classes + classes;
    }
};

inline void validate(const ModelSpec& spec) {
    if (spec.input_dim < 1 || spec.classes < 2) {
        throw std::invalid_argument("ModelSpec: need input_dim >= 1 and classes >= 2");
    }
    if (spec.kind == ModelKind::Mlp && spec.hidden_dim < 1) {
        throw std::invalid_argument("ModelSpec: mlp needs hidden_dim >= 1");
    }
}

struct LossGrad {
    double loss = 0.0;
    ParamVector grad;
};

struct Evaluation {
    double accuracy = 0.0;
    double loss = 0.0;
};

namespace detail {

// Forward pass for one sample; logits and (for mlp) hidden activations are
// written into caller scratch to keep batch loops allocation-free.
inline void forward(const ModelSpec& spec, std::span<const double> w, std::span<const double> x,
                    std::vector<double>& hidden, std::vector<double>& logits) {
    const int F = spec.input_dim;
    const int C = spec.classes;
    logits.assign(C, 0.0);
    if (spec.kind == ModelKind::Logistic) {
        for (int c = 0; c < C; ++c) {
            double z = w[F * C + c];  // bias
            for (int f = 0; f < F; ++f) z += x[f] * w[f * C + c];
            logits[c] = z;
        }
        return;
    }
    const int H = spec.hidden_dim;
    const std::size_t b1_off = static_cast<std::size_t>(F) * H;
    const std::size_t w2_off = b1_off + H;
    const std::size_t b2_off = w2_off + static_cast<std::size_t>(H) * C;
    hidden.assign(H, 0.0);
    for (int h = 0; h < H; ++h) {
        double z = w[b1_off + h];
        for (int f = 0; f < F; ++f) z += x[f] * w[static_cast<std::size_t>(f) * H + h];
        hidden[h] = std::max(z, 0.0);
    }
    for (int c = 0; c < C; ++c) {
        double z = w[b2_off + c];
        for (int h = 0; h < H; ++h) z += hidden[h] * w[w2_off + static_cast<std::size_t>(h) * C + c];
        logits[c] = z;
    }
}

// In-place softmax; returns log(sum(exp(logits))) + shift for the loss.
inline double softmax_inplace(std::vector<double>& logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& z : logits) {
        z = std::exp(z - peak);
        sum += z;
    }
    for (double& z : logits) z /= sum;
    return std::log(sum) + peak;
}

}  // namespace detail

// Mean softmax cross-entropy over the batch and its exact gradient, written
// into grad (resized to spec.param_count()).
inline double loss_and_grad_into(const ModelSpec& spec, std::span<const double> w,
                                 const Dataset& ds, std::span<const int> batch,
                                 std::vector<double>& grad) {
    validate(spec);
    if (w.size() != static_cast<std::size_t>(spec.param_count())) {
        throw std::invalid_argument("loss_and_grad: parameter count mismatch");
    }
    if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
    if (ds.feature_dim != spec.input_dim || ds.classes > spec.classes) {
        throw std::invalid_argument("loss_and_grad: dataset/model shape mismatch");
    }

    const int F = spec.input_dim;
    const int C = spec.classes;
    const int H = spec.hidden_dim;
    grad.assign(w.size(), 0.0);
    std::vector<double> hidden;
    std::vector<double> logits;
    std::vector<double> dhidden;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;

    for (int idx : batch) {
        const std::span<const double> x = ds.row(static_cast<std::size_t>(idx));
        const int y = ds.labels[static_cast<std::size_t>(idx)];
        detail::forward(spec, w, x, hidden, logits);
        const double logit_y = logits[y];
        const double log_z = detail::softmax_inplace(logits);  // logits become probs
        loss += (log_z - logit_y) * inv_batch;                 // -log p_y

        // dL/dlogit = p - onehot(y)
        logits[y] -= 1.0;
        if (spec.kind == ModelKind::Logistic) {
            for (int c = 0; c < C; ++c) {
                const double dz = logits[c] * inv_batch;
                for (int f = 0; f < F; ++f) grad[f * C + c] += x[f] * dz;
                grad[static_cast<std::size_t>(F) * C + c] += dz;
            }
        } else {
            const std::size_t b1_off = static_cast<std::size_t>(F) * H;
            const std::size_t w2_off = b1_off + H;
            const std::size_t b2_off = w2_off + static_cast<std::size_t>(H) * C;
            dhidden.assign(H, 0.0);
            for (int c = 0; c < C; ++c) {
                const double dz = logits[c] * inv_batch;
                for (int h = 0; h < H; ++h) {
                    grad[w2_off + static_cast<std::size_t>(h) * C + c] += hidden[h] * dz;
                    dhidden[h] += w[w2_off + static_cast<std::size_t>(h) * C + c] * dz;
                }
                grad[b2_off + c] += dz;
            }
            for (int h = 0; h < H; ++h) {
                if (hidden[h] <= 0.0) continue;  // ReLU gate
                for (int f = 0; f < F; ++f) {
                    grad[static_cast<std::size_t>(f) * H + h] += x[f] * dhidden[h];
                }
                grad[b1_off + h] += dhidden[h];
            }
        }
    }
    return loss;
}

inline LossGrad loss_and_grad(const ModelSpec& spec, const ParamVector& w, const Dataset& ds,
                              std::span<const int> batch) {
    std::vector<double> grad;
    const double loss = loss_and_grad_into(spec, w.span(), ds, batch, grad);
    return LossGrad{loss, ParamVector(std::move(grad))};
}

// Argmax accuracy (ties go to the lowest class index) and mean loss.
inline Evaluation evaluate(const ModelSpec& spec, const ParamVector& w, const Dataset& test) {
    validate(spec);
    validate(test);
    if (w.size() != static_cast<std::size_t>(spec.param_count()) ||
        test.feature_dim != spec.input_dim) {
        throw std::invalid_argument("evaluate: shape mismatch");
    }
    std::vector<double> hidden;
    std::vector<double> logits;
    int correct = 0;
    double loss = 0.0;
    for (std::size_t idx = 0; idx < test.size(); ++idx) {
        detail::forward(spec, w.span(), test.row(idx), hidden, logits);
        int best = 0;
        for (int c = 1; c < spec.classes; ++c) {
            if (logits[c] > logits[best]) best = c;
        }
        const double logit_y = logits[test.labels[idx]];
        const double log_z = detail::softmax_inplace(logits);
        loss += log_z - logit_y;
        if (best == test.labels[idx]) ++correct;
    }
    return Evaluation{static_cast<double>(correct) / static_cast<double>(test.size()),
                      loss / static_cast<double>(test.size())};
}

}  // namespace fedaq
