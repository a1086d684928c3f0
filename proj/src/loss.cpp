#include "evocnn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "evocnn/error.hpp"

namespace evocnn {

Tensor4 softmax(const Tensor4& logits) {
    Tensor4 p = logits;
    const std::size_t k = logits.sample_size();
    for (std::size_t n = 0; n < logits.batch(); ++n) {
        auto row = p.sample(n);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            z += v;
        }
        for (std::size_t j = 0; j < k; ++j) row[j] /= z;
    }
    return p;
}

LossResult softmax_cross_entropy(const Tensor4& logits, std::span<const std::uint8_t> labels) {
    if (labels.size() != logits.batch()) throw StructuralError("label count does not match batch");
    if (!logits.all_finite()) throw TrainingDiverged("non-finite logits");
    const std::size_t k = logits.sample_size();
    LossResult r;
    r.grad = softmax(logits);
    const double inv_n = 1.0 / static_cast<double>(logits.batch());
    double total = 0.0;
    for (std::size_t n = 0; n < logits.batch(); ++n) {
        if (labels[n] >= k) throw StructuralError("label " + std::to_string(labels[n]) + " out of range");
        auto row = logits.sample(n);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        total += std::log(z) + mx - row[labels[n]];
        auto g = r.grad.sample(n);
        g[labels[n]] -= 1.0;
        for (double& v : g) v *= inv_n;
    }
    r.loss = total * inv_n;
    if (!std::isfinite(r.loss)) throw TrainingDiverged("non-finite cross-entropy");
    return r;
}

LossResult dense_softmax_head(const Tensor4& input, const LayerState& layer, std::span<const std::uint8_t> labels,
                              ParamGrads& param_grads) {
    const Tensor4 logits = dense_forward(input, layer);
    LossResult head = softmax_cross_entropy(logits, labels);
    head.grad = dense_backward(head.grad, input, layer, param_grads);
    return head;
}

LossResult mse_loss(const Tensor4& prediction, const Tensor4& target) {
    if (!prediction.same_dims(target))
        throw StructuralError("mse dims " + dims_string(prediction) + " vs " + dims_string(target));
    LossResult r;
    r.grad = Tensor4(prediction.batch(), prediction.sample_shape());
    auto p = prediction.values();
    auto t = target.values();
    auto g = r.grad.values();
    const double scale = 2.0 / static_cast<double>(p.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        sum += d * d;
        g[i] = scale * d;
    }
    r.loss = sum / static_cast<double>(p.size());
    if (!std::isfinite(r.loss)) throw TrainingDiverged("non-finite reconstruction loss");
    return r;
}

double reconstruction_accuracy(const Tensor4& x, const Tensor4& x_recon) {
    if (!x.same_dims(x_recon))
        throw StructuralError("reconstruction dims " + dims_string(x_recon) + " vs input " + dims_string(x));
    auto a = x.values();
    auto b = x_recon.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
    const double mse = a.empty() ? 0.0 : sum / static_cast<double>(a.size());
    if (!std::isfinite(mse)) return 0.0;
    return std::clamp(1.0 - mse, 0.0, 1.0);
}

void sgd_momentum_step(std::span<double> weights, std::span<const double> grads, std::span<double> velocity,
                       double lr, double momentum) {
    if (weights.size() != grads.size() || weights.size() != velocity.size())
        throw StructuralError("optimizer buffers differ in size");
    for (std::size_t i = 0; i < weights.size(); ++i) {
        velocity[i] = momentum * velocity[i] - lr * grads[i];
        weights[i] += velocity[i];
    }
}

}  // namespace evocnn
