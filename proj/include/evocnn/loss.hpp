#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>

#include "evocnn/layers.hpp"
#include "evocnn/tensor.hpp"

namespace evocnn {

/// Raised when a loss or its inputs stop being finite; the training loop turns it into a
/// diverged report instead of propagating it.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LossResult {
    double loss = 0.0;
    Tensor4 grad;  // gradient of the loss w.r.t. the loss input
};

/// Row-wise softmax of (n, classes, 1, 1) logits.
Tensor4 softmax(const Tensor4& logits);

/// Mean cross-entropy over the batch.
LossResult softmax_cross_entropy(const Tensor4& logits, std::span<const std::uint8_t> labels);

/// Dense layer followed by softmax cross-entropy. `grad` is w.r.t. `input`; parameter gradients
/// land in `param_grads`.
LossResult dense_softmax_head(const Tensor4& input, const LayerState& layer, std::span<const std::uint8_t> labels,
                              ParamGrads& param_grads);

/// Mean squared error over every element.
LossResult mse_loss(const Tensor4& prediction, const Tensor4& target);

/// clamp(1 - MSE, 0, 1) between an image batch and its reconstruction.
double reconstruction_accuracy(const Tensor4& x, const Tensor4& x_recon);

/// In place: v = momentum * v - lr * g; w = w + v.
void sgd_momentum_step(std::span<double> weights, std::span<const double> grads, std::span<double> velocity,
                       double lr, double momentum);

}  // namespace evocnn
