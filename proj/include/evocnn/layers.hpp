#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "evocnn/tensor.hpp"

namespace evocnn {

enum class LayerKind : std::uint8_t { Conv = 0, MaxPool = 1, Upsample = 2, Flatten = 3, Dense = 4, Crop = 5 };

enum class Activation : std::uint8_t { Relu = 0, Sigmoid = 1, Linear = 2 };

std::string_view kind_name(LayerKind k);

/// One layer of a built network: hyperparameters, parameters and their momentum buffers.
///
/// Conv weights are laid out (filters, in_channels, filter_h, filter_w); Dense weights are
/// (units, in_features). Layers without parameters keep empty vectors.
struct LayerState {
    LayerKind kind = LayerKind::Conv;

    // Conv
    std::size_t filters = 0;
    std::size_t in_channels = 0;
    std::size_t filter_h = 0;
    std::size_t filter_w = 0;
    std::size_t stride = 1;
    Activation activation = Activation::Relu;

    // MaxPool / Upsample (factor_h, factor_w reuse pool_h, pool_w)
    std::size_t pool_h = 0;
    std::size_t pool_w = 0;

    // Dense
    std::size_t units = 0;
    std::size_t in_features = 0;

    // Crop
    std::size_t target_h = 0;
    std::size_t target_w = 0;

    std::vector<double> weights;
    std::vector<double> bias;
    std::vector<double> weight_velocity;
    std::vector<double> bias_velocity;

    bool has_params() const { return kind == LayerKind::Conv || kind == LayerKind::Dense; }
    std::size_t expected_weight_count() const;
    std::size_t expected_bias_count() const;

    /// Output shape for a given input shape; throws StructuralError on mismatch.
    Shape3 output_shape(const Shape3& in) const;

    static LayerState conv(std::size_t filters, std::size_t in_channels, std::size_t fh,
                           std::size_t fw, std::size_t stride, Activation act = Activation::Relu);
    static LayerState maxpool(std::size_t ph, std::size_t pw);
    static LayerState upsample(std::size_t fh, std::size_t fw);
    static LayerState flatten();
    static LayerState dense(std::size_t units, std::size_t in_features);
    static LayerState crop(std::size_t th, std::size_t tw);
};

/// Zero-mean Gaussian weights with standard deviation 1/sqrt(fan_in), zero biases, zero momentum.
template <class Rng>
void init_params(LayerState& layer, Rng& rng);

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

/// Gradients of a parameterized layer, same shapes as weights/bias.
struct ParamGrads {
    std::vector<double> weights;
    std::vector<double> bias;
};

/// Values cached by a forward pass that the backward pass needs.
struct LayerCache {
    Tensor4 input;
    Tensor4 output;  // post-activation (Conv) or layer output
    std::vector<std::size_t> argmax;  // MaxPool: flat input index chosen per output cell
};

// Layer-level forward/backward. `layer_index` is only used in error messages.
Tensor4 conv_forward(const Tensor4& input, const LayerState& layer, std::size_t layer_index = 0);
Tensor4 conv_backward(const Tensor4& grad_out, const Tensor4& cached_input, const Tensor4& cached_output,
                      const LayerState& layer, ParamGrads& grads, std::size_t layer_index = 0);

Tensor4 maxpool_forward(const Tensor4& input, const LayerState& layer,
                        std::vector<std::size_t>* argmax = nullptr);
Tensor4 maxpool_backward(const Tensor4& grad_out, const Shape3& input_shape,
                         std::span<const std::size_t> argmax);

Tensor4 upsample_forward(const Tensor4& input, std::size_t factor_h, std::size_t factor_w);
Tensor4 upsample_backward(const Tensor4& grad_out, std::size_t factor_h, std::size_t factor_w);

Tensor4 crop_forward(const Tensor4& input, std::size_t target_h, std::size_t target_w);
Tensor4 crop_backward(const Tensor4& grad_out, const Shape3& input_shape);

/// Fully connected layer on flattened samples, linear output (logits).
Tensor4 dense_forward(const Tensor4& input, const LayerState& layer, std::size_t layer_index = 0);
Tensor4 dense_backward(const Tensor4& grad_out, const Tensor4& cached_input, const LayerState& layer,
                       ParamGrads& grads);

}  // namespace evocnn

#include "evocnn/detail/init_params.ipp"
