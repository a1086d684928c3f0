#pragma once

#include <cmath>
#include <random>

namespace evocnn {

template <class Rng>
void init_params(LayerState& layer, Rng& rng) {
    if (!layer.has_params()) return;
    const std::size_t fan_in = layer.kind == LayerKind::Conv
                                   ? layer.in_channels * layer.filter_h * layer.filter_w
                                   : layer.in_features;
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    layer.weights.resize(layer.expected_weight_count());
    for (auto& w : layer.weights) w = normal(rng);
    layer.bias.assign(layer.expected_bias_count(), 0.0);
    layer.weight_velocity.assign(layer.weights.size(), 0.0);
    layer.bias_velocity.assign(layer.bias.size(), 0.0);
}

}  // namespace evocnn
