#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evocnn/genome.hpp"
#include "evocnn/layers.hpp"
#include "evocnn/rng.hpp"
#include "evocnn/tensor.hpp"

namespace evocnn {

/// A built, trainable layer sequence with a fixed input shape.
///
/// Autoencoders hold encoder and decoder in one sequence; `encoder_layers()` marks where the
/// encoding is produced. Classifiers end with Flatten + Dense whose logits feed a softmax head.
class Network {
public:
    Network() = default;
    /// Validates that every layer accepts the previous layer's output shape.
    Network(Shape3 input_shape, std::vector<LayerState> layers, std::size_t encoder_layers = 0);

    const Shape3& input_shape() const { return input_shape_; }
    Shape3 output_shape() const { return shapes_.back(); }
    /// Shape after layer i (shape_at(0) is the input).
    const Shape3& shape_at(std::size_t i) const { return shapes_.at(i); }
    std::size_t encoder_layers() const { return encoder_layers_; }
    Shape3 encoding_shape() const { return shapes_.at(encoder_layers_); }

    std::vector<LayerState>& layers() { return layers_; }
    const std::vector<LayerState>& layers() const { return layers_; }

    Tensor4 forward(const Tensor4& x) const { return forward_range(x, 0, layers_.size()); }
    /// Runs layers [first, last).
    Tensor4 forward_range(const Tensor4& x, std::size_t first, std::size_t last) const;
    Tensor4 encode(const Tensor4& x) const { return forward_range(x, 0, encoder_layers_); }

    /// Forward pass that keeps what backward() needs.
    Tensor4 forward_train(const Tensor4& x, std::vector<LayerCache>& caches) const;
    /// Returns the gradient w.r.t. the network input; grads[i] receives layer i's parameter gradients.
    Tensor4 backward(const Tensor4& grad_out, const std::vector<LayerCache>& caches,
                     std::vector<ParamGrads>& grads) const;

    void init_params(Rng& rng);
    void reset_velocity();
    std::size_t parameter_count() const;

private:
    Shape3 input_shape_;
    std::vector<LayerState> layers_;
    std::vector<Shape3> shapes_;
    std::size_t encoder_layers_ = 0;
};

/// Conv/Pool genes followed by Flatten + Dense(classes). Parameters are not initialized.
Network build_classifier(const Genome& g, const Shape3& input_shape, std::size_t classes);
/// Encoder genes followed by the mirrored decoder. Parameters are not initialized.
Network build_autoencoder(const Genome& g, const Shape3& input_shape);
/// Builds the network matching the genome's kind.
Network build_network(const Genome& g, const Shape3& input_shape, std::size_t classes);

/// Child network for `child` whose parameters come from `parent_net` wherever the single mutation
/// separating `parent` and `child` left a layer in place. Conv layers whose shape changed keep the
/// overlapping slice; new or reshaped parameters are drawn from `rng`. Throws StructuralError
/// when the two genomes are not one mutation apart.
Network inherit_weights(const Network& parent_net, const Genome& parent, const Genome& child,
                        const Shape3& input_shape, std::size_t classes, Rng& rng);

/// Map child gene index -> parent gene index (or npos) for genomes one mutation apart.
std::vector<std::size_t> align_genes(const Genome& parent, const Genome& child);

/// Little-endian "EVOW" blob: version, layer count, then per layer kind tag, hyperparameters and
/// f32 weights/biases. Velocity buffers are not stored.
std::vector<std::uint8_t> encode_weights(std::span<const LayerState> layers);
std::vector<LayerState> decode_weights(std::span<const std::uint8_t> bytes);

/// Copies parameters from `stored` into `net`, requiring identical layer hyperparameters.
void load_weights(Network& net, const std::vector<LayerState>& stored);

}  // namespace evocnn
