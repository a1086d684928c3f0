#include "evocnn/layers.hpp"

#include <cmath>
#include <sstream>

#include "evocnn/error.hpp"
#include "evocnn/kernels.hpp"

namespace evocnn {

std::string to_string(const Shape3& s) {
    std::ostringstream os;
    os << "(" << s.c << "," << s.h << "," << s.w << ")";
    return os.str();
}

void Tensor4::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor4::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor4 Tensor4::reshaped(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    if (n * c * h * w != data_.size()) throw StructuralError("reshape changes element count");
    Tensor4 out;
    out.dims_ = {n, c, h, w};
    out.data_ = data_;
    return out;
}

std::string dims_string(const Tensor4& t) {
    std::ostringstream os;
    os << t.batch() << "x" << t.channels() << "x" << t.height() << "x" << t.width();
    return os.str();
}

std::string_view kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "Conv";
        case LayerKind::MaxPool: return "MaxPool";
        case LayerKind::Upsample: return "Upsample";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::Dense: return "Dense";
        case LayerKind::Crop: return "Crop";
    }
    return "?";
}

std::size_t LayerState::expected_weight_count() const {
    if (kind == LayerKind::Conv) return filters * in_channels * filter_h * filter_w;
    if (kind == LayerKind::Dense) return units * in_features;
    return 0;
}

std::size_t LayerState::expected_bias_count() const {
    if (kind == LayerKind::Conv) return filters;
    if (kind == LayerKind::Dense) return units;
    return 0;
}

Shape3 LayerState::output_shape(const Shape3& in) const {
    switch (kind) {
        case LayerKind::Conv:
            if (in.c != in_channels)
                throw StructuralError("conv expects " + std::to_string(in_channels) + " channels, got " +
                                      std::to_string(in.c));
            return {filters, ceil_div(in.h, stride), ceil_div(in.w, stride)};
        case LayerKind::MaxPool: return {in.c, ceil_div(in.h, pool_h), ceil_div(in.w, pool_w)};
        case LayerKind::Upsample: return {in.c, in.h * pool_h, in.w * pool_w};
        case LayerKind::Flatten: return {in.size(), 1, 1};
        case LayerKind::Dense:
            if (in.size() != in_features)
                throw StructuralError("dense expects " + std::to_string(in_features) + " features, got " +
                                      std::to_string(in.size()));
            return {units, 1, 1};
        case LayerKind::Crop:
            if (in.h < target_h || in.w < target_w)
                throw StructuralError("crop target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                                      " exceeds input " + to_string(in));
            return {in.c, target_h, target_w};
    }
    throw StructuralError("unknown layer kind");
}

LayerState LayerState::conv(std::size_t filters, std::size_t in_channels, std::size_t fh, std::size_t fw,
                            std::size_t stride, Activation act) {
    if (filters < 1 || in_channels < 1 || fh < 1 || fw < 1 || stride < 1)
        throw PreconditionError("conv hyperparameters must be positive");
    LayerState l;
    l.kind = LayerKind::Conv;
    l.filters = filters;
    l.in_channels = in_channels;
    l.filter_h = fh;
    l.filter_w = fw;
    l.stride = stride;
    l.activation = act;
    return l;
}

LayerState LayerState::maxpool(std::size_t ph, std::size_t pw) {
    if (ph < 2 || pw < 2) throw PreconditionError("pool dims must be >= 2");
    LayerState l;
    l.kind = LayerKind::MaxPool;
    l.pool_h = ph;
    l.pool_w = pw;
    return l;
}

LayerState LayerState::upsample(std::size_t fh, std::size_t fw) {
    if (fh < 1 || fw < 1 || (fh < 2 && fw < 2)) throw PreconditionError("upsample factor must be >= 2");
    LayerState l;
    l.kind = LayerKind::Upsample;
    l.pool_h = fh;
    l.pool_w = fw;
    return l;
}

LayerState LayerState::flatten() {
    LayerState l;
    l.kind = LayerKind::Flatten;
    return l;
}

LayerState LayerState::dense(std::size_t units, std::size_t in_features) {
    if (units < 1 || in_features < 1) throw PreconditionError("dense dims must be positive");
    LayerState l;
    l.kind = LayerKind::Dense;
    l.units = units;
    l.in_features = in_features;
    l.activation = Activation::Linear;
    return l;
}

LayerState LayerState::crop(std::size_t th, std::size_t tw) {
    if (th < 1 || tw < 1) throw PreconditionError("crop target must be positive");
    LayerState l;
    l.kind = LayerKind::Crop;
    l.target_h = th;
    l.target_w = tw;
    return l;
}

namespace {

std::string at_layer(std::size_t index) { return "layer " + std::to_string(index) + ": "; }

kernels::ConvGeometry conv_geometry(const Tensor4& input, const LayerState& layer) {
    return kernels::ConvGeometry::make(input.batch(), input.channels(), input.height(), input.width(),
                                       layer.filters, layer.filter_h, layer.filter_w, layer.stride);
}

void check_conv(const Tensor4& input, const LayerState& layer, std::size_t index) {
    if (layer.kind != LayerKind::Conv) throw StructuralError(at_layer(index) + "not a conv layer");
    if (input.channels() != layer.in_channels)
        throw StructuralError(at_layer(index) + "conv expects " + std::to_string(layer.in_channels) +
                              " input channels, got tensor " + dims_string(input));
    if (layer.weights.size() != layer.expected_weight_count() || layer.bias.size() != layer.filters)
        throw StructuralError(at_layer(index) + "conv parameter arrays do not match hyperparameters");
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Tensor4 conv_forward(const Tensor4& input, const LayerState& layer, std::size_t layer_index) {
    check_conv(input, layer, layer_index);
    const auto g = conv_geometry(input, layer);
    Tensor4 out(g.batch, g.out_c, g.out_h, g.out_w);
    kernels::parallel::conv_forward(g, input.values(), layer.weights, layer.bias, out.values());
    switch (layer.activation) {
        case Activation::Relu:
            for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::Sigmoid:
            for (double& v : out.values()) v = sigmoid(v);
            break;
        case Activation::Linear: break;
    }
    return out;
}

Tensor4 conv_backward(const Tensor4& grad_out, const Tensor4& cached_input, const Tensor4& cached_output,
                      const LayerState& layer, ParamGrads& grads, std::size_t layer_index) {
    check_conv(cached_input, layer, layer_index);
    const auto g = conv_geometry(cached_input, layer);
    if (grad_out.batch() != g.batch || grad_out.channels() != g.out_c || grad_out.height() != g.out_h ||
        grad_out.width() != g.out_w || !grad_out.same_dims(cached_output))
        throw StructuralError(at_layer(layer_index) + "conv gradient has dims " + dims_string(grad_out));

    // Chain through the activation using the cached post-activation value: relu' is 1 where the
    // output is positive (pre-activation > 0), sigmoid' = y(1-y).
    Tensor4 grad_pre = grad_out;
    auto gp = grad_pre.values();
    auto y = cached_output.values();
    switch (layer.activation) {
        case Activation::Relu:
            for (std::size_t i = 0; i < gp.size(); ++i)
                if (!(y[i] > 0.0)) gp[i] = 0.0;
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] *= y[i] * (1.0 - y[i]);
            break;
        case Activation::Linear: break;
    }

    grads.weights.assign(layer.weights.size(), 0.0);
    grads.bias.assign(layer.bias.size(), 0.0);
    kernels::parallel::conv_backward_params(g, grad_pre.values(), cached_input.values(), grads.weights,
                                            grads.bias);
    Tensor4 grad_in(g.batch, g.in_c, g.in_h, g.in_w);
    kernels::parallel::conv_backward_input(g, grad_pre.values(), layer.weights, grad_in.values());
    return grad_in;
}

Tensor4 maxpool_forward(const Tensor4& input, const LayerState& layer, std::vector<std::size_t>* argmax) {
    if (layer.pool_h < 2 || layer.pool_w < 2) throw StructuralError("pool dims must be >= 2");
    const auto g = kernels::PoolGeometry::make(input.batch(), input.channels(), input.height(), input.width(),
                                               layer.pool_h, layer.pool_w);
    Tensor4 out(g.batch, g.channels, g.out_h, g.out_w);
    std::vector<std::size_t> local;
    std::vector<std::size_t>& am = argmax ? *argmax : local;
    am.assign(out.size(), 0);
    kernels::parallel::maxpool_forward(g, input.values(), out.values(), am);
    return out;
}

Tensor4 maxpool_backward(const Tensor4& grad_out, const Shape3& input_shape, std::span<const std::size_t> argmax) {
    if (argmax.size() != grad_out.size()) throw StructuralError("maxpool gradient does not match cached argmax");
    Tensor4 grad_in(grad_out.batch(), input_shape);
    auto gi = grad_in.values();
    auto go = grad_out.values();
    for (std::size_t i = 0; i < go.size(); ++i) gi[argmax[i]] += go[i];
    return grad_in;
}

Tensor4 upsample_forward(const Tensor4& input, std::size_t factor_h, std::size_t factor_w) {
    if (factor_h < 1 || factor_w < 1) throw PreconditionError("upsample factor must be positive");
    Tensor4 out(input.batch(), input.channels(), input.height() * factor_h, input.width() * factor_w);
    for (std::size_t n = 0; n < input.batch(); ++n)
        for (std::size_t c = 0; c < input.channels(); ++c)
            for (std::size_t h = 0; h < out.height(); ++h)
                for (std::size_t w = 0; w < out.width(); ++w) out(n, c, h, w) = input(n, c, h / factor_h, w / factor_w);
    return out;
}

Tensor4 upsample_backward(const Tensor4& grad_out, std::size_t factor_h, std::size_t factor_w) {
    if (grad_out.height() % factor_h != 0 || grad_out.width() % factor_w != 0)
        throw StructuralError("upsample gradient dims not divisible by factor");
    Tensor4 grad_in(grad_out.batch(), grad_out.channels(), grad_out.height() / factor_h,
                    grad_out.width() / factor_w);
    for (std::size_t n = 0; n < grad_out.batch(); ++n)
        for (std::size_t c = 0; c < grad_out.channels(); ++c)
            for (std::size_t h = 0; h < grad_out.height(); ++h)
                for (std::size_t w = 0; w < grad_out.width(); ++w)
                    grad_in(n, c, h / factor_h, w / factor_w) += grad_out(n, c, h, w);
    return grad_in;
}

Tensor4 crop_forward(const Tensor4& input, std::size_t target_h, std::size_t target_w) {
    if (input.height() < target_h || input.width() < target_w)
        throw StructuralError("crop target larger than input " + dims_string(input));
    Tensor4 out(input.batch(), input.channels(), target_h, target_w);
    for (std::size_t n = 0; n < input.batch(); ++n)
        for (std::size_t c = 0; c < input.channels(); ++c)
            for (std::size_t h = 0; h < target_h; ++h)
                for (std::size_t w = 0; w < target_w; ++w) out(n, c, h, w) = input(n, c, h, w);
    return out;
}

Tensor4 crop_backward(const Tensor4& grad_out, const Shape3& input_shape) {
    Tensor4 grad_in(grad_out.batch(), input_shape);
    for (std::size_t n = 0; n < grad_out.batch(); ++n)
        for (std::size_t c = 0; c < grad_out.channels(); ++c)
            for (std::size_t h = 0; h < grad_out.height(); ++h)
                for (std::size_t w = 0; w < grad_out.width(); ++w) grad_in(n, c, h, w) = grad_out(n, c, h, w);
    return grad_in;
}

Tensor4 dense_forward(const Tensor4& input, const LayerState& layer, std::size_t layer_index) {
    if (input.sample_size() != layer.in_features)
        throw StructuralError(at_layer(layer_index) + "dense expects " + std::to_string(layer.in_features) +
                              " features, got tensor " + dims_string(input));
    if (layer.weights.size() != layer.expected_weight_count() || layer.bias.size() != layer.units)
        throw StructuralError(at_layer(layer_index) + "dense parameter arrays do not match hyperparameters");
    kernels::DenseGeometry g{input.batch(), layer.in_features, layer.units};
    Tensor4 out(input.batch(), layer.units, 1, 1);
    kernels::parallel::dense_forward(g, input.values(), layer.weights, layer.bias, out.values());
    return out;
}

Tensor4 dense_backward(const Tensor4& grad_out, const Tensor4& cached_input, const LayerState& layer,
                       ParamGrads& grads) {
    if (grad_out.batch() != cached_input.batch() || grad_out.sample_size() != layer.units)
        throw StructuralError("dense gradient has dims " + dims_string(grad_out));
    kernels::DenseGeometry g{cached_input.batch(), layer.in_features, layer.units};
    grads.weights.assign(layer.weights.size(), 0.0);
    grads.bias.assign(layer.bias.size(), 0.0);
    kernels::parallel::dense_backward_params(g, grad_out.values(), cached_input.values(), grads.weights,
                                             grads.bias);
    Tensor4 grad_in(cached_input.batch(), cached_input.sample_shape());
    kernels::parallel::dense_backward_input(g, grad_out.values(), layer.weights, grad_in.values());
    return grad_in;
}

}  // namespace evocnn
