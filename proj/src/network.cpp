#include "evocnn/network.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "evocnn/error.hpp"

namespace evocnn {

Network::Network(Shape3 input_shape, std::vector<LayerState> layers, std::size_t encoder_layers)
    : input_shape_(input_shape), layers_(std::move(layers)), encoder_layers_(encoder_layers) {
    if (encoder_layers_ > layers_.size()) throw StructuralError("encoder boundary beyond last layer");
    shapes_.reserve(layers_.size() + 1);
    shapes_.push_back(input_shape_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        try {
            shapes_.push_back(layers_[i].output_shape(shapes_.back()));
        } catch (const StructuralError& e) {
            throw StructuralError("layer " + std::to_string(i) + ": " + e.what());
        }
    }
}

Tensor4 Network::forward_range(const Tensor4& x, std::size_t first, std::size_t last) const {
    if (x.sample_shape() != shapes_.at(first))
        throw StructuralError("input " + dims_string(x) + " does not match expected " + to_string(shapes_.at(first)));
    Tensor4 cur = x;
    for (std::size_t i = first; i < last; ++i) {
        const LayerState& l = layers_[i];
        switch (l.kind) {
            case LayerKind::Conv: cur = conv_forward(cur, l, i); break;
            case LayerKind::MaxPool: cur = maxpool_forward(cur, l); break;
            case LayerKind::Upsample: cur = upsample_forward(cur, l.pool_h, l.pool_w); break;
            case LayerKind::Flatten: cur = cur.reshaped(cur.batch(), cur.sample_size(), 1, 1); break;
            case LayerKind::Dense: cur = dense_forward(cur, l, i); break;
            case LayerKind::Crop: cur = crop_forward(cur, l.target_h, l.target_w); break;
        }
    }
    return cur;
}

Tensor4 Network::forward_train(const Tensor4& x, std::vector<LayerCache>& caches) const {
    if (x.sample_shape() != input_shape_)
        throw StructuralError("input " + dims_string(x) + " does not match network input " + to_string(input_shape_));
    caches.assign(layers_.size(), {});
    Tensor4 cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerState& l = layers_[i];
        LayerCache& c = caches[i];
        switch (l.kind) {
            case LayerKind::Conv:
                c.input = cur;
                cur = conv_forward(cur, l, i);
                c.output = cur;
                break;
            case LayerKind::MaxPool: cur = maxpool_forward(cur, l, &c.argmax); break;
            case LayerKind::Upsample: cur = upsample_forward(cur, l.pool_h, l.pool_w); break;
            case LayerKind::Flatten: cur = cur.reshaped(cur.batch(), cur.sample_size(), 1, 1); break;
            case LayerKind::Dense:
                c.input = cur;
                cur = dense_forward(cur, l, i);
                break;
            case LayerKind::Crop: cur = crop_forward(cur, l.target_h, l.target_w); break;
        }
    }
    return cur;
}

Tensor4 Network::backward(const Tensor4& grad_out, const std::vector<LayerCache>& caches,
                          std::vector<ParamGrads>& grads) const {
    if (caches.size() != layers_.size()) throw StructuralError("backward without matching forward caches");
    grads.resize(layers_.size());
    Tensor4 g = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const LayerState& l = layers_[i];
        const LayerCache& c = caches[i];
        const Shape3& in_shape = shapes_[i];
        switch (l.kind) {
            case LayerKind::Conv: g = conv_backward(g, c.input, c.output, l, grads[i], i); break;
            case LayerKind::MaxPool: g = maxpool_backward(g, in_shape, c.argmax); break;
            case LayerKind::Upsample: g = upsample_backward(g, l.pool_h, l.pool_w); break;
            case LayerKind::Flatten: g = g.reshaped(g.batch(), in_shape.c, in_shape.h, in_shape.w); break;
            case LayerKind::Dense: g = dense_backward(g, c.input, l, grads[i]); break;
            case LayerKind::Crop: g = crop_backward(g, in_shape); break;
        }
    }
    return g;
}

void Network::init_params(Rng& rng) {
    for (auto& l : layers_) evocnn::init_params(l, rng);
}

void Network::reset_velocity() {
    for (auto& l : layers_) {
        l.weight_velocity.assign(l.weights.size(), 0.0);
        l.bias_velocity.assign(l.bias.size(), 0.0);
    }
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
}

namespace {

std::vector<LayerState> encoder_stack(const Genome& g, const Shape3& input_shape) {
    const ShapeTrace trace = infer_shapes(g, input_shape);
    std::vector<LayerState> layers;
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        const LayerGene& gene = g.layers[i];
        if (gene.is_conv())
            layers.push_back(LayerState::conv(gene.filters, trace[i].c, gene.filter_h, gene.filter_w, gene.stride));
        else
            layers.push_back(LayerState::maxpool(gene.pool_h, gene.pool_w));
    }
    return layers;
}

}  // namespace

Network build_classifier(const Genome& g, const Shape3& input_shape, std::size_t classes) {
    auto layers = encoder_stack(g, input_shape);
    const std::size_t n_genes = layers.size();
    const Shape3 features = infer_shapes(g, input_shape).back();
    layers.push_back(LayerState::flatten());
    layers.push_back(LayerState::dense(classes, features.size()));
    return Network(input_shape, std::move(layers), n_genes);
}

Network build_autoencoder(const Genome& g, const Shape3& input_shape) {
    auto layers = encoder_stack(g, input_shape);
    const std::size_t n_enc = layers.size();
    for (auto& l : derive_decoder(g, input_shape)) layers.push_back(std::move(l));
    return Network(input_shape, std::move(layers), n_enc);
}

Network build_network(const Genome& g, const Shape3& input_shape, std::size_t classes) {
    return g.kind == GenomeKind::Encoder ? build_autoencoder(g, input_shape)
                                         : build_classifier(g, input_shape, classes);
}

std::vector<std::size_t> align_genes(const Genome& parent, const Genome& child) {
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    const auto& p = parent.layers;
    const auto& c = child.layers;
    std::vector<std::size_t> map(c.size(), npos);
    auto mismatch = [&] {
        return StructuralError("genome " + child.id + " is not a single mutation of " + parent.id);
    };
    if (child.kind != parent.kind) throw mismatch();
    if (c.size() == p.size()) {
        std::size_t differing = 0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (c[i].kind != p[i].kind) throw mismatch();
            if (!(c[i] == p[i])) ++differing;
            map[i] = i;
        }
        if (differing > 1) throw mismatch();
    } else if (c.size() == p.size() + 1) {
        std::size_t k = 0;
        while (k < p.size() && c[k] == p[k]) ++k;
        for (std::size_t i = k + 1; i < c.size(); ++i)
            if (!(c[i] == p[i - 1])) throw mismatch();
        for (std::size_t i = 0; i < c.size(); ++i) map[i] = i < k ? i : (i == k ? npos : i - 1);
    } else if (p.size() == c.size() + 1) {
        std::size_t k = 0;
        while (k < c.size() && c[k] == p[k]) ++k;
        for (std::size_t i = k; i < c.size(); ++i)
            if (!(c[i] == p[i + 1])) throw mismatch();
        for (std::size_t i = 0; i < c.size(); ++i) map[i] = i < k ? i : i + 1;
    } else {
        throw mismatch();
    }
    return map;
}

namespace {

// Copies the overlapping (filters, in_channels, kh, kw) block of a conv layer; the child keeps
// its fresh values elsewhere.
void copy_conv_overlap(const LayerState& src, LayerState& dst) {
    if (src.filters == dst.filters && src.in_channels == dst.in_channels && src.filter_h == dst.filter_h &&
        src.filter_w == dst.filter_w) {
        dst.weights = src.weights;
        dst.bias = src.bias;
        return;
    }
    const std::size_t f = std::min(src.filters, dst.filters);
    const std::size_t ic = std::min(src.in_channels, dst.in_channels);
    const std::size_t kh = std::min(src.filter_h, dst.filter_h);
    const std::size_t kw = std::min(src.filter_w, dst.filter_w);
    for (std::size_t o = 0; o < f; ++o) {
        for (std::size_t i = 0; i < ic; ++i)
            for (std::size_t y = 0; y < kh; ++y)
                for (std::size_t x = 0; x < kw; ++x)
                    dst.weights[((o * dst.in_channels + i) * dst.filter_h + y) * dst.filter_w + x] =
                        src.weights[((o * src.in_channels + i) * src.filter_h + y) * src.filter_w + x];
        dst.bias[o] = src.bias[o];
    }
}

// Indices of the conv layers in a layer list, in order.
std::vector<std::size_t> conv_positions(const std::vector<LayerState>& layers, std::size_t first,
                                        std::size_t last) {
    std::vector<std::size_t> out;
    for (std::size_t i = first; i < last; ++i)
        if (layers[i].kind == LayerKind::Conv) out.push_back(i);
    return out;
}

}  // namespace

Network inherit_weights(const Network& parent_net, const Genome& parent, const Genome& child,
                        const Shape3& input_shape, std::size_t classes, Rng& rng) {
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    const std::vector<std::size_t> map = align_genes(parent, child);
    if (parent_net.encoder_layers() != parent.layers.size())
        throw StructuralError("parent network does not match parent genome " + parent.id);

    Network net = build_network(child, input_shape, classes);
    net.init_params(rng);
    auto& dst = net.layers();
    const auto& src = parent_net.layers();

    for (std::size_t i = 0; i < map.size(); ++i) {
        if (map[i] == npos || dst[i].kind != LayerKind::Conv) continue;
        copy_conv_overlap(src[map[i]], dst[i]);
    }

    if (child.kind == GenomeKind::Classifier) {
        // Head: Flatten then Dense. Kept only when its input size is unchanged.
        const LayerState& ph = src.back();
        LayerState& ch = dst.back();
        if (ph.in_features == ch.in_features && ph.units == ch.units) {
            ch.weights = ph.weights;
            ch.bias = ph.bias;
        }
    } else {
        // Decoder conv j mirrors encoder conv (count - 1 - j); follow the gene alignment.
        const auto p_enc = conv_positions(src, 0, parent.layers.size());
        const auto c_enc = conv_positions(dst, 0, child.layers.size());
        const auto p_dec = conv_positions(src, parent.layers.size(), src.size());
        const auto c_dec = conv_positions(dst, child.layers.size(), dst.size());
        auto mirror_of = [](const std::vector<std::size_t>& enc, const std::vector<std::size_t>& dec,
                            std::size_t enc_rank) -> std::size_t { return dec[enc.size() - 1 - enc_rank]; };
        for (std::size_t r = 0; r < c_enc.size(); ++r) {
            const std::size_t parent_gene = map[c_enc[r]];
            if (parent_gene == npos) continue;
            const auto it = std::find(p_enc.begin(), p_enc.end(), parent_gene);
            if (it == p_enc.end()) continue;
            const std::size_t pr = static_cast<std::size_t>(it - p_enc.begin());
            copy_conv_overlap(src[mirror_of(p_enc, p_dec, pr)], dst[mirror_of(c_enc, c_dec, r)]);
        }
        // A decoder without any mirrored conv ends in one extra output conv.
        if (c_dec.size() > c_enc.size() && p_dec.size() > p_enc.size())
            copy_conv_overlap(src[p_dec.back()], dst[c_dec.back()]);
    }
    net.reset_velocity();
    return net;
}

namespace {

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
    void bytes(const char* s, std::size_t n) { out_.insert(out_.end(), s, s + n); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
    std::size_t offset() const { return pos_; }
    void need(std::size_t n, const char* what) {
        if (b_.size() - pos_ < n) throw ParseError(std::string("truncated weights blob reading ") + what, pos_);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return b_[pos_++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

private:
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

constexpr std::uint32_t kWeightsVersion = 1;

std::vector<std::uint32_t> hyperparams(const LayerState& l) {
    auto u = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
    switch (l.kind) {
        case LayerKind::Conv:
            return {u(l.filters), u(l.in_channels), u(l.filter_h), u(l.filter_w), u(l.stride),
                    static_cast<std::uint32_t>(l.activation)};
        case LayerKind::MaxPool:
        case LayerKind::Upsample: return {u(l.pool_h), u(l.pool_w)};
        case LayerKind::Flatten: return {};
        case LayerKind::Dense: return {u(l.units), u(l.in_features)};
        case LayerKind::Crop: return {u(l.target_h), u(l.target_w)};
    }
    return {};
}

std::size_t hyperparam_count(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return 6;
        case LayerKind::Flatten: return 0;
        default: return 2;
    }
}

}  // namespace

std::vector<std::uint8_t> encode_weights(std::span<const LayerState> layers) {
    Writer w;
    w.bytes("EVOW", 4);
    w.u32(kWeightsVersion);
    w.u32(static_cast<std::uint32_t>(layers.size()));
    for (const auto& l : layers) {
        w.u8(static_cast<std::uint8_t>(l.kind));
        for (auto v : hyperparams(l)) w.u32(v);
        w.u64(l.weights.size());
        w.u64(l.bias.size());
        for (double v : l.weights) w.f32(static_cast<float>(v));
        for (double v : l.bias) w.f32(static_cast<float>(v));
    }
    return w.take();
}

std::vector<LayerState> decode_weights(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), "EVOW", 4) != 0) throw ParseError("bad weights magic", 0);
    for (int i = 0; i < 4; ++i) r.u8("magic");
    const std::size_t version_at = r.offset();
    const std::uint32_t version = r.u32("version");
    if (version != kWeightsVersion) throw UnsupportedVersion(version, version_at);
    const std::uint32_t count = r.u32("layer count");
    std::vector<LayerState> layers;
    layers.reserve(std::min<std::uint32_t>(count, 1024));
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t at = r.offset();
        const std::uint8_t tag = r.u8("kind tag");
        if (tag > static_cast<std::uint8_t>(LayerKind::Crop))
            throw ParseError("unknown layer kind tag " + std::to_string(tag), at);
        LayerState l;
        l.kind = static_cast<LayerKind>(tag);
        std::vector<std::uint32_t> hp(hyperparam_count(l.kind));
        for (auto& v : hp) v = r.u32("hyperparameter");
        switch (l.kind) {
            case LayerKind::Conv:
                l.filters = hp[0];
                l.in_channels = hp[1];
                l.filter_h = hp[2];
                l.filter_w = hp[3];
                l.stride = hp[4];
                if (hp[5] > static_cast<std::uint32_t>(Activation::Linear)) throw ParseError("bad activation", at);
                l.activation = static_cast<Activation>(hp[5]);
                break;
            case LayerKind::MaxPool:
            case LayerKind::Upsample:
                l.pool_h = hp[0];
                l.pool_w = hp[1];
                break;
            case LayerKind::Flatten: break;
            case LayerKind::Dense:
                l.units = hp[0];
                l.in_features = hp[1];
                l.activation = Activation::Linear;
                break;
            case LayerKind::Crop:
                l.target_h = hp[0];
                l.target_w = hp[1];
                break;
        }
        const std::size_t len_at = r.offset();
        const std::uint64_t nw = r.u64("weight length");
        const std::uint64_t nb = r.u64("bias length");
        if (nw != l.expected_weight_count() || nb != l.expected_bias_count())
            throw ParseError("parameter lengths disagree with hyperparameters", len_at);
        r.need(static_cast<std::size_t>((nw + nb) * 4), "parameters");
        l.weights.resize(nw);
        for (auto& v : l.weights) v = r.f32("weight");
        l.bias.resize(nb);
        for (auto& v : l.bias) v = r.f32("bias");
        l.weight_velocity.assign(nw, 0.0);
        l.bias_velocity.assign(nb, 0.0);
        layers.push_back(std::move(l));
    }
    if (r.offset() != bytes.size()) throw ParseError("trailing bytes after weights", r.offset());
    return layers;
}

void load_weights(Network& net, const std::vector<LayerState>& stored) {
    auto& layers = net.layers();
    if (stored.size() != layers.size())
        throw StructuralError("stored weights have " + std::to_string(stored.size()) + " layers, network has " +
                              std::to_string(layers.size()));
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (hyperparams(stored[i]) != hyperparams(layers[i]) || stored[i].kind != layers[i].kind)
            throw StructuralError("stored layer " + std::to_string(i) + " differs from network layer");
        layers[i].weights = stored[i].weights;
        layers[i].bias = stored[i].bias;
    }
    net.reset_velocity();
}

}  // namespace evocnn
