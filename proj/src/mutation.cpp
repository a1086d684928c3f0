#include "evocnn/mutation.hpp"

#include <array>

#include "evocnn/error.hpp"

namespace evocnn {

namespace {

constexpr std::array kEncoderKinds{
    MutationKind::Identity,   MutationKind::InsertConv,        MutationKind::RemoveConv,
    MutationKind::AlterStride, MutationKind::InsertPool,       MutationKind::RemovePool,
    MutationKind::AlterFilterNumber, MutationKind::AlterFilterSize, MutationKind::AlterPoolSize,
};

constexpr std::array kClassifierKinds{
    MutationKind::Identity,   MutationKind::InsertConv,        MutationKind::RemoveConv,
    MutationKind::AlterStride, MutationKind::InsertPool,       MutationKind::RemovePool,
    MutationKind::AlterFilterNumber, MutationKind::AlterFilterSize, MutationKind::AlterPoolSize,
    MutationKind::AlterLearningRate,
};

constexpr std::array<std::pair<MutationKind, std::string_view>, 10> kNames{{
    {MutationKind::Identity, "Identity"},
    {MutationKind::InsertConv, "InsertConv"},
    {MutationKind::RemoveConv, "RemoveConv"},
    {MutationKind::AlterStride, "AlterStride"},
    {MutationKind::InsertPool, "InsertPool"},
    {MutationKind::RemovePool, "RemovePool"},
    {MutationKind::AlterFilterNumber, "AlterFilterNumber"},
    {MutationKind::AlterFilterSize, "AlterFilterSize"},
    {MutationKind::AlterPoolSize, "AlterPoolSize"},
    {MutationKind::AlterLearningRate, "AlterLearningRate"},
}};

std::size_t uniform_index(std::size_t n, Rng& rng) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

bool coin(Rng& rng) { return std::uniform_int_distribution<int>(0, 1)(rng) == 1; }

std::vector<std::size_t> positions_of(const Genome& g, LayerGene::Kind kind) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < g.layers.size(); ++i)
        if (g.layers[i].kind == kind) out.push_back(i);
    return out;
}

// +1 or -1 within [lo, hi]; nullopt when the drawn direction leaves the range.
std::optional<std::size_t> step_within(std::size_t v, bool up, std::size_t lo, std::size_t hi) {
    if (up) return v + 1 <= hi ? std::optional(v + 1) : std::nullopt;
    return v >= lo + 1 ? std::optional(v - 1) : std::nullopt;
}

}  // namespace

std::string_view mutation_name(MutationKind k) {
    for (const auto& [kind, name] : kNames)
        if (kind == k) return name;
    return "?";
}

std::optional<MutationKind> parse_mutation(std::string_view name) {
    for (const auto& [kind, n] : kNames)
        if (n == name) return kind;
    return std::nullopt;
}

std::span<const MutationKind> encoder_mutations() { return kEncoderKinds; }
std::span<const MutationKind> classifier_mutations() { return kClassifierKinds; }
std::span<const MutationKind> mutations_for(GenomeKind kind) {
    return kind == GenomeKind::Encoder ? encoder_mutations() : classifier_mutations();
}

MutationKind sample_mutation(std::span<const MutationKind> kinds, Rng& rng) {
    if (kinds.empty()) throw PreconditionError("mutation set is empty");
    return kinds[uniform_index(kinds.size(), rng)];
}

Genome identity_child(const Genome& g, std::string child_id) {
    Genome c = g;
    c.id = std::move(child_id);
    c.parent_id = g.id;
    c.generation = g.generation + 1;
    c.mutation = std::string(mutation_name(MutationKind::Identity));
    return c;
}

std::optional<Genome> apply_mutation(const Genome& g, MutationKind kind, Rng& rng, const MutationOptions& opt,
                                     std::string child_id) {
    Genome c = identity_child(g, std::move(child_id));
    c.mutation = std::string(mutation_name(kind));
    auto& layers = c.layers;
    switch (kind) {
        case MutationKind::Identity: return c;

        case MutationKind::InsertConv: {
            if (opt.insert_conv_filters.empty()) return std::nullopt;
            const std::size_t f = opt.insert_conv_filters[uniform_index(opt.insert_conv_filters.size(), rng)];
            const std::size_t at = uniform_index(layers.size() + 1, rng);
            layers.insert(layers.begin() + static_cast<std::ptrdiff_t>(at), LayerGene::conv(f, 3, 3, 1));
            return c;
        }
        case MutationKind::InsertPool: {
            const std::size_t at = uniform_index(layers.size() + 1, rng);
            layers.insert(layers.begin() + static_cast<std::ptrdiff_t>(at), LayerGene::pool(2, 2));
            return c;
        }
        case MutationKind::RemoveConv:
        case MutationKind::RemovePool: {
            const auto pos = positions_of(g, kind == MutationKind::RemoveConv ? LayerGene::Kind::Conv
                                                                              : LayerGene::Kind::Pool);
            if (pos.empty() || layers.size() < 2) return std::nullopt;
            layers.erase(layers.begin() + static_cast<std::ptrdiff_t>(pos[uniform_index(pos.size(), rng)]));
            return c;
        }
        case MutationKind::AlterStride: {
            const auto pos = positions_of(g, LayerGene::Kind::Conv);
            if (pos.empty()) return std::nullopt;
            LayerGene& gene = layers[pos[uniform_index(pos.size(), rng)]];
            const auto s = step_within(gene.stride, coin(rng), 1, kMaxStride);
            if (!s) return std::nullopt;
            gene.stride = *s;
            return c;
        }
        case MutationKind::AlterFilterNumber: {
            const auto pos = positions_of(g, LayerGene::Kind::Conv);
            if (pos.empty()) return std::nullopt;
            LayerGene& gene = layers[pos[uniform_index(pos.size(), rng)]];
            const std::size_t cap = std::min(opt.max_filters, kMaxFilters);
            if (coin(rng)) {
                if (gene.filters * 2 > cap) return std::nullopt;
                gene.filters *= 2;
            } else {
                if (gene.filters / 2 < 1) return std::nullopt;
                gene.filters /= 2;
            }
            return c;
        }
        case MutationKind::AlterFilterSize: {
            const auto pos = positions_of(g, LayerGene::Kind::Conv);
            if (pos.empty()) return std::nullopt;
            LayerGene& gene = layers[pos[uniform_index(pos.size(), rng)]];
            std::size_t& dim = coin(rng) ? gene.filter_h : gene.filter_w;
            const auto d = step_within(dim, coin(rng), 1, kMaxFilterDim);
            if (!d) return std::nullopt;
            dim = *d;
            return c;
        }
        case MutationKind::AlterPoolSize: {
            const auto pos = positions_of(g, LayerGene::Kind::Pool);
            if (pos.empty()) return std::nullopt;
            LayerGene& gene = layers[pos[uniform_index(pos.size(), rng)]];
            const bool up = coin(rng);
            const auto ph = step_within(gene.pool_h, up, 2, kMaxPool);
            const auto pw = step_within(gene.pool_w, up, 2, kMaxPool);
            if (!ph || !pw) return std::nullopt;
            gene.pool_h = *ph;
            gene.pool_w = *pw;
            return c;
        }
        case MutationKind::AlterLearningRate: {
            if (g.kind != GenomeKind::Classifier) return std::nullopt;
            c.learning_rate = coin(rng) ? g.learning_rate * 2.0 : g.learning_rate * 0.5;
            return c;
        }
    }
    return std::nullopt;
}

MutateOutcome mutate_valid(const Genome& g, const Shape3& input_shape, std::span<const MutationKind> kinds,
                           Rng& rng, const MutationOptions& opt, const std::string& child_id) {
    if (opt.max_tries < 1) throw PreconditionError("max_tries must be >= 1");
    MutateOutcome out;
    for (out.tries = 1; out.tries <= opt.max_tries; ++out.tries) {
        const MutationKind kind = sample_mutation(kinds, rng);
        auto child = apply_mutation(g, kind, rng, opt, child_id);
        if (!child) continue;
        if (g.kind == GenomeKind::Encoder) {
            if (validate_encoder(*child, input_shape)) continue;
        } else {
            try {
                infer_shapes(*child, input_shape);
            } catch (const ValidityError&) {
                continue;
            }
        }
        out.child = std::move(child);
        return out;
    }
    out.tries = opt.max_tries;
    return out;
}

}  // namespace evocnn
