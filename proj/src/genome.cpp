#include "evocnn/genome.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "evocnn/error.hpp"

namespace evocnn {

std::string_view genome_kind_name(GenomeKind k) { return k == GenomeKind::Encoder ? "Encoder" : "Classifier"; }

GenomeKind parse_genome_kind(std::string_view s) {
    if (s == "Encoder") return GenomeKind::Encoder;
    if (s == "Classifier") return GenomeKind::Classifier;
    throw ParseError("unknown genome kind '" + std::string(s) + "'", 0);
}

bool LayerGene::within_bounds() const {
    if (kind == Kind::Conv) {
        return filters >= 1 && filters <= kMaxFilters && filter_h >= 1 && filter_h <= kMaxFilterDim &&
               filter_w >= 1 && filter_w <= kMaxFilterDim && stride >= 1 && stride <= kMaxStride;
    }
    return pool_h >= 2 && pool_h <= kMaxPool && pool_w >= 2 && pool_w <= kMaxPool;
}

std::string to_string(const LayerGene& g) {
    std::ostringstream os;
    if (g.is_conv())
        os << "CONV " << g.filters << " " << g.filter_h << " " << g.filter_w << " " << g.stride;
    else
        os << "POOL " << g.pool_h << " " << g.pool_w;
    return os.str();
}

ShapeTrace infer_shapes(const Genome& g, const Shape3& input_shape) {
    if (input_shape.c == 0 || input_shape.h == 0 || input_shape.w == 0)
        throw PreconditionError("input shape must be positive, got " + to_string(input_shape));
    if (g.layers.empty()) throw ValidityError("genome has no layers", 0);
    ShapeTrace trace;
    trace.reserve(g.layers.size() + 1);
    trace.push_back(input_shape);
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        const LayerGene& gene = g.layers[i];
        const Shape3& in = trace.back();
        if (!gene.within_bounds())
            throw ValidityError("layer " + std::to_string(i) + " (" + to_string(gene) + ") outside search bounds", i);
        if (gene.is_conv()) {
            trace.push_back({gene.filters, ceil_div(in.h, gene.stride), ceil_div(in.w, gene.stride)});
        } else {
            // A window larger than the whole extent has no complete position: degenerate.
            if (in.h < gene.pool_h || in.w < gene.pool_w)
                throw ValidityError("layer " + std::to_string(i) + " (" + to_string(gene) +
                                        ") pools a degenerate extent " + to_string(in),
                                    i);
            trace.push_back({in.c, ceil_div(in.h, gene.pool_h), ceil_div(in.w, gene.pool_w)});
        }
    }
    return trace;
}

double compression_ratio(const Genome& g, const Shape3& input_shape) {
    const ShapeTrace trace = infer_shapes(g, input_shape);
    return 1.0 - static_cast<double>(trace.back().size()) / static_cast<double>(input_shape.size());
}

std::optional<Violation> validate_encoder(const Genome& g, const Shape3& input_shape) {
    if (g.kind != GenomeKind::Encoder) return Violation{"genome is not an encoder", std::nullopt};
    ShapeTrace trace;
    try {
        trace = infer_shapes(g, input_shape);
    } catch (const ValidityError& e) {
        return Violation{e.what(), e.layer()};
    } catch (const PreconditionError& e) {
        return Violation{e.what(), std::nullopt};
    }
    if (trace.back().size() >= input_shape.size())
        return Violation{"encoded size " + std::to_string(trace.back().size()) + " is not smaller than input size " +
                             std::to_string(input_shape.size()),
                         std::nullopt};
    return std::nullopt;
}

std::vector<LayerState> derive_decoder(const Genome& g, const Shape3& input_shape) {
    const ShapeTrace trace = infer_shapes(g, input_shape);
    std::vector<LayerState> plan;
    std::size_t channels = trace.back().c;
    for (std::size_t i = g.layers.size(); i-- > 0;) {
        const LayerGene& gene = g.layers[i];
        const Shape3& before = trace[i];
        if (gene.is_pool()) {
            plan.push_back(LayerState::upsample(gene.pool_h, gene.pool_w));
            plan.push_back(LayerState::crop(before.h, before.w));
        } else {
            if (gene.stride > 1) {
                plan.push_back(LayerState::upsample(gene.stride, gene.stride));
                plan.push_back(LayerState::crop(before.h, before.w));
            }
            plan.push_back(LayerState::conv(before.c, channels, gene.filter_h, gene.filter_w, 1));
            channels = before.c;
        }
    }
    if (plan.empty() || plan.back().kind != LayerKind::Conv)
        plan.push_back(LayerState::conv(input_shape.c, channels, 3, 3, 1));
    plan.back().activation = Activation::Sigmoid;
    return plan;
}

Genome seed_genome(GenomeKind kind, std::string id, double learning_rate) {
    Genome g;
    g.id = std::move(id);
    g.kind = kind;
    g.layers.push_back(LayerGene::conv(8, 3, 3, 1));
    if (kind == GenomeKind::Encoder) g.layers.push_back(LayerGene::pool(2, 2));
    g.learning_rate = learning_rate;
    g.generation = 0;
    g.mutation = "Seed";
    return g;
}

std::string serialize_genome(const Genome& g) {
    char lr[64];
    std::snprintf(lr, sizeof lr, "%.17g", g.learning_rate);
    std::ostringstream os;
    os << "GENOME v1 " << genome_kind_name(g.kind) << " " << g.id << " " << g.parent_id.value_or("-") << " "
       << g.generation << " " << lr << " " << g.mutation << "\n";
    for (const auto& gene : g.layers) os << to_string(gene) << "\n";
    return os.str();
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

template <class T>
T parse_number(std::string_view tok, std::size_t offset, const char* what) {
    T value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(std::string("bad ") + what + " '" + std::string(tok) + "'", offset);
    return value;
}

}  // namespace

Genome deserialize_genome(std::string_view text) {
    Genome g;
    std::size_t pos = 0;
    bool header = false;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(pos, end - pos);
        const std::size_t offset = pos;
        pos = end + 1;
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        if (!header) {
            if (tok[0] != "GENOME") throw ParseError("missing GENOME header", offset);
            if (tok.size() < 2) throw ParseError("truncated header", offset);
            if (tok[1] != "v1") {
                std::uint32_t v = 0;
                if (tok[1].size() > 1 && tok[1][0] == 'v')
                    v = parse_number<std::uint32_t>(tok[1].substr(1), offset, "version");
                throw UnsupportedVersion(v, offset);
            }
            if (tok.size() != 8) throw ParseError("header needs 8 fields", offset);
            try {
                g.kind = parse_genome_kind(tok[2]);
            } catch (const ParseError&) {
                throw ParseError("unknown genome kind '" + std::string(tok[2]) + "'", offset);
            }
            g.id = std::string(tok[3]);
            if (tok[4] != "-") g.parent_id = std::string(tok[4]);
            g.generation = parse_number<std::uint64_t>(tok[5], offset, "generation");
            g.learning_rate = parse_number<double>(tok[6], offset, "learning rate");
            g.mutation = std::string(tok[7]);
            header = true;
            continue;
        }
        if (tok[0] == "CONV") {
            if (tok.size() != 5) throw ParseError("CONV needs 4 fields", offset);
            g.layers.push_back(LayerGene::conv(parse_number<std::size_t>(tok[1], offset, "filter count"),
                                               parse_number<std::size_t>(tok[2], offset, "filter height"),
                                               parse_number<std::size_t>(tok[3], offset, "filter width"),
                                               parse_number<std::size_t>(tok[4], offset, "stride")));
        } else if (tok[0] == "POOL") {
            if (tok.size() != 3) throw ParseError("POOL needs 2 fields", offset);
            g.layers.push_back(LayerGene::pool(parse_number<std::size_t>(tok[1], offset, "pool height"),
                                               parse_number<std::size_t>(tok[2], offset, "pool width")));
        } else {
            throw ParseError("unknown gene '" + std::string(tok[0]) + "'", offset);
        }
    }
    if (!header) throw ParseError("empty genome file", text.size());
    if (g.layers.empty()) throw ParseError("genome has no layers", text.size());
    return g;
}

}  // namespace evocnn
