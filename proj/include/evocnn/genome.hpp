#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evocnn/layers.hpp"
#include "evocnn/tensor.hpp"

namespace evocnn {

enum class GenomeKind { Encoder, Classifier };

std::string_view genome_kind_name(GenomeKind k);
GenomeKind parse_genome_kind(std::string_view s);

// Search-space caps.
inline constexpr std::size_t kMaxStride = 4;
inline constexpr std::size_t kMaxPool = 4;
inline constexpr std::size_t kMaxFilterDim = 9;
inline constexpr std::size_t kMaxFilters = 256;

struct LayerGene {
    enum class Kind { Conv, Pool };
    Kind kind = Kind::Conv;
    std::size_t filters = 0;
    std::size_t filter_h = 0;
    std::size_t filter_w = 0;
    std::size_t stride = 1;
    std::size_t pool_h = 0;
    std::size_t pool_w = 0;

    static LayerGene conv(std::size_t filters, std::size_t fh, std::size_t fw, std::size_t stride = 1) {
        return {Kind::Conv, filters, fh, fw, stride, 0, 0};
    }
    static LayerGene pool(std::size_t ph, std::size_t pw) { return {Kind::Pool, 0, 0, 0, 1, ph, pw}; }

    bool is_conv() const { return kind == Kind::Conv; }
    bool is_pool() const { return kind == Kind::Pool; }
    /// True when every hyperparameter sits inside its bound and cap.
    bool within_bounds() const;

    friend bool operator==(const LayerGene&, const LayerGene&) = default;
};

std::string to_string(const LayerGene& g);

/// Layer-list DNA of an encoder or a classifier plus lineage metadata. Treated as immutable once
/// published; mutations always build a new Genome.
struct Genome {
    std::string id;
    GenomeKind kind = GenomeKind::Classifier;
    std::vector<LayerGene> layers;
    double learning_rate = 0.01;
    std::optional<std::string> parent_id;
    std::uint64_t generation = 0;
    std::string mutation = "Seed";

    /// Structural equality: kind, layers and learning rate. Ignores id and lineage fields.
    bool same_structure(const Genome& o) const {
        return kind == o.kind && layers == o.layers && learning_rate == o.learning_rate;
    }
    friend bool operator==(const Genome&, const Genome&) = default;
};

/// (channels, height, width) at the input and after every layer, size layers + 1.
using ShapeTrace = std::vector<Shape3>;

/// Throws ValidityError naming the offending layer for out-of-bounds genes or when a pooling
/// layer sees a spatial extent smaller than its window.
ShapeTrace infer_shapes(const Genome& g, const Shape3& input_shape);

/// 1 - encoded / input element count.
double compression_ratio(const Genome& g, const Shape3& input_shape);

struct Violation {
    std::string reason;
    std::optional<std::size_t> layer;
};

/// Empty when the encoder is usable and strictly shrinks its input.
std::optional<Violation> validate_encoder(const Genome& g, const Shape3& input_shape);

/// Parameter-free decoder plan mirroring an encoder back to `input_shape`. Pools become
/// Upsample + Crop; strided convs become Upsample + Crop + stride-1 Conv; every decoder conv
/// restores the channel count the mirrored encoder layer consumed and the last one uses sigmoid.
std::vector<LayerState> derive_decoder(const Genome& g, const Shape3& input_shape);

/// Seed genomes: a single Conv(8,3,3,s1), followed by Pool(2,2) for encoders.
Genome seed_genome(GenomeKind kind, std::string id, double learning_rate);

/// Line-oriented text form: a `GENOME v1 ...` header then one `CONV`/`POOL` line per gene.
std::string serialize_genome(const Genome& g);
Genome deserialize_genome(std::string_view text);

}  // namespace evocnn
