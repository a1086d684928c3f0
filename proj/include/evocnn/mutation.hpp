#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evocnn/genome.hpp"
#include "evocnn/rng.hpp"

namespace evocnn {

enum class MutationKind {
    Identity,
    InsertConv,
    RemoveConv,
    AlterStride,
    InsertPool,
    RemovePool,
    AlterFilterNumber,
    AlterFilterSize,
    AlterPoolSize,
    AlterLearningRate,  // classifiers only
};

std::string_view mutation_name(MutationKind k);
std::optional<MutationKind> parse_mutation(std::string_view name);

/// The nine structural mutations.
std::span<const MutationKind> encoder_mutations();
/// The nine structural mutations plus AlterLearningRate.
std::span<const MutationKind> classifier_mutations();
std::span<const MutationKind> mutations_for(GenomeKind kind);

struct MutationOptions {
    std::vector<std::size_t> insert_conv_filters{8, 16, 32, 64};
    std::size_t max_filters = kMaxFilters;
    std::size_t max_tries = 25;
};

/// Uniform draw from a non-empty set.
MutationKind sample_mutation(std::span<const MutationKind> kinds, Rng& rng);

/// Child genome with `child_id`, generation + 1 and the parent recorded, or nullopt when the
/// mutation has nothing to act on or would leave a bound. The parent is never modified.
std::optional<Genome> apply_mutation(const Genome& g, MutationKind kind, Rng& rng, const MutationOptions& opt,
                                     std::string child_id);

struct MutateOutcome {
    std::optional<Genome> child;  // empty: every try was rejected
    std::size_t tries = 0;
};

/// Samples and applies mutations from `kinds` until a child passes validation (validate_encoder
/// for encoders, infer_shapes for classifiers) or opt.max_tries attempts are used up.
MutateOutcome mutate_valid(const Genome& g, const Shape3& input_shape, std::span<const MutationKind> kinds,
                           Rng& rng, const MutationOptions& opt, const std::string& child_id);

/// Identity child used when mutate_valid gives up.
Genome identity_child(const Genome& g, std::string child_id);

}  // namespace evocnn
