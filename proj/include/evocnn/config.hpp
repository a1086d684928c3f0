#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "evocnn/data.hpp"
#include "evocnn/mcdm.hpp"
#include "evocnn/mutation.hpp"
#include "evocnn/selection.hpp"

namespace evocnn {

enum class Step { Cae, Classify, Full };
std::string_view step_name(Step s);
Step parse_step(std::string_view s);

/// Every knob of a pipeline run. Read from a `key = value` text file; `#` starts a comment.
struct RunConfig {
    // paths
    std::filesystem::path population_root = "population";
    std::filesystem::path report_dir = "reports";
    std::string dataset = "synth";  // synth | cifar10
    std::filesystem::path cifar10_dir;
    std::filesystem::path encoded_dir;  // classify step reads {train,val,test}.evod from here when set

    Step step = Step::Full;
    std::size_t workers = 1;
    std::size_t seeds_per_worker = 2;

    std::size_t epochs = 25;
    std::size_t batch_size = 50;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t classes = 10;

    TopsisWeights topsis_weights{0.5, 0.5};
    IsolationMode isolation = IsolationMode::MeanDistance;
    MutationOptions mutation;
    /// Mutations a worker may draw; empty means the full set for the genome kind.
    std::vector<MutationKind> mutation_kinds;

    std::uint64_t master_seed = 1;
    std::uint64_t data_seed = 1;
    /// Completed-round budget per evolution step, shared by all workers; 0 = unlimited.
    std::uint64_t rounds = 0;
    /// Wall-clock budget per evolution step in seconds; 0 = unlimited.
    double wall_seconds = 0.0;

    SynthConfig synth;  // synth.classes is taken from `classes`
    int omp_threads = 1;

    /// Throws PreconditionError when counts are zero or no budget is set.
    void validate() const;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& file);
/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& c);
/// EVOCNN_POPULATION_ROOT, EVOCNN_REPORT_DIR, EVOCNN_CIFAR10_DIR and EVOCNN_ENCODED_DIR replace
/// the corresponding paths.
void apply_env_overrides(RunConfig& c);

}  // namespace evocnn
