#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evocnn/config.hpp"
#include "evocnn/data.hpp"
#include "evocnn/network.hpp"
#include "evocnn/popstore.hpp"

namespace evocnn {

/// Data an evolution step trains on.
struct StepData {
    Splits splits;
    Shape3 input_shape;
    std::size_t classes = 10;
};

/// Raw images for the configured dataset (synthetic or CIFAR-10 files).
Dataset load_raw_dataset(const RunConfig& cfg);
/// Autoencoder step: split raw data. Classify step: encoded splits from cfg.encoded_dir, raw
/// splits when it is unset.
StepData load_step_data(const RunConfig& cfg, GenomeKind kind);

std::filesystem::path population_dir(const RunConfig& cfg, GenomeKind kind);
std::string worker_name(std::size_t index);

/// One worker process' view of a population.
class Worker {
public:
    Worker(const RunConfig& cfg, GenomeKind kind, std::size_t index, const StepData& data);

    /// Trains and publishes this worker's seeds unless its seeded marker already exists. A
    /// restarted worker tops the population back up to two with fresh seeds.
    void seed();

    enum class Status { Completed, Abandoned, TooFew };
    struct RoundResult {
        Status status = Status::Completed;
        std::string winner, loser, child;
        WinReason reason = WinReason::Scalar;
    };
    /// One tournament round: pick two live individuals, kill the loser, mutate and train the
    /// winner's child, publish it. `round` is the ticket number (or a local counter).
    RoundResult round(std::uint64_t round);

    /// seed() then rounds until the shared round budget or the wall deadline is reached.
    void run(std::chrono::system_clock::time_point start);

    PopulationStore& store() { return store_; }
    const std::string& id() const { return name_; }

private:
    void publish_seed();
    Individual train_and_package(const Genome& g, Network net, std::uint64_t train_seed);
    double offset_seconds() const;

    const RunConfig& cfg_;
    GenomeKind kind_;
    std::string name_;
    const StepData& data_;
    PopulationStore store_;
    Rng rng_;
    std::uint64_t counter_ = 0;
    std::chrono::system_clock::time_point start_;
};

/// Start time shared by all workers of a step, stored in logs/run_start.
void write_run_start(PopulationStore& store, std::chrono::system_clock::time_point t);
std::chrono::system_clock::time_point read_run_start(const PopulationStore& store);

struct StepSummary {
    std::size_t published = 0;  // seeds and children
    std::size_t rounds = 0;     // completed tournaments
    std::size_t live = 0;
    std::size_t dead = 0;
    double best_metric = 0.0;   // best scalar (classifiers) or best TOPSIS score (autoencoders)
    std::string best_id;
    /// Running best over publish order; non-decreasing.
    std::vector<double> best_so_far;
    double wall_seconds = 0.0;
    std::size_t failed_workers = 0;
};

/// Writes the config every worker of a step reads (paths made absolute) and returns its path.
std::filesystem::path write_step_config(const RunConfig& cfg, GenomeKind kind);
/// Starts `exe worker --config <file> --kind <kind> --index <index>`; returns the child pid.
int spawn_worker(const std::filesystem::path& exe, const std::filesystem::path& config_file, GenomeKind kind,
                 std::size_t index);

/// Spawns cfg.workers processes of `exe` with the hidden `worker` verb, waits for them and
/// summarizes the population. The population must be fresh or left by a run of the same config.
StepSummary run_step(const RunConfig& cfg, GenomeKind kind, const std::filesystem::path& exe);
/// Summary of whatever is in the population right now.
StepSummary summarize(const RunConfig& cfg, GenomeKind kind);

/// Entry of the hidden `worker` verb.
int worker_main(const RunConfig& cfg, GenomeKind kind, std::size_t index);

struct SelectedEncoder {
    std::string id;
    double score = 0.0;
    std::filesystem::path encoded_dir;
    Shape3 encoding_shape;
};

/// Alternatives of the first Pareto front of the live autoencoder population.
std::vector<Alternative> cae_front(const RunConfig& cfg);
/// TOPSIS over front 0 (or `forced_id`), encodes train/val/test with the chosen encoder and
/// writes them to report_dir/encoded-<id>/{train,val,test}.evod.
SelectedEncoder finalize_cae_step(const RunConfig& cfg, const std::optional<std::string>& forced_id = std::nullopt);

struct ComposedResult {
    std::string encoder_id;
    std::string classifier_id;
    Network net;
    double test_accuracy = 0.0;            // composed network on raw test images
    double two_stage_test_accuracy = 0.0;  // classifier on encoded test images
    std::filesystem::path weights_file;
};

/// Encoder of `encoder_id` followed by the layers of classifier `classifier_id` (best live
/// classifier when empty), evaluated on the raw test split.
ComposedResult compose_final(const RunConfig& cfg, const std::string& encoder_id,
                             const std::optional<std::string>& classifier_id = std::nullopt);

struct HistoryOptions {
    /// Fill the time_offset_s column; leave it off for byte-comparable exports.
    bool include_wall_time = true;
};

/// CSV of every individual ever published (live and dead), sorted by generation, round, id.
/// Columns: id,worker,round,time_offset_s,metric,compression,accuracy,generation,mutation,parent_id
std::string export_history(const RunConfig& cfg, GenomeKind kind, const HistoryOptions& opt = {});

}  // namespace evocnn
