#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evocnn/genome.hpp"
#include "evocnn/rng.hpp"
#include "evocnn/selection.hpp"

namespace evocnn {

/// Contents of the one-line fitness sidecar
/// `id,kind,metric_or_pair,wall_seconds,worker_id,generation,parent_id,mutation`.
/// Autoencoder pairs are written `compression;accuracy`.
struct IndividualRecord {
    std::string id;
    GenomeKind kind = GenomeKind::Classifier;
    FitnessRecord fitness;
    double wall_seconds = 0.0;
    std::string worker_id;
    std::uint64_t generation = 0;
    std::optional<std::string> parent_id;
    std::string mutation;
};

std::string format_sidecar(const IndividualRecord& r);
IndividualRecord parse_sidecar(std::string_view line);

/// Everything published for one individual.
struct Individual {
    Genome genome;
    std::vector<std::uint8_t> weights;  // EVOW blob
    IndividualRecord record;
};

/// Population directory shared by worker processes.
///
///   live/<id>/      published individuals (genome.txt, weights.evow, fitness.csv)
///   claimed/<id>/   staging area of an individual being trained by exactly one worker
///   dead/<id>/      removed individuals, weights deleted
///   logs/           per-worker append-only logs
///   tickets/        one exclusively created file per started round
///
/// All coordination is rename(2) and O_EXCL creation.
class PopulationStore {
public:
    static constexpr const char* kGenomeFile = "genome.txt";
    static constexpr const char* kWeightsFile = "weights.evow";
    static constexpr const char* kFitnessFile = "fitness.csv";

    /// Creates the layout if it does not exist.
    explicit PopulationStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path live_dir() const { return root_ / "live"; }
    std::filesystem::path claimed_dir() const { return root_ / "claimed"; }
    std::filesystem::path dead_dir() const { return root_ / "dead"; }
    std::filesystem::path logs_dir() const { return root_ / "logs"; }
    std::filesystem::path tickets_dir() const { return root_ / "tickets"; }

    /// Reserves a fresh id (worker id + counter + random suffix) by creating claimed/<id>, and
    /// records it in the worker's claim log. Regenerates on collision.
    std::string claim_id(const std::string& worker_id, std::uint64_t& counter, Rng& rng);

    struct PublishHooks {
        std::function<void()> before_rename;
    };

    /// Writes all files into claimed/<id> then renames it to live/<id>; fitness is written last.
    void publish(const Individual& ind, const PublishHooks& hooks = {});

    /// Sorted ids currently in live/.
    std::vector<std::string> list_live() const;
    std::vector<std::string> list_dead() const;
    std::size_t live_count() const { return list_live().size(); }

    /// Uniform pair without replacement over a listing of live/; nullopt while fewer than two
    /// individuals are live. Ids whose sidecar vanishes before it can be read are resampled.
    std::optional<std::pair<std::string, std::string>> sample_pair(Rng& rng) const;

    /// Renames live/<id> to dead/<id> and drops its weights. False if it was no longer live.
    bool kill(const std::string& id);

    /// Sidecar of a live individual; nullopt if it vanished.
    std::optional<IndividualRecord> read_live_record(const std::string& id) const;
    /// Live individual with genome and weights; nullopt if it vanished.
    std::optional<Individual> load_live(const std::string& id) const;
    /// Looks in live/ and then dead/ (weights may be empty for dead individuals).
    std::optional<Individual> load_any(const std::string& id) const;

    struct Snapshot {
        std::vector<IndividualRecord> records;
    };
    /// Sidecars of every live individual, in id order.
    Snapshot snapshot() const;

    /// Reserves the next round number below `budget`; nullopt once the budget is used.
    std::optional<std::uint64_t> take_ticket(std::uint64_t budget);
    std::uint64_t tickets_taken() const;

    /// Exclusive-create marker; true only for the first caller.
    bool create_marker(const std::string& name);
    bool has_marker(const std::string& name) const;

    /// Appends one line to logs/<name> with a single write.
    void append_log(const std::string& name, const std::string& line) const;
    std::vector<std::string> read_log(const std::string& name) const;

private:
    std::optional<Individual> load_from(const std::filesystem::path& dir, bool need_weights) const;

    std::filesystem::path root_;
    std::uint64_t ticket_hint_ = 0;
};

/// Uniform pair of distinct indices in [0, n), n >= 2.
std::pair<std::size_t, std::size_t> sample_two(std::size_t n, Rng& rng);

}  // namespace evocnn
