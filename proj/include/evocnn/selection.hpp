#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evocnn {

/// Autoencoder objectives; both are maximized.
struct ObjectivePair {
    double compression = 0.0;
    double accuracy = 0.0;
    friend bool operator==(const ObjectivePair&, const ObjectivePair&) = default;
};

/// Classifier fitness carries `scalar`; autoencoder fitness carries `pair`.
struct FitnessRecord {
    std::optional<double> scalar;
    std::optional<ObjectivePair> pair;

    static FitnessRecord of_scalar(double v) { return {v, std::nullopt}; }
    static FitnessRecord of_pair(double compression, double accuracy) {
        return {std::nullopt, ObjectivePair{compression, accuracy}};
    }
    bool valid() const { return scalar.has_value() != pair.has_value(); }
};

/// a >= b in both objectives and strictly greater in at least one.
bool dominates(const ObjectivePair& a, const ObjectivePair& b);

/// Non-dominated sorting. Returns fronts of indices into `points`, rank 0 first; every index
/// appears exactly once and indices within a front are ascending.
std::vector<std::vector<std::size_t>> pareto_fronts(std::span<const ObjectivePair> points);

/// Front rank per point, same information as pareto_fronts().
std::vector<std::size_t> front_ranks(std::span<const ObjectivePair> points);

enum class IsolationMode { MeanDistance, NearestNeighbor };

/// Distance of `member` to the other points of its front in raw objective space: mean (default)
/// or nearest. Infinity for a singleton front.
double isolation(std::size_t member, std::span<const std::size_t> front, std::span<const ObjectivePair> points,
                 IsolationMode mode = IsolationMode::MeanDistance);

enum class WinReason { Scalar, Front, Isolation, Coin };
std::string_view reason_name(WinReason r);

struct Contender {
    std::string id;
    FitnessRecord fitness;
    /// Index of this contender inside the snapshot (autoencoders only).
    std::size_t snapshot_index = 0;
};

struct CompareOutcome {
    bool first_wins = true;
    WinReason reason = WinReason::Scalar;
};

/// k=2 tournament decision. Classifiers: higher scalar wins. Autoencoders: lower front rank wins,
/// then higher isolation within the shared front. Exact ties go to `a` when `coin` is true.
CompareOutcome tournament_compare(const Contender& a, const Contender& b, std::span<const ObjectivePair> snapshot,
                                  bool coin, IsolationMode mode = IsolationMode::MeanDistance);

}  // namespace evocnn
