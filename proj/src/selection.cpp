#include "evocnn/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evocnn/error.hpp"

namespace evocnn {

bool dominates(const ObjectivePair& a, const ObjectivePair& b) {
    return a.compression >= b.compression && a.accuracy >= b.accuracy &&
           (a.compression > b.compression || a.accuracy > b.accuracy);
}

std::vector<std::vector<std::size_t>> pareto_fronts(std::span<const ObjectivePair> points) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated_by_me(n);
    std::vector<std::size_t> dominator_count(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (dominates(points[i], points[j])) {
                dominated_by_me[i].push_back(j);
                ++dominator_count[j];
            } else if (dominates(points[j], points[i])) {
                dominated_by_me[j].push_back(i);
                ++dominator_count[i];
            }
        }
    }
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i)
        if (dominator_count[i] == 0) current.push_back(i);
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (std::size_t i : current)
            for (std::size_t j : dominated_by_me[i])
                if (--dominator_count[j] == 0) next.push_back(j);
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(current));
        current = std::move(next);
    }
    return fronts;
}

std::vector<std::size_t> front_ranks(std::span<const ObjectivePair> points) {
    std::vector<std::size_t> rank(points.size(), 0);
    const auto fronts = pareto_fronts(points);
    for (std::size_t r = 0; r < fronts.size(); ++r)
        for (std::size_t i : fronts[r]) rank[i] = r;
    return rank;
}

double isolation(std::size_t member, std::span<const std::size_t> front, std::span<const ObjectivePair> points,
                 IsolationMode mode) {
    double sum = 0.0;
    double nearest = std::numeric_limits<double>::infinity();
    std::size_t others = 0;
    const ObjectivePair& p = points[member];
    for (std::size_t j : front) {
        if (j == member) continue;
        const double d = std::hypot(p.compression - points[j].compression, p.accuracy - points[j].accuracy);
        sum += d;
        nearest = std::min(nearest, d);
        ++others;
    }
    if (others == 0) return std::numeric_limits<double>::infinity();
    return mode == IsolationMode::MeanDistance ? sum / static_cast<double>(others) : nearest;
}

std::string_view reason_name(WinReason r) {
    switch (r) {
        case WinReason::Scalar: return "scalar";
        case WinReason::Front: return "front";
        case WinReason::Isolation: return "isolation";
        case WinReason::Coin: return "coin";
    }
    return "?";
}

CompareOutcome tournament_compare(const Contender& a, const Contender& b, std::span<const ObjectivePair> snapshot,
                                  bool coin, IsolationMode mode) {
    if (!a.fitness.valid() || !b.fitness.valid()) throw PreconditionError("contenders must be evaluated");
    if (a.fitness.scalar && b.fitness.scalar) {
        if (*a.fitness.scalar != *b.fitness.scalar) return {*a.fitness.scalar > *b.fitness.scalar, WinReason::Scalar};
        return {coin, WinReason::Coin};
    }
    if (!a.fitness.pair || !b.fitness.pair) throw PreconditionError("cannot compare a classifier with an autoencoder");
    if (a.snapshot_index >= snapshot.size() || b.snapshot_index >= snapshot.size() ||
        !(snapshot[a.snapshot_index] == *a.fitness.pair) || !(snapshot[b.snapshot_index] == *b.fitness.pair))
        throw PreconditionError("contenders must be members of the snapshot");

    const auto fronts = pareto_fronts(snapshot);
    std::size_t rank_a = 0, rank_b = 0;
    for (std::size_t r = 0; r < fronts.size(); ++r) {
        for (std::size_t i : fronts[r]) {
            if (i == a.snapshot_index) rank_a = r;
            if (i == b.snapshot_index) rank_b = r;
        }
    }
    if (rank_a != rank_b) return {rank_a < rank_b, WinReason::Front};
    const auto& front = fronts[rank_a];
    const double iso_a = isolation(a.snapshot_index, front, snapshot, mode);
    const double iso_b = isolation(b.snapshot_index, front, snapshot, mode);
    if (iso_a != iso_b) return {iso_a > iso_b, WinReason::Isolation};
    return {coin, WinReason::Coin};
}

}  // namespace evocnn
