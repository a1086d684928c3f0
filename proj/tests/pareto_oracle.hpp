#pragma once

#include <random>
#include <vector>

#include "evocnn/rng.hpp"
#include "evocnn/selection.hpp"

namespace evocnn::testing {

/// Peel fronts by checking every remaining pair; O(n^3).
inline std::vector<std::vector<std::size_t>> brute_force_fronts(const std::vector<ObjectivePair>& pts) {
    auto dom = [](const ObjectivePair& a, const ObjectivePair& b) {
        return a.compression >= b.compression && a.accuracy >= b.accuracy &&
               (a.compression > b.compression || a.accuracy > b.accuracy);
    };
    std::vector<bool> done(pts.size(), false);
    std::vector<std::vector<std::size_t>> fronts;
    std::size_t left = pts.size();
    while (left > 0) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (done[i]) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < pts.size() && !dominated; ++j)
                if (!done[j] && j != i && dom(pts[j], pts[i])) dominated = true;
            if (!dominated) front.push_back(i);
        }
        for (auto i : front) done[i] = true;
        left -= front.size();
        fronts.push_back(std::move(front));
    }
    return fronts;
}

/// Random population of size 1..max_n; every other one is snapped to a coarse grid so that
/// duplicates and shared coordinates occur.
inline std::vector<ObjectivePair> random_population(Rng& rng, std::size_t max_n) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_n)(rng);
    const bool coarse = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ObjectivePair> pts(n);
    for (auto& p : pts) {
        p = {u(rng), u(rng)};
        if (coarse) p = {std::round(p.compression * 8) / 8, std::round(p.accuracy * 8) / 8};
    }
    return pts;
}

}  // namespace evocnn::testing
