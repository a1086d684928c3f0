#include "evocnn/mcdm.hpp"

#include <algorithm>
#include <cmath>

#include "evocnn/error.hpp"

namespace evocnn {

TopsisWeights::TopsisWeights(double compression, double accuracy) {
    if (!(compression >= 0.0) || !(accuracy >= 0.0) || !(compression + accuracy > 0.0))
        throw PreconditionError("TOPSIS weights must be non-negative with a positive sum");
    const double sum = compression + accuracy;
    compression_ = compression / sum;
    accuracy_ = accuracy / sum;
}

double topsis_score(const Alternative& a, const TopsisWeights& w) {
    const double vc = w.compression() * a.compression;
    const double va = w.accuracy() * a.accuracy;
    const double d_pos = std::hypot(w.compression() - vc, w.accuracy() - va);
    const double d_neg = std::hypot(vc, va);
    if (d_pos + d_neg == 0.0) return 0.0;
    return d_neg / (d_pos + d_neg);
}

std::vector<RankedAlternative> topsis_rank(std::span<const Alternative> alts, const TopsisWeights& w) {
    if (alts.empty()) throw PreconditionError("TOPSIS needs at least one alternative");
    std::vector<RankedAlternative> ranked;
    ranked.reserve(alts.size());
    for (const auto& a : alts) {
        if (!(a.compression >= 0.0 && a.compression <= 1.0 && a.accuracy >= 0.0 && a.accuracy <= 1.0))
            throw PreconditionError("criteria of " + a.id + " must lie in [0,1]");
        ranked.push_back({a, topsis_score(a, w)});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const RankedAlternative& x, const RankedAlternative& y) {
        if (x.score != y.score) return x.score > y.score;
        return x.alt.generation < y.alt.generation;
    });
    return ranked;
}

Alternative select_best(std::span<const Alternative> alts, const TopsisWeights& w) {
    return topsis_rank(alts, w).front().alt;
}

}  // namespace evocnn
