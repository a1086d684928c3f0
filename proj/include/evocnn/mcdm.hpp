#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace evocnn {

struct Alternative {
    std::string id;
    std::uint64_t generation = 0;
    double compression = 0.0;
    double accuracy = 0.0;
};

/// Criterion weights, normalized to sum to one on construction.
class TopsisWeights {
public:
    TopsisWeights() = default;
    TopsisWeights(double compression, double accuracy);

    double compression() const { return compression_; }
    double accuracy() const { return accuracy_; }

private:
    double compression_ = 0.5;
    double accuracy_ = 0.5;
};

struct RankedAlternative {
    Alternative alt;
    double score = 0.0;
};

/// Relative closeness d-/(d+ + d-) of the weighted criteria to the fixed ideals (1,1) and (0,0).
/// The decision matrix is not renormalized. Sorted by descending score, ties by lower generation.
std::vector<RankedAlternative> topsis_rank(std::span<const Alternative> alts, const TopsisWeights& w);

double topsis_score(const Alternative& a, const TopsisWeights& w);

/// First entry of topsis_rank().
Alternative select_best(std::span<const Alternative> alts, const TopsisWeights& w);

}  // namespace evocnn
