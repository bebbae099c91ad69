#pragma once

#include <vector>

#include "posekit/eval.hpp"

namespace posekit::test {

// Brute-force reference evaluator, implemented independently of
// posekit::compute_map. Per image and threshold it enumerates every
// injective prediction-to-gt assignment and keeps the one that maximizes
// the score-ordered lexicographic key ((matched, oks) per prediction) --
// which is exactly the matching the greedy best-OKS rule commits to when
// OKS values are tie-free. AP is the area under the interpolated
// precision-recall curve, computed by a direct quadratic max-scan.
struct OracleReport {
  double map_50_95 = 0;
  double ap50 = 0, ap75 = 0, ap80 = 0, ap90 = 0;
  std::vector<double> per_threshold;  // thresholds 0.50:0.05:0.95
};

OracleReport oracle_compute_map(const std::vector<PredInstance>& preds,
                                const std::vector<GtEvalInstance>& gts,
                                const std::vector<double>& sigmas);

}  // namespace posekit::test
