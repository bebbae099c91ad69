#pragma once

#include <string>
#include <vector>

#include "posekit/data.hpp"
#include "posekit/geometry.hpp"

namespace posekit {

// Gaussian-falloff keypoint similarity over the labeled joints:
// mean_i exp(-d_i^2 / (2 s^2 k_i^2)) with s = sqrt(area), k_i = 2 sigma_i.
double compute_oks(const Pose& pred, const GroundTruthPose& gt, double area,
                   const std::vector<double>& sigmas);

struct PredInstance {
  int image_id = 0;
  int index = 0;  // stable tie-break id
  Pose pose;      // source pixels
  double score = 0;
};

struct GtEvalInstance {
  int image_id = 0;
  GroundTruthPose gt;  // source pixels
  double area = 0;
};

struct PrCurve {
  double threshold = 0;
  double ap = 0;
  std::vector<double> recall, precision;  // in global score order
};

struct APReport {
  double map_50_95 = 0;
  double ap50 = 0, ap75 = 0, ap80 = 0, ap90 = 0;
  std::vector<PrCurve> curves;
};

struct MapOptions {
  std::vector<double> oks_sigmas;
  // Drop predictions that overlap no ground-truth target at all.
  bool target_filter = false;
};

// COCO-style evaluation: per image and threshold, predictions in descending
// score order greedily take the unmatched gt of highest OKS >= t; AP is the
// area under the interpolated precision-recall curve; map_50_95 averages
// thresholds 0.50:0.05:0.95.
APReport compute_map(const std::vector<PredInstance>& preds,
                     const std::vector<GtEvalInstance>& gts, const MapOptions& opts);

struct OcclusionStats {
  long long total = 0;
  long long above_30 = 0, above_50 = 0, above_75 = 0;
  double average_iou = 0;
  bool empty = false;

  std::string table_row(const std::string& name) const;
};

// IoU statistics over adjacent-instance pairs: the annotated pair grouping
// where present, otherwise every intra-image pair with positive overlap.
OcclusionStats occlusion_stats(const Dataset& dataset);
OcclusionStats occlusion_stats_from_ious(const std::vector<double>& ious);

struct InvVisReport {
  double inv75 = 0, inv90 = 0;  // invisible-joint match rates
  double vis75 = 0, vis90 = 0;  // visible-joint match rates
  long long inv_count = 0, vis_count = 0;
};

// Per-joint Gaussian rule: joint matched at level t when
// exp(-d^2/(2 s^2 k^2)) >= t; rates split by gt visibility. preds and gts
// are index-aligned (top-down evaluation pairs them by instance).
InvVisReport inv_vis_breakdown(const std::vector<PredInstance>& preds,
                               const std::vector<GtEvalInstance>& gts,
                               const std::vector<double>& sigmas);

struct JointErrorStats {
  double inv_mean_l1 = 0, vis_mean_l1 = 0;  // mean |dx|+|dy| per joint
  long long inv_count = 0, vis_count = 0;
};

// Mean per-joint L1 error split by visibility; poses and gts must share a
// frame (the pipeline evaluates this in the normalized frame).
JointErrorStats joint_error_stats(const std::vector<Pose>& preds,
                                  const std::vector<GroundTruthPose>& gts);

// Greedy box pairing by descending IoU; each instance joins at most one
// pair, zero-overlap instances stay unpaired, ties break to lower indices.
std::vector<std::pair<int, int>> pair_people(const std::vector<BoundingBox>& boxes);

}  // namespace posekit
