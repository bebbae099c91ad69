#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "posekit/data.hpp"
#include "posekit/eval.hpp"
#include "posekit/model.hpp"

namespace posekit {

// One instance run through the two-stage pipeline.
struct InstanceResult {
  int image_id = 0;
  int record_idx = 0, inst_idx = 0;
  BoundingBox expanded;      // crop box backing the normalized frame
  Pose init_norm, final_norm;
  Pose init_px, final_px;    // denormalized to source pixels
  GroundTruthPose gt_norm;
  double score = 0;          // mean joint confidence
};

// Deterministic inference over a dataset with ground-truth boxes. When
// couple_graph is set, interacting pairs (annotated grouping, or greedy IoU
// pairing as a fallback) additionally run through the couple refiner, which
// replaces their final poses.
std::vector<InstanceResult> infer_dataset(const PoseModel& model, const Dataset& dataset,
                                          bool couple_graph);

struct EvalSide {
  APReport ap;
  InvVisReport invvis;
  JointErrorStats l1;
};

struct EvalReport {
  int instances = 0;
  EvalSide initial, final;

  nlohmann::json to_json() const;
  std::string text() const;
};

EvalReport evaluate_dataset(const PoseModel& model, const Dataset& dataset, bool couple_graph,
                            bool target_filter = false);
EvalReport build_eval_report(const std::vector<InstanceResult>& results, const Dataset& dataset,
                             bool target_filter = false);

// Ground-truth / initial-pose / final-pose overlays, one PNG per image.
// Color legend (stable): ground truth green, initial pose red, final pose
// blue; joints labeled invisible are drawn as hollow rings.
std::vector<std::filesystem::path> render_overlays(const PoseModel& model, const Dataset& dataset,
                                                   const std::filesystem::path& out_dir,
                                                   bool couple_graph);

}  // namespace posekit
