#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "posekit/data.hpp"
#include "posekit/model.hpp"

namespace posekit {

struct TrainingConfig {
  std::array<double, 3> lambdas = {0.3, 0.5, 1.0};
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 8;
  std::uint64_t seed = 1;
  bool couple_graph_enabled = false;
  bool flip_augment_enabled = true;
  // Dynamic training-pool filtering by pose quality; off by default because
  // a from-scratch model starts below the OKS bar and would empty the pool.
  bool proposal_filter = false;
  ModelConfig model;

  void validate() const;
};

// Mean over labeled joints of |dx| + |dy| between a predicted coordinate
// block (2 x N) and the ground truth; exactly zero gradient on unlabeled
// joints. Returns a constant 0 when nothing is labeled.
ad::Var masked_l1(const ad::Var& pred_xy, const GroundTruthPose& gt);

struct LossParts {
  ad::Var total;
  double init = 0, pose1 = 0, pose2 = 0, pose3 = 0;
};

// sum_j lambda_j * L1(pose_j) + L1(init pose); all poses normalized.
LossParts total_loss(const TraceVars& trace, const GroundTruthPose& gt_norm,
                     const std::array<double, 3>& lambdas);

double cosine_lr(double lr0, long long step, long long total_steps);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& params, double lr);
  long long steps_taken() const { return t_; }
  void set_steps(long long t) { t_ = t; }

 private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
};

struct TrainSample {
  Tensor crop_pixels;      // channels x S x S
  GroundTruthPose gt_crop; // crop-pixel frame
  BoundingBox expanded;    // source-space box backing the crop
  int record_idx = 0, inst_idx = 0;
  int image_id = 0;
};

// Horizontal mirror: pixels column-reversed, x -> (W-1) - x, left/right
// joints (with their labels and visibility) swapped per flip_pairs.
TrainSample flip_sample(const TrainSample& sample, const SkeletonSpec& skeleton);

// Normalized-frame ground truth for a sample's crop.
GroundTruthPose sample_gt_norm(const TrainSample& sample);

struct ProposalCandidate {
  Pose pose;            // same frame as gt
  GroundTruthPose gt;
  double area = 0;
};

// Keeps candidates with more than 5 visible joints and OKS above 0.3.
std::vector<int> select_proposals(const std::vector<ProposalCandidate>& candidates,
                                  const std::vector<double>& sigmas);

struct LossRow {
  long long step = 0;
  int epoch = 0;
  double lr = 0, total = 0, init = 0, pose1 = 0, pose2 = 0, pose3 = 0;
};

std::string loss_log_csv(const std::vector<LossRow>& rows);

struct TrainResult {
  std::vector<LossRow> log;
  std::vector<std::filesystem::path> checkpoints;  // one per epoch
  std::filesystem::path final_checkpoint;
};

std::vector<TrainSample> build_train_samples(const Dataset& dataset, const ModelConfig& model_cfg);

// End-to-end optimization of the base network (epochs of shuffled
// mini-batches, Adam with cosine decay, per-epoch checkpoints). When
// resume_from is set, parameters, optimizer state and the epoch counter are
// restored and training continues from the next epoch.
TrainResult train(PoseModel& model, const Dataset& dataset, const TrainingConfig& cfg,
                  const std::filesystem::path& out_dir,
                  const std::filesystem::path& resume_from = {});

// Second phase: trains the couple refiner on interacting pairs with every
// base parameter frozen.
TrainResult train_couple(PoseModel& model, const Dataset& dataset, const TrainingConfig& cfg,
                         const std::filesystem::path& out_dir);

}  // namespace posekit
