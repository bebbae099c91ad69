#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "posekit/autodiff.hpp"
#include "posekit/geometry.hpp"
#include "posekit/skeleton.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

// A named trainable tensor plus its gradient and optimizer state.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m, adam_v;
  bool trainable = true;
};

class ParamStore {
 public:
  Parameter& create(const std::string& name, std::vector<int> shape);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Parameter>>& items() const { return items_; }
  std::int64_t total_size() const;
  void zero_grads();

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
};

// Per-forward-pass context. Binds parameters to autodiff leaves (sharing
// storage, so no copies) and flushes leaf gradients back into Parameter::grad
// after backward. With grads disabled the graph skips all backward closures.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  ad::Var param(Parameter& p);
  ad::Var constant(Tensor t) { return ad::Var::constant(std::move(t)); }
  bool grad_enabled() const { return grad_enabled_; }

  // Runs reverse mode from loss, then Parameter::grad += scale * leaf grad.
  void backward_and_accumulate(const ad::Var& loss, double scale = 1.0);

 private:
  bool grad_enabled_;
  std::vector<std::pair<Parameter*, ad::NodePtr>> bound_;
};

struct AblationFlags {
  bool image_guided = true;         // off: graph blocks get zero image features
  bool progressive = true;          // off: a single correction block on the fine map
  bool multi_scale_features = true; // off: the fine map feeds every block
  bool cfa_enabled = true;          // off: raw pyramid goes straight through
  bool fusion_enabled = true;       // off: fusion blocks become per-level conv blocks

  bool operator==(const AblationFlags&) const = default;
};

struct ModelConfig {
  int crop_size = 64;
  int in_channels = 3;
  std::array<int, 3> encoder_channels = {16, 32, 64};  // last one is the coarse-map depth
  int f2_channels = 32;
  int f3_channels = 32;
  int embed_channels = 128;
  int block_channels = 256;
  SkeletonSpec skeleton = SkeletonSpec::ocpose12();
  AblationFlags ablation;

  int heatmap_size() const { return crop_size / 2; }
  int num_joints() const { return skeleton.num_joints; }
  void validate() const;
};

struct ConvParams {
  Parameter* w = nullptr;
  Parameter* b = nullptr;
  int stride = 1, pad = 1;
};

struct GcnParams {
  Parameter* w_self = nullptr;
  Parameter* w_neigh = nullptr;
  Parameter* b = nullptr;
};

struct AttnParams {
  Parameter *wq = nullptr, *bq = nullptr;
  Parameter *wk = nullptr, *bk = nullptr;
  Parameter *wv = nullptr, *bv = nullptr;
};

struct RabParams {
  GcnParams main1, main2, skip;
  AttnParams attn;
};

struct LinearParams {
  Parameter* w = nullptr;
  Parameter* b = nullptr;
};

struct FusionParams {
  ConvParams proj;  // 1x1 on the upsampled coarse branch
  ConvParams attn;  // 1x1 -> 1 channel, sigmoid gate
  ConvParams conv;  // 3x3 after blending
};

struct PyramidVars {
  ad::Var f1, f2, f3;
};

struct InitialPoseVars {
  ad::Var grid_xy;  // 2 x N, heatmap grid units
  ad::Var norm_xy;  // 2 x N, [-1,1]
  ad::Var conf;     // 1 x N, softmax peak value
};

struct TraceVars {
  ad::Var heatmap;  // N x H x W raw scores
  PyramidVars adapted;
  InitialPoseVars init;
  ad::Var pose1, pose2, final_pose;  // 2 x N, normalized frame
};

// Differentiable heatmap -> coordinates: per joint, softmax over the grid,
// then the expectation of the cell coordinates; confidence is the softmax
// peak. Output in grid units.
struct SoftArgmaxVars {
  ad::Var grid_xy;  // 2 x N
  ad::Var conf;     // 1 x N
};
SoftArgmaxVars soft_argmax_ad(const ad::Var& heatmap);

Pose soft_argmax(const Tensor& heatmap);  // Frame::kHeatmapGrid
// Row-major first occurrence wins ties; confidence is the softmax peak.
Pose hard_argmax(const Tensor& heatmap);

// Rectified graph layer: W_self x_i + W_neigh mean_{j~i} x_j + b, ReLU.
ad::Var gcn_layer(Tape& t, const GcnParams& p, const ad::Var& x, const ad::Var& adj_t);

// Scaled dot-product self-attention over nodes, added residually.
ad::Var self_attention(Tape& t, const AttnParams& p, const ad::Var& z);

// ResGCN attention block: concat(node_feats, sampled) runs through a
// two-layer main path and a one-layer channel-adjusting skip, summed, then
// self-attention. skip_extra, when present, is concatenated onto the skip
// input only.
ad::Var resgcn_attention_block(Tape& t, const RabParams& p, const ad::Var& node_feats,
                               const ad::Var& sampled, const ad::Var& adj_t,
                               const std::optional<ad::Var>& skip_extra = std::nullopt);

class PoseModel {
 public:
  PoseModel(ModelConfig cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const Tensor& adjacency_t() const { return adj_t_; }
  const Tensor& couple_adjacency_t() const { return couple_adj_t_; }

  // Encoder-decoder producing the coarse/middle/fine maps.
  PyramidVars backbone_forward(Tape& t, const ad::Var& crop) const;
  // Cascaded feature adaptation (honors the ablation flags).
  PyramidVars cfa_forward(Tape& t, const PyramidVars& pyr) const;
  ad::Var heatmap_forward(Tape& t, const ad::Var& adapted_f3) const;
  // Full pipeline for one instance crop.
  TraceVars forward(Tape& t, const ad::Var& crop) const;

  struct CoupleInstance {
    ad::Var xy;    // 2 x N normalized, the instance's final pose
    ad::Var conf;  // 1 x N
    ad::Var f3;    // the instance's adapted fine map
  };
  // Joint refinement of two interacting instances on the 2N-node graph.
  // Displacement head is zero-initialized, so an untrained refiner is the
  // identity on both poses.
  std::pair<ad::Var, ad::Var> couple_forward(Tape& t, const CoupleInstance& a,
                                             const CoupleInstance& b) const;

 private:
  ad::Var fusion_forward(Tape& t, const FusionParams& p, const ad::Var& coarse,
                         const ad::Var& fine) const;
  int sampled_channels(int block) const;

  ModelConfig cfg_;
  ParamStore store_;
  Tensor adj_t_;         // N x N,  transposed row-normalized adjacency
  Tensor couple_adj_t_;  // 2N x 2N

  ConvParams enc1_, enc2_, enc3_, dec2_, dec3_, head_;
  ConvParams cfa_conv1_;
  FusionParams fuse2_, fuse3_;
  ConvParams plain2_, plain3_;  // fusion_enabled == false replacements
  GcnParams embed1_, embed2_;
  RabParams rab_[3];
  LinearParams disp_head_[3];
  RabParams rab_single_;         // progressive == false variant
  LinearParams disp_single_;
  GcnParams couple_embed_;
  RabParams couple_rab_;
  LinearParams couple_head_;
};

}  // namespace posekit
