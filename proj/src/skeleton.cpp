#include "posekit/skeleton.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "posekit/errors.hpp"

namespace posekit {

using nlohmann::json;

const char* frame_name(Frame f) {
  switch (f) {
    case Frame::kSourcePixels: return "source_pixels";
    case Frame::kCropPixels: return "crop_pixels";
    case Frame::kHeatmapGrid: return "heatmap_grid";
    case Frame::kNormalized: return "normalized";
  }
  return "?";
}

void SkeletonSpec::validate() const {
  if (num_joints <= 0) throw ConfigError("skeleton '" + name + "': num_joints must be positive");
  std::set<std::pair<int, int>> seen;
  for (auto [a, b] : edges) {
    if (a < 0 || a >= num_joints || b < 0 || b >= num_joints)
      throw ConfigError("skeleton '" + name + "': edge index out of range (" +
                        std::to_string(a) + "," + std::to_string(b) + ")");
    if (a == b) throw ConfigError("skeleton '" + name + "': self-edge at joint " + std::to_string(a));
    auto key = std::minmax(a, b);
    if (!seen.insert(key).second)
      throw ConfigError("skeleton '" + name + "': duplicate edge (" + std::to_string(a) + "," +
                        std::to_string(b) + ")");
  }
  std::set<int> flip_seen;
  for (auto [l, r] : flip_pairs) {
    if (l < 0 || l >= num_joints || r < 0 || r >= num_joints || l == r)
      throw ConfigError("skeleton '" + name + "': bad flip pair");
    if (!flip_seen.insert(l).second || !flip_seen.insert(r).second)
      throw ConfigError("skeleton '" + name + "': joint appears in two flip pairs");
  }
  if (static_cast<int>(oks_sigmas.size()) != num_joints)
    throw ConfigError("skeleton '" + name + "': oks_sigmas must have one entry per joint");
  for (double s : oks_sigmas)
    if (!(s > 0.0)) throw ConfigError("skeleton '" + name + "': oks_sigmas must be positive");
  if (!joint_names.empty() && static_cast<int>(joint_names.size()) != num_joints)
    throw ConfigError("skeleton '" + name + "': joint_names length mismatch");
}

SkeletonSpec SkeletonSpec::ocpose12() {
  SkeletonSpec s;
  s.name = "ocpose12";
  s.num_joints = 12;
  s.joint_names = {"left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
                   "left_wrist",    "right_wrist",    "left_hip",   "right_hip",
                   "left_knee",     "right_knee",     "left_ankle", "right_ankle"};
  s.edges = {{0, 1}, {0, 2}, {2, 4}, {1, 3}, {3, 5}, {0, 6},
             {1, 7}, {6, 7}, {6, 8}, {8, 10}, {7, 9}, {9, 11}};
  s.flip_pairs = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}, {10, 11}};
  s.oks_sigmas = {0.079, 0.079, 0.072, 0.072, 0.062, 0.062,
                  0.107, 0.107, 0.087, 0.087, 0.089, 0.089};
  s.validate();
  return s;
}

SkeletonSpec skeleton_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("skeleton json parse failure: ") + e.what());
  }
  SkeletonSpec s;
  try {
    s.name = j.value("name", "unnamed");
    s.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    s.num_joints = static_cast<int>(s.joint_names.size());
    for (const auto& e : j.at("edges")) s.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    for (const auto& e : j.at("flip_pairs"))
      s.flip_pairs.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    s.oks_sigmas = j.at("oks_sigmas").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("skeleton json schema violation: ") + e.what());
  }
  s.validate();
  return s;
}

std::string skeleton_to_json(const SkeletonSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["joint_names"] = spec.joint_names;
  json edges = json::array(), flips = json::array();
  for (auto [a, b] : spec.edges) edges.push_back({a, b});
  for (auto [a, b] : spec.flip_pairs) flips.push_back({a, b});
  j["edges"] = edges;
  j["flip_pairs"] = flips;
  j["oks_sigmas"] = spec.oks_sigmas;
  return j.dump(2);
}

int AdjacencyMatrix::nnz() const {
  int n = 0;
  for (std::int64_t i = 0; i < entries.numel(); ++i) n += entries[i] != 0.0 ? 1 : 0;
  return n;
}

int AdjacencyMatrix::degree(int node) const {
  int d = 0;
  for (int j = 0; j < size; ++j) d += entries.at2(node, j) != 0.0 ? 1 : 0;
  return d;
}

AdjacencyMatrix build_adjacency(const SkeletonSpec& skeleton) {
  skeleton.validate();
  const int n = skeleton.num_joints;
  AdjacencyMatrix adj;
  adj.size = n;
  adj.entries = Tensor::zeros({n, n});
  for (int i = 0; i < n; ++i) adj.entries.at2(i, i) = 1.0;
  for (auto [a, b] : skeleton.edges) {
    adj.entries.at2(a, b) = 1.0;
    adj.entries.at2(b, a) = 1.0;
  }
  return adj;
}

CoupleGraphSpec build_couple_graph(const SkeletonSpec& skeleton) {
  const AdjacencyMatrix single = build_adjacency(skeleton);
  const int n = skeleton.num_joints;
  CoupleGraphSpec couple;
  couple.base = skeleton;
  couple.adjacency.size = 2 * n;
  couple.adjacency.entries = Tensor::zeros({2 * n, 2 * n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = single.entries.at2(i, j);
      couple.adjacency.entries.at2(i, j) = v;
      couple.adjacency.entries.at2(n + i, n + j) = v;
    }
  for (auto [a, b] : skeleton.edges) {
    couple.skeleton_edges.emplace_back(a, b);
    couple.skeleton_edges.emplace_back(n + a, n + b);
  }
  for (int i = 0; i < n; ++i) {
    couple.adjacency.entries.at2(i, n + i) = 1.0;
    couple.adjacency.entries.at2(n + i, i) = 1.0;
    couple.interaction_edges.emplace_back(i, n + i);
  }
  return couple;
}

Tensor rownorm_adjacency_t(const AdjacencyMatrix& adj) {
  const int m = adj.size;
  Tensor t({m, m});
  for (int i = 0; i < m; ++i) {
    const double inv = 1.0 / adj.degree(i);
    for (int j = 0; j < m; ++j) t.at2(j, i) = adj.entries.at2(i, j) * inv;
  }
  return t;
}

AffineXf box_to_normalized(const BoundingBox& box) {
  if (!box.valid()) throw NumericError("degenerate bounding box");
  return {2.0 / box.width(), -2.0 * box.cx() / box.width(),
          2.0 / box.height(), -2.0 * box.cy() / box.height()};
}

namespace {

Pose apply_xf(const Pose& pose, const AffineXf& xf, Frame out_frame) {
  Pose out = pose;
  out.frame = out_frame;
  for (auto& j : out.joints) xf.apply(j.x, j.y, j.x, j.y);
  return out;
}

GroundTruthPose apply_xf_gt(const GroundTruthPose& gt, const AffineXf& xf, Frame out_frame) {
  GroundTruthPose out = gt;
  out.frame = out_frame;
  for (auto& j : out.joints) xf.apply(j.x, j.y, j.x, j.y);
  return out;
}

}  // namespace

Pose normalize_pose(const Pose& pose, const BoundingBox& box) {
  return apply_xf(pose, box_to_normalized(box), Frame::kNormalized);
}

Pose denormalize_pose(const Pose& pose, const BoundingBox& box, Frame out_frame) {
  return apply_xf(pose, box_to_normalized(box).inverse(), out_frame);
}

GroundTruthPose normalize_gt(const GroundTruthPose& gt, const BoundingBox& box) {
  return apply_xf_gt(gt, box_to_normalized(box), Frame::kNormalized);
}

GroundTruthPose denormalize_gt(const GroundTruthPose& gt, const BoundingBox& box, Frame out_frame) {
  return apply_xf_gt(gt, box_to_normalized(box).inverse(), out_frame);
}

double grid_to_normalized(double g, int size) { return (2.0 * g + 1.0) / size - 1.0; }

double normalized_to_grid(double v, int size) { return ((v + 1.0) * size - 1.0) * 0.5; }

}  // namespace posekit
