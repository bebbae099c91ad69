#pragma once

#include <string>
#include <utility>
#include <vector>

#include "posekit/geometry.hpp"
#include "posekit/tensor.hpp"

namespace posekit {

// Skeleton topology: joint count, limb edges, left/right pairs and the
// per-joint OKS falloff constants. Immutable after validate(); every other
// module depends only on this, so alternative skeletons are a data change.
struct SkeletonSpec {
  std::string name;
  int num_joints = 0;
  std::vector<std::pair<int, int>> edges;       // unordered limb pairs
  std::vector<std::pair<int, int>> flip_pairs;  // (left, right)
  std::vector<double> oks_sigmas;
  std::vector<std::string> joint_names;

  void validate() const;

  // Bundled 12-joint couple-pose skeleton: shoulders, elbows, wrists, hips,
  // knees, ankles (left before right). OKS sigmas reuse the MSCOCO constants
  // for the matching body parts.
  static SkeletonSpec ocpose12();
};

SkeletonSpec skeleton_from_json(const std::string& json_text);
std::string skeleton_to_json(const SkeletonSpec& spec);

struct AdjacencyMatrix {
  int size = 0;
  Tensor entries;  // size x size, values in {0,1}, unit diagonal

  int nnz() const;
  int degree(int node) const;  // row sum, counts the self-loop
};

struct CoupleGraphSpec {
  SkeletonSpec base;
  AdjacencyMatrix adjacency;                         // 2N x 2N
  std::vector<std::pair<int, int>> skeleton_edges;   // E_s over both instances
  std::vector<std::pair<int, int>> interaction_edges;  // (i, i+N)
};

// a_ij = 1 iff (i,j) is an edge or i == j.
AdjacencyMatrix build_adjacency(const SkeletonSpec& skeleton);

// 2N-node graph: two copies of the skeleton plus edges joining each joint
// to its counterpart on the other instance.
CoupleGraphSpec build_couple_graph(const SkeletonSpec& skeleton);

// Transposed row-normalized adjacency (A D^-1 with D the row degree), the
// constant the graph layers multiply node features by: (X * this)[c,i] is
// the mean of x over the in-graph neighborhood of node i, self included.
Tensor rownorm_adjacency_t(const AdjacencyMatrix& adj);

// Maps box pixels to [-1,1]^2: the box center goes to the origin and the
// corners to (+-1, +-1). Affine in the coordinates; confidence untouched.
Pose normalize_pose(const Pose& pose, const BoundingBox& box);
Pose denormalize_pose(const Pose& pose, const BoundingBox& box,
                      Frame out_frame = Frame::kSourcePixels);
GroundTruthPose normalize_gt(const GroundTruthPose& gt, const BoundingBox& box);
GroundTruthPose denormalize_gt(const GroundTruthPose& gt, const BoundingBox& box,
                               Frame out_frame = Frame::kSourcePixels);

// Normalization as an affine transform (same convention as above).
AffineXf box_to_normalized(const BoundingBox& box);

// Heatmap grid index -> normalized frame. Grid cell centers tile the crop,
// so index g maps to (2g+1)/size - 1; this is the box normalization applied
// with the half-cell offset.
double grid_to_normalized(double g, int size);
double normalized_to_grid(double v, int size);

}  // namespace posekit
