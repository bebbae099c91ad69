#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "posekit/errors.hpp"

namespace posekit {

// Coordinate frames a pose can live in. Mixing frames is a programming
// error and is checked where it matters (losses, normalization).
enum class Frame : std::uint8_t {
  kSourcePixels,  // original image pixels
  kCropPixels,    // pixels of a resized instance crop
  kHeatmapGrid,   // heatmap cell indices, 0..W-1
  kNormalized,    // [-1,1]^2 over the crop box
};

const char* frame_name(Frame f);

struct BoundingBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  bool valid() const { return x2 > x1 && y2 > y1; }

  BoundingBox expanded(double margin_frac) const {
    const double dw = 0.5 * margin_frac * width(), dh = 0.5 * margin_frac * height();
    return {x1 - dw, y1 - dh, x2 + dw, y2 + dh};
  }
};

struct Joint {
  double x = 0, y = 0;
  double confidence = 0;  // in [0,1]
};

struct Pose {
  std::vector<Joint> joints;
  Frame frame = Frame::kSourcePixels;

  int size() const { return static_cast<int>(joints.size()); }
};

struct GtJoint {
  double x = 0, y = 0;
  bool labeled = false;  // has a ground-truth annotation
  bool visible = false;  // visible in pixels; visible implies labeled
};

struct GroundTruthPose {
  std::vector<GtJoint> joints;
  Frame frame = Frame::kSourcePixels;

  int size() const { return static_cast<int>(joints.size()); }
  int labeled_count() const {
    int n = 0;
    for (const auto& j : joints) n += j.labeled ? 1 : 0;
    return n;
  }
  int visible_count() const {
    int n = 0;
    for (const auto& j : joints) n += j.visible ? 1 : 0;
    return n;
  }
};

// Per-axis affine map: out = scale * in + offset.
struct AffineXf {
  double sx = 1, ox = 0;
  double sy = 1, oy = 0;

  void apply(double x, double y, double& out_x, double& out_y) const {
    out_x = sx * x + ox;
    out_y = sy * y + oy;
  }
  AffineXf inverse() const {
    if (sx == 0.0 || sy == 0.0) throw NumericError("affine transform not invertible");
    return {1.0 / sx, -ox / sx, 1.0 / sy, -oy / sy};
  }
  // this ∘ other : apply other first, then this.
  AffineXf compose(const AffineXf& other) const {
    return {sx * other.sx, sx * other.ox + ox, sy * other.sy, sy * other.oy + oy};
  }
};

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

}  // namespace posekit
