#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "posekit/tensor.hpp"

namespace posekit::ad {

// Reverse-mode autodiff over Tensor. Each operation appends a node holding
// the forward value and a closure that scatters the node's gradient into its
// inputs. backward() walks the graph once in reverse topological order.
// Everything is double precision; gradients are checked against central
// finite differences in the test suite.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first touch
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward;  // null for leaves/constants

  Tensor& ensure_grad() {
    if (!grad.allocated()) grad = Tensor::zeros(value.shape());
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : n_(std::move(n)) {}

  static Var leaf(Tensor value, bool requires_grad);
  // Leaf aliasing the given storage (no copy); used to bind parameters.
  static Var leaf_shared(const Tensor& value, bool requires_grad);
  static Var constant(Tensor value) { return leaf(std::move(value), false); }
  static Var scalar(double v) { return constant(Tensor::scalar(v)); }

  bool defined() const { return n_ != nullptr; }
  const Tensor& val() const { return n_->value; }
  const Tensor& grad() const { return n_->grad; }
  bool requires_grad() const { return n_->requires_grad; }
  NodePtr node() const { return n_; }

 private:
  NodePtr n_;
};

// Runs reverse-mode accumulation from a scalar root (numel == 1).
void backward(const Var& root);

// --- elementwise / scalar ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var abs(const Var& a);
// y[c,...] = x[c,...] * w[0,...]; w has a single leading slab broadcast over
// the leading dimension of x (e.g. a 1 x H x W gate over a C x H x W map).
Var mul_bcast0(const Var& x, const Var& w);

// --- linear algebra (2-D) ---
Var matmul(const Var& a, const Var& b);   // (m x k) * (k x n)
Var transpose(const Var& a);
Var add_bias_cols(const Var& x, const Var& bias);  // (C x M) + (C), broadcast over columns
Var linear_cols(const Var& w, const Var& x, const Var& bias);  // w*x + bias

// --- reductions / shape ---
Var sum(const Var& a);                    // -> scalar
Var softmax_rows(const Var& a);           // (R x C), softmax along each row
Var row_max(const Var& a);                // (R x C) -> (R x 1); grad routes to argmax
Var reshape(const Var& a, std::vector<int> shape);
Var concat_rows(const std::vector<Var>& parts);  // stack (C_i x M) -> (sum C_i x M)
Var slice_rows(const Var& a, int r0, int r1);
Var concat_cols(const std::vector<Var>& parts);  // (C x M_i) -> (C x sum M_i)
Var slice_cols(const Var& a, int c0, int c1);

// --- image ops (3-D, channels x height x width) ---
Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad);
Var bilinear_resize(const Var& x, int out_h, int out_w);

// Bilinear sampling of a feature map at N points given in the [-1,1]^2
// frame (align-corners-false pixel mapping, border clamped). coords is
// (2 x N) with x in row 0, y in row 1; result is (C x N).
Var grid_sample(const Var& featmap, const Var& coords);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

}  // namespace posekit::ad
