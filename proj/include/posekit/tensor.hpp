#pragma once

#include <cassert>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace posekit {

// Dense row-major tensor of doubles. Storage is a shared buffer so that
// optimizer-owned parameter values can be aliased by autodiff leaves
// without copying; clone() gives an independent buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) { reset(std::move(shape), true); }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  // Uninitialized storage; for outputs that are fully overwritten.
  static Tensor uninit(std::vector<int> shape) {
    Tensor t;
    t.reset(std::move(shape), false);
    return t;
  }

  static Tensor full(std::vector<int> shape, double v) {
    Tensor t = uninit(std::move(shape));
    t.fill(v);
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<double> vals);

  static Tensor scalar(double v) { return from({1}, {v}); }

  int ndim() const { return static_cast<int>(shape_.size()); }

  int dim(int i) const {
    assert(i >= 0 && i < ndim());
    return shape_[static_cast<std::size_t>(i)];
  }

  std::int64_t numel() const { return store_ ? size_ : 0; }

  const std::vector<int>& shape() const { return shape_; }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool allocated() const { return store_ != nullptr; }

  double* data() { return store_.get(); }
  const double* data() const { return store_.get(); }

  double& operator[](std::int64_t i) { return store_.get()[i]; }
  double operator[](std::int64_t i) const { return store_.get()[i]; }

  // 2-D (rows, cols) accessor.
  double& at2(int r, int c) {
    assert(ndim() == 2);
    return store_.get()[static_cast<std::size_t>(r) * shape_[1] + c];
  }
  double at2(int r, int c) const { return const_cast<Tensor*>(this)->at2(r, c); }

  // 3-D (channels, rows, cols) accessor.
  double& at3(int c, int y, int x) {
    assert(ndim() == 3);
    return store_.get()[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double at3(int c, int y, int x) const { return const_cast<Tensor*>(this)->at3(c, y, x); }

  void fill(double v);
  bool all_finite() const;
  Tensor clone() const;
  std::string shape_str() const;

  // True when two tensors share the same underlying buffer.
  bool aliases(const Tensor& o) const { return store_ && store_ == o.store_; }

 private:
  void reset(std::vector<int> shape, bool zero);

  std::vector<int> shape_;
  std::int64_t size_ = 0;
  std::shared_ptr<double[]> store_;
};

}  // namespace posekit
