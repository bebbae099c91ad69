#include "posekit/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "posekit/errors.hpp"

namespace posekit {

namespace {

// Per-step autodiff graphs allocate and free multi-MB activation buffers;
// keeping those on the heap instead of fresh mmaps lets the allocator reuse
// the pages across graphs.
struct MallocTuning {
  MallocTuning() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 64 << 20);
#endif
  }
};
const MallocTuning malloc_tuning;

}  // namespace

void Tensor::reset(std::vector<int> shape, bool zero) {
  shape_ = std::move(shape);
  std::int64_t n = 1;
  for (int d : shape_) {
    if (d <= 0) throw ConfigError("tensor dimension must be positive, got " + shape_str());
    n *= d;
  }
  size_ = n;
  store_ = std::shared_ptr<double[]>(new double[static_cast<std::size_t>(n)]);
  if (zero) std::memset(store_.get(), 0, static_cast<std::size_t>(n) * sizeof(double));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> vals) {
  Tensor t = uninit(std::move(shape));
  if (static_cast<std::int64_t>(vals.size()) != t.numel())
    throw ConfigError("tensor init size mismatch for shape " + t.shape_str());
  std::memcpy(t.data(), vals.data(), vals.size() * sizeof(double));
  return t;
}

void Tensor::fill(double v) {
  double* d = store_.get();
  for (std::int64_t i = 0; i < size_; ++i) d[i] = v;
}

bool Tensor::all_finite() const {
  if (!store_) return true;
  const double* d = store_.get();
  for (std::int64_t i = 0; i < size_; ++i)
    if (!std::isfinite(d[i])) return false;
  return true;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.size_ = size_;
  if (store_) {
    t.store_ = std::shared_ptr<double[]>(new double[static_cast<std::size_t>(size_)]);
    std::memcpy(t.store_.get(), store_.get(), static_cast<std::size_t>(size_) * sizeof(double));
  }
  return t;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ')';
  return os.str();
}

}  // namespace posekit
