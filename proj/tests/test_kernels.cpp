#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "posekit/kernels.hpp"
#include "posekit/rng.hpp"

namespace k = posekit::kernels;
using posekit::Rng;

namespace {

std::vector<double> rnd(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

bool close(double a, double b, double tol = 1e-12) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

bool all_close(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-12) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!close(a[i], b[i], tol)) return false;
  return true;
}

// naive reference, written separately from the scalar kernel table
void ref_matmul(const double* a, const double* b, double* c, int m, int kk, int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < kk; ++p) acc += a[i * kk + p] * b[p * n + j];
      c[i * n + j] += acc;
    }
}

struct BackendGuard {
  explicit BackendGuard(k::Backend b) { k::select_backend(b); }
  ~BackendGuard() { k::select_backend(k::Backend::kAuto); }
};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("elementwise kernels match across backends") {
  if (!k::avx2_available()) return;
  Rng rng(11);
  for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 31u, 64u, 1000u}) {
    const auto a = rnd(n, rng), b = rnd(n, rng);
    std::vector<double> outs(n), outv(n);

    for (auto [fn_s, fn_v] : {std::pair{k::scalar_table().add, k::avx2_table()->add},
                              std::pair{k::scalar_table().sub, k::avx2_table()->sub},
                              std::pair{k::scalar_table().mul, k::avx2_table()->mul}}) {
      fn_s(a.data(), b.data(), outs.data(), n);
      fn_v(a.data(), b.data(), outv.data(), n);
      CHECK(all_close(outs, outv));
    }

    CHECK(close(k::scalar_table().dot(a.data(), b.data(), n),
                k::avx2_table()->dot(a.data(), b.data(), n)));
    CHECK(close(k::scalar_table().sum(a.data(), n), k::avx2_table()->sum(a.data(), n)));

    auto ys = b, yv = b;
    k::scalar_table().axpy(1.7, a.data(), ys.data(), n);
    k::avx2_table()->axpy(1.7, a.data(), yv.data(), n);
    CHECK(all_close(ys, yv));

    k::scalar_table().relu(a.data(), outs.data(), n);
    k::avx2_table()->relu(a.data(), outv.data(), n);
    CHECK(all_close(outs, outv));

    auto gs = rnd(n, rng);
    std::vector<double> gx_s(n, 0.5), gx_v(n, 0.5);
    k::scalar_table().relu_grad(a.data(), gs.data(), gx_s.data(), n);
    k::avx2_table()->relu_grad(a.data(), gs.data(), gx_v.data(), n);
    CHECK(all_close(gx_s, gx_v));
  }
}

TEST_CASE("matmul family matches the naive reference on both backends") {
  Rng rng(23);
  struct Shape {
    int m, k, n;
  };
  for (const Shape s : {Shape{1, 1, 1}, Shape{3, 5, 7}, Shape{6, 8, 8}, Shape{13, 17, 9},
                        Shape{32, 64, 12}, Shape{12, 100, 2}, Shape{25, 33, 70}}) {
    const auto a = rnd(static_cast<std::size_t>(s.m) * s.k, rng);
    const auto b = rnd(static_cast<std::size_t>(s.k) * s.n, rng);
    std::vector<double> bt(static_cast<std::size_t>(s.n) * s.k);  // b^T, n x k
    for (int p = 0; p < s.k; ++p)
      for (int j = 0; j < s.n; ++j) bt[j * s.k + p] = b[p * s.n + j];
    std::vector<double> at(static_cast<std::size_t>(s.k) * s.m);  // a^T, k x m
    for (int i = 0; i < s.m; ++i)
      for (int p = 0; p < s.k; ++p) at[p * s.m + i] = a[i * s.k + p];

    std::vector<double> want(static_cast<std::size_t>(s.m) * s.n, 0.25);
    ref_matmul(a.data(), b.data(), want.data(), s.m, s.k, s.n);

    std::vector<const k::KernelTable*> tables{&k::scalar_table()};
    if (k::avx2_available()) tables.push_back(k::avx2_table());
    for (const k::KernelTable* table : tables) {
      std::vector<double> got(want.size(), 0.25);
      table->matmul(a.data(), b.data(), got.data(), s.m, s.k, s.n);
      CHECK(all_close(got, want));

      std::vector<double> got_nt(want.size(), 0.25);
      table->matmul_nt(a.data(), bt.data(), got_nt.data(), s.m, s.k, s.n);
      CHECK(all_close(got_nt, want));

      // c += a^T b with the transposed operand stored (m' x k') = (k x m)
      std::vector<double> got_tn(want.size(), 0.25);
      table->matmul_tn(at.data(), b.data(), got_tn.data(), s.k, s.m, s.n);
      CHECK(all_close(got_tn, want));
    }
  }
}

TEST_CASE("backend selection is sticky and reversible") {
  const std::string initial = k::backend_name();
  {
    BackendGuard guard(k::Backend::kScalar);
    CHECK(std::string(k::backend_name()) == "scalar");
    std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    CHECK(k::dot(a.data(), b.data(), 3) == 32.0);
  }
  CHECK(std::string(k::backend_name()) == initial);
}

}  // TEST_SUITE
