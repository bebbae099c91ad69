#pragma once

#include <cstddef>

namespace posekit::kernels {

// Inner-loop arithmetic kernels. Every entry point has a scalar reference
// implementation and an AVX2+FMA variant; the active table is chosen at
// startup from CPUID and can be overridden with select_backend() or the
// POSEKIT_KERNELS environment variable ("scalar" or "avx2"). The two
// variants are equivalence-tested against each other; FMA contraction makes
// results differ from the reference only in the last bits.
enum class Backend { kAuto, kScalar, kAvx2 };

struct KernelTable {
  const char* name;
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);  // y += a*x
  void (*add)(const double*, const double*, double*, std::size_t);
  void (*sub)(const double*, const double*, double*, std::size_t);
  void (*mul)(const double*, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);  // y *= a
  double (*sum)(const double*, std::size_t);
  void (*relu)(const double*, double*, std::size_t);
  void (*relu_grad)(const double*, const double*, double*, std::size_t);  // gx += gy * (x > 0)
  // c (m x n) += a (m x k) * b (k x n), all row-major
  void (*matmul)(const double*, const double*, double*, int, int, int);
  // c (m x n) += a (m x k) * b^T, with b stored as (n x k)
  void (*matmul_nt)(const double*, const double*, double*, int, int, int);
  // c (k x n) += a^T * b, with a stored as (m x k), b as (m x n)
  void (*matmul_tn)(const double*, const double*, double*, int, int, int);
};

const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when unsupported at build or run time

bool avx2_available();
void select_backend(Backend b);
const char* backend_name();

double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void scale(double a, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu_grad(const double* x, const double* gy, double* gx, std::size_t n);
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);

}  // namespace posekit::kernels
