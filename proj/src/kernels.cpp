#include "posekit/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace posekit::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* pick_auto() {
  if (const char* env = std::getenv("POSEKIT_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_table();
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2() && avx2_table()) return avx2_table();
  }
  if (cpu_has_avx2() && avx2_table()) return avx2_table();
  return &scalar_table();
}

const KernelTable*& active() {
  static const KernelTable* t = pick_auto();
  return t;
}

}  // namespace

bool avx2_available() { return cpu_has_avx2() && avx2_table() != nullptr; }

void select_backend(Backend b) {
  switch (b) {
    case Backend::kAuto: active() = pick_auto(); break;
    case Backend::kScalar: active() = &scalar_table(); break;
    case Backend::kAvx2:
      if (avx2_available()) active() = avx2_table();
      break;
  }
}

const char* backend_name() { return active()->name; }

double dot(const double* a, const double* b, std::size_t n) { return active()->dot(a, b, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { active()->axpy(a, x, y, n); }
void add(const double* a, const double* b, double* out, std::size_t n) { active()->add(a, b, out, n); }
void sub(const double* a, const double* b, double* out, std::size_t n) { active()->sub(a, b, out, n); }
void mul(const double* a, const double* b, double* out, std::size_t n) { active()->mul(a, b, out, n); }
void scale(double a, double* y, std::size_t n) { active()->scale(a, y, n); }
double sum(const double* x, std::size_t n) { return active()->sum(x, n); }
void relu(const double* x, double* y, std::size_t n) { active()->relu(x, y, n); }
void relu_grad(const double* x, const double* gy, double* gx, std::size_t n) {
  active()->relu_grad(x, gy, gx, n);
}
void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  active()->matmul(a, b, c, m, k, n);
}
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  active()->matmul_nt(a, b, c, m, k, n);
}
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  active()->matmul_tn(a, b, c, m, k, n);
}

}  // namespace posekit::kernels
