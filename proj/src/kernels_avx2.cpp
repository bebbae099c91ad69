#include "posekit/kernels.hpp"

// AVX2+FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// is only reachable through the dispatch table after a CPUID probe.

#if defined(__x86_64__) || defined(_M_X64)
#define POSEKIT_X86 1
#include <immintrin.h>
#else
#define POSEKIT_X86 0
#endif

namespace posekit::kernels {

#if POSEKIT_X86

namespace {

double v_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double r = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    __m256d y1 = _mm256_loadu_pd(y + i + 4);
    y0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), y0);
    y1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i + 4), y1);
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
  }
  for (; i + 4 <= n; i += 4) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    y0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), y0);
    _mm256_storeu_pd(y + i, y0);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void v_add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void v_sub(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void v_mul(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void v_scale(double a, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(av, _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] *= a;
}

double v_sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double r = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) r += x[i];
  return r;
}

void v_relu(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_grad(const double* x, const double* gy, double* gx, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d g = _mm256_and_pd(mask, _mm256_loadu_pd(gy + i));
    _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), g));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) gx[i] += gy[i];
}

// Register-blocked GEMM kernels. The 6x8 (or 4-wide) accumulator tiles stay
// in ymm registers across the whole contraction, so each input panel is
// streamed m/6 (resp. n/8) times instead of once per output row.

void v_matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  constexpr int MR = 6, NR = 8;
  int j = 0;
  for (; j + NR <= n; j += NR) {
    int i = 0;
    for (; i + MR <= m; i += MR) {
      __m256d acc[MR][2];
      for (int r = 0; r < MR; ++r) {
        double* cr = c + static_cast<std::size_t>(i + r) * n + j;
        acc[r][0] = _mm256_loadu_pd(cr);
        acc[r][1] = _mm256_loadu_pd(cr + 4);
      }
      for (int p = 0; p < k; ++p) {
        const double* bp = b + static_cast<std::size_t>(p) * n + j;
        const __m256d b0 = _mm256_loadu_pd(bp);
        const __m256d b1 = _mm256_loadu_pd(bp + 4);
        for (int r = 0; r < MR; ++r) {
          const __m256d av = _mm256_set1_pd(a[static_cast<std::size_t>(i + r) * k + p]);
          acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
          acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
        }
      }
      for (int r = 0; r < MR; ++r) {
        double* cr = c + static_cast<std::size_t>(i + r) * n + j;
        _mm256_storeu_pd(cr, acc[r][0]);
        _mm256_storeu_pd(cr + 4, acc[r][1]);
      }
    }
    for (; i < m; ++i) {
      double* cr = c + static_cast<std::size_t>(i) * n + j;
      __m256d a0 = _mm256_loadu_pd(cr);
      __m256d a1 = _mm256_loadu_pd(cr + 4);
      for (int p = 0; p < k; ++p) {
        const double* bp = b + static_cast<std::size_t>(p) * n + j;
        const __m256d av = _mm256_set1_pd(a[static_cast<std::size_t>(i) * k + p]);
        a0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp), a0);
        a1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + 4), a1);
      }
      _mm256_storeu_pd(cr, a0);
      _mm256_storeu_pd(cr + 4, a1);
    }
  }
  if (j < n) {
    const int rem = n - j;
    for (int i = 0; i < m; ++i) {
      const double* ai = a + static_cast<std::size_t>(i) * k;
      double* ci = c + static_cast<std::size_t>(i) * n + j;
      for (int p = 0; p < k; ++p) {
        const double av = ai[p];
        const double* bp = b + static_cast<std::size_t>(p) * n + j;
        for (int t = 0; t < rem; ++t) ci[t] += av * bp[t];
      }
    }
  }
}

void v_matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  constexpr int MR = 4, NR = 2;
  int i = 0;
  for (; i + MR <= m; i += MR) {
    int j = 0;
    for (; j + NR <= n; j += NR) {
      __m256d acc[MR][NR];
      for (int r = 0; r < MR; ++r)
        for (int s = 0; s < NR; ++s) acc[r][s] = _mm256_setzero_pd();
      int p = 0;
      for (; p + 4 <= k; p += 4) {
        __m256d av[MR];
        for (int r = 0; r < MR; ++r)
          av[r] = _mm256_loadu_pd(a + static_cast<std::size_t>(i + r) * k + p);
        for (int s = 0; s < NR; ++s) {
          const __m256d bv = _mm256_loadu_pd(b + static_cast<std::size_t>(j + s) * k + p);
          for (int r = 0; r < MR; ++r) acc[r][s] = _mm256_fmadd_pd(av[r], bv, acc[r][s]);
        }
      }
      for (int r = 0; r < MR; ++r)
        for (int s = 0; s < NR; ++s) {
          alignas(32) double lanes[4];
          _mm256_store_pd(lanes, acc[r][s]);
          double acc_s = lanes[0] + lanes[1] + lanes[2] + lanes[3];
          const double* ar = a + static_cast<std::size_t>(i + r) * k;
          const double* bs = b + static_cast<std::size_t>(j + s) * k;
          for (int pt = p; pt < k; ++pt) acc_s += ar[pt] * bs[pt];
          c[static_cast<std::size_t>(i + r) * n + j + s] += acc_s;
        }
    }
    for (; j < n; ++j)
      for (int r = 0; r < MR; ++r)
        c[static_cast<std::size_t>(i + r) * n + j] +=
            v_dot(a + static_cast<std::size_t>(i + r) * k, b + static_cast<std::size_t>(j) * k,
                  static_cast<std::size_t>(k));
  }
  for (; i < m; ++i)
    for (int j = 0; j < n; ++j)
      c[static_cast<std::size_t>(i) * n + j] +=
          v_dot(a + static_cast<std::size_t>(i) * k, b + static_cast<std::size_t>(j) * k,
                static_cast<std::size_t>(k));
}

void v_matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  constexpr int QR = 6, NR = 8;
  int q0 = 0;
  for (; q0 + QR <= k; q0 += QR) {
    int j = 0;
    for (; j + NR <= n; j += NR) {
      __m256d acc[QR][2];
      for (int r = 0; r < QR; ++r) {
        double* cr = c + static_cast<std::size_t>(q0 + r) * n + j;
        acc[r][0] = _mm256_loadu_pd(cr);
        acc[r][1] = _mm256_loadu_pd(cr + 4);
      }
      for (int o = 0; o < m; ++o) {
        const double* ao = a + static_cast<std::size_t>(o) * k + q0;
        const double* bo = b + static_cast<std::size_t>(o) * n + j;
        const __m256d b0 = _mm256_loadu_pd(bo);
        const __m256d b1 = _mm256_loadu_pd(bo + 4);
        for (int r = 0; r < QR; ++r) {
          const __m256d av = _mm256_set1_pd(ao[r]);
          acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
          acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
        }
      }
      for (int r = 0; r < QR; ++r) {
        double* cr = c + static_cast<std::size_t>(q0 + r) * n + j;
        _mm256_storeu_pd(cr, acc[r][0]);
        _mm256_storeu_pd(cr + 4, acc[r][1]);
      }
    }
    if (j < n) {
      for (int o = 0; o < m; ++o) {
        const double* ao = a + static_cast<std::size_t>(o) * k + q0;
        const double* bo = b + static_cast<std::size_t>(o) * n;
        for (int r = 0; r < QR; ++r) {
          const double av = ao[r];
          double* cr = c + static_cast<std::size_t>(q0 + r) * n;
          for (int t = j; t < n; ++t) cr[t] += av * bo[t];
        }
      }
    }
  }
  for (; q0 < k; ++q0)
    for (int o = 0; o < m; ++o)
      v_axpy(a[static_cast<std::size_t>(o) * k + q0], b + static_cast<std::size_t>(o) * n,
             c + static_cast<std::size_t>(q0) * n, static_cast<std::size_t>(n));
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table = {
      "avx2", v_dot,  v_axpy, v_add,       v_sub,    v_mul,       v_scale,
      v_sum,  v_relu, v_relu_grad, v_matmul, v_matmul_nt, v_matmul_tn,
  };
  return &table;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace posekit::kernels
