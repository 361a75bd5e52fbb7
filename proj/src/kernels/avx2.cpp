#include "mim/kernels/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define MIM_HAVE_AVX2 1
#include <immintrin.h>
#else
#define MIM_HAVE_AVX2 0
#endif

namespace mim::kernels::avx2 {

#if MIM_HAVE_AVX2
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sw = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sw));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      axpy(av, b + p * n, crow, n);
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(a + i * k, b + j * k, k);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      axpy(av, brow, c + i * n, n);
    }
  }
}

double scan_step(std::size_t n, const double* decay, const double* gain, double x,
                 const double* h_prev, double* h, const double* c) {
  const __m256d vx = _mm256_set1_pd(x);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d hv = _mm256_mul_pd(_mm256_loadu_pd(decay + i), _mm256_loadu_pd(h_prev + i));
    hv = _mm256_fmadd_pd(_mm256_loadu_pd(gain + i), vx, hv);
    _mm256_storeu_pd(h + i, hv);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(c + i), hv, acc);
  }
  double y = hsum(acc);
  for (; i < n; ++i) {
    h[i] = decay[i] * h_prev[i] + gain[i] * x;
    y += c[i] * h[i];
  }
  return y;
}

double scan_step_back(std::size_t n, const double* decay, const double* gain, double x,
                      const double* h_prev, const double* h, const double* c, double dy,
                      double* carry, double* dc, double* d_decay, double* d_gain) {
  const __m256d vx = _mm256_set1_pd(x);
  const __m256d vdy = _mm256_set1_pd(dy);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dh = _mm256_fmadd_pd(_mm256_loadu_pd(c + i), vdy, _mm256_loadu_pd(carry + i));
    _mm256_storeu_pd(dc + i, _mm256_fmadd_pd(_mm256_loadu_pd(h + i), vdy, _mm256_loadu_pd(dc + i)));
    _mm256_storeu_pd(d_decay + i, _mm256_mul_pd(dh, _mm256_loadu_pd(h_prev + i)));
    _mm256_storeu_pd(d_gain + i, _mm256_mul_pd(dh, vx));
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(gain + i), dh, acc);
    _mm256_storeu_pd(carry + i, _mm256_mul_pd(_mm256_loadu_pd(decay + i), dh));
  }
  double dx = hsum(acc);
  for (; i < n; ++i) {
    const double dh = carry[i] + c[i] * dy;
    dc[i] += h[i] * dy;
    d_decay[i] = dh * h_prev[i];
    d_gain[i] = dh * x;
    dx += gain[i] * dh;
    carry[i] = decay[i] * dh;
  }
  return dx;
}

const KernelTable kTable{dot, axpy, gemm_nn, gemm_nt, gemm_tn, scan_step, scan_step_back};

}  // namespace

const KernelTable* table() { return &kTable; }

#else

const KernelTable* table() { return nullptr; }

#endif

}  // namespace mim::kernels::avx2
