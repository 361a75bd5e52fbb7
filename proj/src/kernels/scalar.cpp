#include "mim/kernels/kernels.hpp"

namespace mim::kernels::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
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
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

double scan_step(std::size_t n, const double* decay, const double* gain, double x,
                 const double* h_prev, double* h, const double* c) {
  double y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = decay[i] * h_prev[i] + gain[i] * x;
    y += c[i] * h[i];
  }
  return y;
}

double scan_step_back(std::size_t n, const double* decay, const double* gain, double x,
                      const double* h_prev, const double* h, const double* c, double dy,
                      double* carry, double* dc, double* d_decay, double* d_gain) {
  double dx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
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

const KernelTable& table() { return kTable; }

}  // namespace mim::kernels::scalar
