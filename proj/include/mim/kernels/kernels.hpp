#pragma once

// Inner-loop arithmetic kernels with a scalar reference implementation and an
// AVX2/FMA variant. The variant is picked once at startup from CPUID; setting
// MIM_SIMD=scalar in the environment forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace mim::kernels {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // c(m×n) += a(m×k) · b(k×n)
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
  // c(m×n) += a(m×k) · b(n×k)ᵀ
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
  // c(m×n) += a(k×m)ᵀ · b(k×n)
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
  // One diagonal state update for a single channel:
  //   h[i] = decay[i] * h_prev[i] + gain[i] * x;   returns sum_i c[i] * h[i]
  double (*scan_step)(std::size_t n, const double* decay, const double* gain, double x,
                      const double* h_prev, double* h, const double* c);
  // Adjoint of scan_step. On entry carry holds the gradient flowing into h from
  // later steps; on exit it holds decay ⊙ dh, ready for the previous step.
  //   dh = carry + c * dy;  dc += h * dy;  d_decay = dh * h_prev;  d_gain = dh * x
  // Returns sum_i gain[i] * dh[i] (the state path's contribution to dx).
  double (*scan_step_back)(std::size_t n, const double* decay, const double* gain, double x,
                           const double* h_prev, const double* h, const double* c, double dy,
                           double* carry, double* dc, double* d_decay, double* d_gain);
};

namespace scalar {
const KernelTable& table();
}
namespace avx2 {
// Null when the build target has no AVX2 support compiled in.
const KernelTable* table();
}

bool isa_available(Isa isa);
Isa active_isa();
// Throws DomainError if the requested ISA is unavailable on this machine.
void set_isa(Isa isa);
std::string_view isa_name(Isa isa);
const KernelTable& table_for(Isa isa);
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace mim::kernels
