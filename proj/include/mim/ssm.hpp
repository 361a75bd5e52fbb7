#pragma once

// State-space scan kernels.
//
// The linear time-invariant path (ContinuousSSM -> DiscreteSSM -> recurrent or
// convolutional scan) works with dense matrices and serves as the reference
// for the selective path, where B, C and the step size are computed per token
// and the state matrix is diagonal.

#include <cstddef>
#include <vector>

#include "mim/autodiff.hpp"
#include "mim/nn.hpp"
#include "mim/rng.hpp"
#include "mim/tensor.hpp"

namespace mim::ssm {

struct ContinuousSSM {
  Tensor a;  // N×N state matrix
  Tensor b;  // N×L input matrix
  Tensor c;  // L×N output matrix
  Tensor d;  // L×L feed-through
  double delta = 1.0;

  std::size_t state_dim() const { return a.rows(); }
  std::size_t io_dim() const { return b.cols(); }
};

struct DiscreteSSM {
  Tensor a_bar;
  Tensor b_bar;
  Tensor c;
  Tensor d;

  std::size_t state_dim() const { return a_bar.rows(); }
  std::size_t io_dim() const { return b_bar.cols(); }
};

// Taps C·Ā^j·B̄ for j = 0..m-1, each L×L.
struct ConvKernel {
  std::vector<Tensor> taps;
  std::size_t length() const { return taps.size(); }
};

// Zero-order hold. Ā and B̄ come from one exponential of the augmented matrix
// [[ΔA, ΔB], [0, 0]], whose upper-right block is Σ_k (ΔA)^k/(k+1)! · ΔB, so the
// A → 0 limit needs no special case.
DiscreteSSM discretize(const ContinuousSSM& ssm);

// exp(M) by scaling and squaring around a truncated Taylor series.
Tensor matrix_exp(const Tensor& m);

ConvKernel conv_kernel(const DiscreteSSM& d, std::size_t length);

// x is m×L; h0 has N entries. Returns m×L outputs.
Tensor recurrent_scan(const DiscreteSSM& d, const Tensor& x, const Tensor& h0);
// Causal convolution with the kernel plus D·x; assumes a zero initial state.
Tensor conv_scan(const ConvKernel& k, const DiscreteSSM& d, const Tensor& x);

enum class Direction { kForward, kReverse };

// Projections producing per-token step sizes, input and output vectors for a
// channel-diagonal selective scan over D channels with N states per channel.
struct SelectiveParams {
  ad::Var delta_proj;  // D×D
  ad::Var delta_bias;  // 1×D, passed through softplus together with delta_proj
  ad::Var b_proj;      // D×N
  ad::Var b_bias;      // 1×N
  ad::Var c_proj;      // D×N
  ad::Var c_bias;      // 1×N
  ad::Var a_log;       // D×N; the state matrix is -exp(a_log), strictly negative
  ad::Var skip;        // 1×D feed-through

  // a_log starts at log(n+1) so A_n = -(n+1); step sizes start in [0.01, 0.1].
  static SelectiveParams init(std::size_t dim, std::size_t state, Rng& rng);

  std::size_t dim() const { return delta_proj.rows(); }
  std::size_t state() const { return b_proj.cols(); }
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

// Diagonal ZOH scan over a batch of independent sequences stacked row-wise.
// x and delta are (S·m)×D, b and c are (S·m)×N, a is D×N (negative), skip 1×D.
// Each channel d evolves h ← exp(Δ a_d) ⊙ h + Δ φ₁(Δ a_d) ⊙ b · x_d and emits
// c · h + skip_d · x_d, where φ₁(z) = (e^z - 1)/z. Reverse direction walks
// each sequence from its last row to its first. Initial state is zero.
ad::Var scan_core(const ad::Var& x, const ad::Var& delta, const ad::Var& a, const ad::Var& b,
                  const ad::Var& c, const ad::Var& skip, std::size_t seq_len, Direction dir);

// Same arithmetic as scan_core, forward values only, O(D·N) working memory.
Tensor scan_core_values(const Tensor& x, const Tensor& delta, const Tensor& a, const Tensor& b,
                        const Tensor& c, const Tensor& skip, std::size_t seq_len, Direction dir);

// seq_len 0 means "all rows form one sequence".
ad::Var selective_scan(const SelectiveParams& p, const ad::Var& x, Direction dir,
                       std::size_t seq_len = 0);
// forward(x) + reverse(x), parameters shared.
ad::Var bidirectional_scan(const SelectiveParams& p, const ad::Var& x, std::size_t seq_len = 0);

// φ₁ and its derivative, accurate near zero.
double phi1(double z);
double phi1_prime(double z);

}  // namespace mim::ssm
