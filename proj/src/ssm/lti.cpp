#include <cmath>

#include "mim/error.hpp"
#include "mim/ssm.hpp"

namespace mim::ssm {
namespace {

Tensor matmul_plain(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.at(i, p);
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * b.at(p, j);
    }
  return out;
}

double norm_one(const Tensor& m) {
  double best = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) s += std::abs(m.at(i, j));
    best = std::max(best, s);
  }
  return best;
}

void require_square(const Tensor& t, std::size_t n, const char* what) {
  MIM_CHECK(t.rank() == 2 && t.rows() == n && t.cols() == n, ShapeError,
            std::string(what) + " must be " + std::to_string(n) + "x" + std::to_string(n));
}

}  // namespace

Tensor matrix_exp(const Tensor& m) {
  const std::size_t n = m.rows();
  require_square(m, n, "matrix_exp operand");
  int squarings = 0;
  const double norm = norm_one(m);
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  Tensor scaled = m;
  const double factor = std::ldexp(1.0, -squarings);
  for (auto& v : scaled.values()) v *= factor;

  // ‖scaled‖ ≤ 0.5, so 20 terms put the truncation error far below one ulp.
  Tensor result({n, n});
  for (std::size_t i = 0; i < n; ++i) result.at(i, i) = 1.0;
  Tensor term = result;
  for (int k = 1; k <= 20; ++k) {
    term = matmul_plain(term, scaled);
    const double inv_k = 1.0 / k;
    for (auto& v : term.values()) v *= inv_k;
    for (std::size_t i = 0; i < result.size(); ++i) result[i] += term[i];
  }
  for (int s = 0; s < squarings; ++s) result = matmul_plain(result, result);
  return result;
}

DiscreteSSM discretize(const ContinuousSSM& ssm) {
  const std::size_t n = ssm.state_dim(), l = ssm.io_dim();
  MIM_CHECK(ssm.delta > 0.0, DomainError, "discretize: step size must be positive");
  require_square(ssm.a, n, "A");
  MIM_CHECK(ssm.b.rows() == n, ShapeError, "B must have N rows");
  MIM_CHECK(ssm.c.rows() == l && ssm.c.cols() == n, ShapeError, "C must be L×N");
  require_square(ssm.d, l, "D");

  Tensor aug({n + l, n + l});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug.at(i, j) = ssm.delta * ssm.a.at(i, j);
    for (std::size_t j = 0; j < l; ++j) aug.at(i, n + j) = ssm.delta * ssm.b.at(i, j);
  }
  const Tensor e = matrix_exp(aug);

  DiscreteSSM out{Tensor({n, n}), Tensor({n, l}), ssm.c, ssm.d};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.a_bar.at(i, j) = e.at(i, j);
    for (std::size_t j = 0; j < l; ++j) out.b_bar.at(i, j) = e.at(i, n + j);
  }
  MIM_CHECK(out.a_bar.all_finite() && out.b_bar.all_finite(), NumericError,
            "discretize produced non-finite matrices");
  return out;
}

ConvKernel conv_kernel(const DiscreteSSM& d, std::size_t length) {
  ConvKernel k;
  k.taps.reserve(length);
  Tensor power_b = d.b_bar;  // Ā^j B̄
  for (std::size_t j = 0; j < length; ++j) {
    k.taps.push_back(matmul_plain(d.c, power_b));
    if (j + 1 < length) power_b = matmul_plain(d.a_bar, power_b);
  }
  return k;
}

Tensor recurrent_scan(const DiscreteSSM& d, const Tensor& x, const Tensor& h0) {
  const std::size_t n = d.state_dim(), l = d.io_dim(), m = x.rows();
  MIM_CHECK(x.cols() == l, ShapeError, "recurrent_scan: input width must equal L");
  MIM_CHECK(h0.size() == n, ShapeError, "recurrent_scan: h0 must have N entries");
  std::vector<double> h(h0.values().begin(), h0.values().end()), next(n);
  Tensor y({m, l});
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += d.a_bar.at(i, j) * h[j];
      for (std::size_t j = 0; j < l; ++j) s += d.b_bar.at(i, j) * x.at(k, j);
      next[i] = s;
    }
    h.swap(next);
    for (std::size_t o = 0; o < l; ++o) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += d.c.at(o, j) * h[j];
      for (std::size_t j = 0; j < l; ++j) s += d.d.at(o, j) * x.at(k, j);
      y.at(k, o) = s;
    }
  }
  return y;
}

Tensor conv_scan(const ConvKernel& k, const DiscreteSSM& d, const Tensor& x) {
  const std::size_t m = x.rows(), l = d.io_dim();
  MIM_CHECK(k.length() == m, ShapeError,
            "conv_scan: kernel length " + std::to_string(k.length()) +
                " does not match sequence length " + std::to_string(m));
  MIM_CHECK(x.cols() == l, ShapeError, "conv_scan: input width must equal L");
  Tensor y({m, l});
  for (std::size_t t = 0; t < m; ++t) {
    for (std::size_t o = 0; o < l; ++o) {
      double s = 0.0;
      for (std::size_t j = 0; j < l; ++j) s += d.d.at(o, j) * x.at(t, j);
      for (std::size_t lag = 0; lag <= t; ++lag) {
        const Tensor& tap = k.taps[lag];
        for (std::size_t j = 0; j < l; ++j) s += tap.at(o, j) * x.at(t - lag, j);
      }
      y.at(t, o) = s;
    }
  }
  return y;
}

}  // namespace mim::ssm
