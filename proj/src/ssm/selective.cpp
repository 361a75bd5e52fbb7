#include <array>
#include <cmath>
#include <memory>

#include "mim/error.hpp"
#include "mim/kernels/kernels.hpp"
#include "mim/ops.hpp"
#include "mim/ssm.hpp"

namespace mim::ssm {

double phi1(double z) {
  if (std::abs(z) < 0.1) {
    // Σ_{k<12} z^k / (k+1)!
    double sum = 1.0;
    for (int k = 11; k >= 1; --k) sum = 1.0 + sum * z / (k + 1);
    return sum;
  }
  return std::expm1(z) / z;
}

double phi1_prime(double z) {
  if (std::abs(z) < 0.1) {
    // Σ_{k≥0} (k+1) z^k / (k+2)!, Horner form.
    static constexpr auto kCoef = [] {
      std::array<double, 11> c{};
      double fact = 2.0;
      for (int k = 0; k < 11; ++k) {
        c[k] = (k + 1) / fact;
        fact *= (k + 3);
      }
      return c;
    }();
    double sum = kCoef[10];
    for (int k = 9; k >= 0; --k) sum = kCoef[k] + sum * z;
    return sum;
  }
  return (std::exp(z) - phi1(z)) / z;
}

namespace {

struct ScanShape {
  std::size_t rows, dim, state, seq_len, sequences;
};

ScanShape check_shapes(const Tensor& x, const Tensor& delta, const Tensor& a, const Tensor& b,
                       const Tensor& c, const Tensor& skip, std::size_t seq_len) {
  const std::size_t rows = x.rows(), dim = x.cols(), state = a.cols();
  MIM_CHECK(delta.rows() == rows && delta.cols() == dim, ShapeError,
            "scan: delta must match x " + shape_str(x.shape()));
  MIM_CHECK(a.rows() == dim, ShapeError, "scan: A must be D×N");
  MIM_CHECK(b.rows() == rows && b.cols() == state, ShapeError, "scan: B must be rows×N");
  MIM_CHECK(c.rows() == rows && c.cols() == state, ShapeError, "scan: C must be rows×N");
  MIM_CHECK(skip.size() == dim, ShapeError, "scan: skip must have D entries");
  if (seq_len == 0) seq_len = rows;
  MIM_CHECK(seq_len > 0 && rows % seq_len == 0, ShapeError,
            "scan: row count " + std::to_string(rows) + " is not a multiple of sequence length " +
                std::to_string(seq_len));
  for (double v : delta.values())
    MIM_CHECK(v > 0.0, NumericError, "scan: step size must be positive");
  return {rows, dim, state, seq_len, rows / seq_len};
}

// Row visited at position k of sequence s.
inline std::size_t row_of(const ScanShape& sh, std::size_t s, std::size_t k, Direction dir) {
  return s * sh.seq_len + (dir == Direction::kForward ? k : sh.seq_len - 1 - k);
}

// decay = e^z and φ₁(z) for z = Δ a, one entry per (row, channel, state).
struct Coefficients {
  std::vector<double> decay;
  std::vector<double> phi;
};

Coefficients coefficients(const ScanShape& sh, const Tensor& delta, const Tensor& a) {
  Coefficients co;
  co.decay.resize(sh.rows * sh.dim * sh.state);
  co.phi.resize(co.decay.size());
  std::size_t i = 0;
  for (std::size_t r = 0; r < sh.rows; ++r)
    for (std::size_t d = 0; d < sh.dim; ++d) {
      const double dt = delta.at(r, d);
      for (std::size_t n = 0; n < sh.state; ++n, ++i) {
        const double z = dt * a.at(d, n);
        const double ez = std::exp(z);
        co.decay[i] = ez;
        co.phi[i] = std::abs(z) < 0.1 ? phi1(z) : (ez - 1.0) / z;
      }
    }
  return co;
}

// gain = Δ φ₁(z) b for one (row, channel).
void gains(const ScanShape& sh, const Coefficients& co, std::size_t r, std::size_t d,
           const Tensor& delta, const Tensor& b, double* gain) {
  const double dt = delta.at(r, d);
  const double* phi = co.phi.data() + (r * sh.dim + d) * sh.state;
  const double* brow = b.data() + r * sh.state;
  for (std::size_t n = 0; n < sh.state; ++n) gain[n] = dt * phi[n] * brow[n];
}

Tensor scan_values(const ScanShape& sh, const Coefficients& co, const Tensor& x,
                   const Tensor& delta, const Tensor& b, const Tensor& c, const Tensor& skip,
                   Direction dir, double* states) {
  const auto& kt = kernels::active();
  Tensor y({sh.rows, sh.dim});
  std::vector<double> h(sh.dim * sh.state), zero(sh.state, 0.0), gain(sh.state);
  for (std::size_t s = 0; s < sh.sequences; ++s) {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t k = 0; k < sh.seq_len; ++k) {
      const std::size_t r = row_of(sh, s, k, dir);
      const std::size_t prev = k ? row_of(sh, s, k - 1, dir) : 0;
      const double* crow = c.data() + r * sh.state;
      for (std::size_t d = 0; d < sh.dim; ++d) {
        gains(sh, co, r, d, delta, b, gain.data());
        const double* decay = co.decay.data() + (r * sh.dim + d) * sh.state;
        const double xv = x.at(r, d);
        const double* hp;
        double* hd;
        if (states) {
          hp = k ? states + (prev * sh.dim + d) * sh.state : zero.data();
          hd = states + (r * sh.dim + d) * sh.state;
        } else {
          hp = hd = h.data() + d * sh.state;
        }
        y.at(r, d) = kt.scan_step(sh.state, decay, gain.data(), xv, hp, hd, crow) + skip[d] * xv;
      }
    }
  }
  return y;
}

ad::Var scan_with(const ad::Var& x, const ad::Var& delta, const ad::Var& a, const ad::Var& b,
                  const ad::Var& c, const ad::Var& skip, const ScanShape& sh, Direction dir,
                  std::shared_ptr<const Coefficients> co) {
  const bool record = ad::grad_enabled() &&
                      (x.requires_grad() || delta.requires_grad() || a.requires_grad() ||
                       b.requires_grad() || c.requires_grad() || skip.requires_grad());
  if (!record)
    return ad::make_op(scan_values(sh, *co, x.value(), delta.value(), b.value(), c.value(),
                                   skip.value(), dir, nullptr),
                       {}, {});

  // Keep every state for the adjoint sweep: states[(row·D + d)·N + n].
  auto states = std::make_shared<std::vector<double>>(sh.rows * sh.dim * sh.state);
  Tensor y = scan_values(sh, *co, x.value(), delta.value(), b.value(), c.value(), skip.value(),
                         dir, states->data());

  return ad::make_op(
      std::move(y), {x, delta, a, b, c, skip},
      [x, delta, a, b, c, skip, sh, dir, states, co](const Tensor& g, std::span<Tensor* const> pg) {
        const auto& kt = kernels::active();
        const Tensor &xv = x.value(), &dv = delta.value(), &av = a.value(), &bv = b.value(),
                     &cv = c.value(), &sv = skip.value();
        const std::size_t N = sh.state;
        std::vector<double> carry(sh.dim * N), zero(N, 0.0), gain(N), d_decay(N), d_gain(N),
            dc_scratch(N);
        for (std::size_t s = 0; s < sh.sequences; ++s) {
          std::fill(carry.begin(), carry.end(), 0.0);
          for (std::size_t kk = sh.seq_len; kk-- > 0;) {
            const std::size_t r = row_of(sh, s, kk, dir);
            const std::size_t prev = kk ? row_of(sh, s, kk - 1, dir) : 0;
            const double* crow = cv.data() + r * N;
            double* dc = pg[4] ? pg[4]->data() + r * N : dc_scratch.data();
            for (std::size_t d = 0; d < sh.dim; ++d) {
              const double dy = g.at(r, d);
              const double xval = xv.at(r, d);
              const std::size_t base = (r * sh.dim + d) * N;
              const double* decay = co->decay.data() + base;
              const double* phi = co->phi.data() + base;
              gains(sh, *co, r, d, dv, bv, gain.data());
              const double* hp = kk ? states->data() + (prev * sh.dim + d) * N : zero.data();
              const double* hd = states->data() + base;
              const double dx_state =
                  kt.scan_step_back(N, decay, gain.data(), xval, hp, hd, crow, dy,
                                    carry.data() + d * N, dc, d_decay.data(), d_gain.data());
              if (pg[0]) pg[0]->at(r, d) += dx_state + sv[d] * dy;
              if (pg[5]) (*pg[5])[d] += xval * dy;
              const double dt = dv.at(r, d);
              double d_dt = 0.0;
              for (std::size_t n = 0; n < N; ++n) {
                const double an = av.at(d, n);
                const double ez = decay[n];
                const double bn = bv.at(r, n);
                // decay = e^z; gain = Δ φ₁(z) b with ∂/∂Δ = e^z b, ∂/∂a = Δ² φ₁'(z) b.
                d_dt += d_gain[n] * bn * ez + d_decay[n] * an * ez;
                if (pg[2]) {
                  const double z = dt * an;
                  const double dphi = std::abs(z) < 0.1 ? phi1_prime(z) : (ez - phi[n]) / z;
                  pg[2]->at(d, n) += d_gain[n] * bn * dt * dt * dphi + d_decay[n] * dt * ez;
                }
                if (pg[3]) pg[3]->at(r, n) += d_gain[n] * dt * phi[n];
              }
              if (pg[1]) pg[1]->at(r, d) += d_dt;
            }
          }
        }
      });
}

}  // namespace

Tensor scan_core_values(const Tensor& x, const Tensor& delta, const Tensor& a, const Tensor& b,
                        const Tensor& c, const Tensor& skip, std::size_t seq_len, Direction dir) {
  const ScanShape sh = check_shapes(x, delta, a, b, c, skip, seq_len);
  return scan_values(sh, coefficients(sh, delta, a), x, delta, b, c, skip, dir, nullptr);
}

ad::Var scan_core(const ad::Var& x, const ad::Var& delta, const ad::Var& a, const ad::Var& b,
                  const ad::Var& c, const ad::Var& skip, std::size_t seq_len, Direction dir) {
  const ScanShape sh =
      check_shapes(x.value(), delta.value(), a.value(), b.value(), c.value(), skip.value(), seq_len);
  return scan_with(x, delta, a, b, c, skip, sh, dir,
                   std::make_shared<const Coefficients>(coefficients(sh, delta.value(), a.value())));
}

SelectiveParams SelectiveParams::init(std::size_t dim, std::size_t state, Rng& rng) {
  SelectiveParams p;
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(dim));
  p.delta_proj = nn::normal_param(dim, dim, 0.02, rng);
  Tensor bias({1, dim});
  for (auto& v : bias.values()) {
    const double target = std::exp(rng.uniform(std::log(0.01), std::log(0.1)));
    v = target + std::log(-std::expm1(-target));  // softplus⁻¹
  }
  p.delta_bias = ad::Var::parameter(std::move(bias));
  p.b_proj = nn::normal_param(dim, state, proj_std, rng);
  p.b_bias = nn::const_param(1, state, 0.0);
  p.c_proj = nn::normal_param(dim, state, proj_std, rng);
  p.c_bias = nn::const_param(1, state, 0.0);
  Tensor alog({dim, state});
  for (std::size_t d = 0; d < dim; ++d)
    for (std::size_t n = 0; n < state; ++n) alog.at(d, n) = std::log(static_cast<double>(n + 1));
  p.a_log = ad::Var::parameter(std::move(alog));
  p.skip = nn::const_param(1, dim, 1.0);
  return p;
}

void SelectiveParams::collect(const std::string& prefix, nn::ParamList& out) const {
  out.emplace_back(prefix + ".delta_proj", delta_proj);
  out.emplace_back(prefix + ".delta_bias", delta_bias);
  out.emplace_back(prefix + ".b_proj", b_proj);
  out.emplace_back(prefix + ".b_bias", b_bias);
  out.emplace_back(prefix + ".c_proj", c_proj);
  out.emplace_back(prefix + ".c_bias", c_bias);
  out.emplace_back(prefix + ".a_log", a_log);
  out.emplace_back(prefix + ".skip", skip);
}

namespace {

struct Projected {
  ad::Var delta, a, b, c;
};

Projected project(const SelectiveParams& p, const ad::Var& x) {
  MIM_CHECK(x.cols() == p.dim(), ShapeError,
            "selective_scan: token width " + std::to_string(x.cols()) + " != model dim " +
                std::to_string(p.dim()));
  using namespace ad;
  return {softplus(add_row(matmul(x, p.delta_proj), p.delta_bias)),
          scale(exp(p.a_log), -1.0), add_row(matmul(x, p.b_proj), p.b_bias),
          add_row(matmul(x, p.c_proj), p.c_bias)};
}

}  // namespace

ad::Var selective_scan(const SelectiveParams& p, const ad::Var& x, Direction dir,
                       std::size_t seq_len) {
  const Projected pr = project(p, x);
  return scan_core(x, pr.delta, pr.a, pr.b, pr.c, p.skip, seq_len, dir);
}

ad::Var bidirectional_scan(const SelectiveParams& p, const ad::Var& x, std::size_t seq_len) {
  const Projected pr = project(p, x);
  const ScanShape sh = check_shapes(x.value(), pr.delta.value(), pr.a.value(), pr.b.value(),
                                    pr.c.value(), p.skip.value(), seq_len);
  // Both directions see the same per-token coefficients.
  const auto co =
      std::make_shared<const Coefficients>(coefficients(sh, pr.delta.value(), pr.a.value()));
  return ad::add(scan_with(x, pr.delta, pr.a, pr.b, pr.c, p.skip, sh, Direction::kForward, co),
                 scan_with(x, pr.delta, pr.a, pr.b, pr.c, p.skip, sh, Direction::kReverse, co));
}

}  // namespace mim::ssm
