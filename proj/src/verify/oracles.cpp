#include <algorithm>
#include <cmath>

#include "mim/error.hpp"
#include "mim/harness/metrics.hpp"
#include "mim/verify.hpp"

namespace mim::verify {
namespace {

Tensor mat_mul(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

Tensor scaled(const Tensor& a, double s) {
  Tensor out = a;
  for (auto& v : out.values()) v *= s;
  return out;
}

void add_into(Tensor& acc, const Tensor& a) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += a[i];
}

Tensor identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor normal_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t({r, c});
  for (auto& v : t.values()) v = rng.normal();
  return t;
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

}  // namespace

Tensor taylor_exp(const Tensor& m, std::size_t terms) {
  const std::size_t n = m.rows();
  Tensor sum = identity(n), term = identity(n);
  for (std::size_t k = 1; k < terms; ++k) {
    term = scaled(mat_mul(term, m), 1.0 / static_cast<double>(k));
    add_into(sum, term);
  }
  return sum;
}

ssm::DiscreteSSM taylor_discretize(const ssm::ContinuousSSM& c, std::size_t terms) {
  const Tensor da = scaled(c.a, c.delta);
  const Tensor db = scaled(c.b, c.delta);
  // Σ_k (ΔA)^k / (k+1)!  applied to ΔB.
  const std::size_t n = da.rows();
  Tensor power = identity(n), series({n, n});
  double fact = 1.0;
  for (std::size_t k = 0; k < terms; ++k) {
    fact *= static_cast<double>(k + 1);
    add_into(series, scaled(power, 1.0 / fact));
    power = mat_mul(power, da);
  }
  return {taylor_exp(da, terms), mat_mul(series, db), c.c, c.d};
}

ssm::ContinuousSSM random_system(Rng& rng, std::size_t n, std::size_t l, double max_norm) {
  ssm::ContinuousSSM s;
  s.delta = rng.uniform(0.05, 1.0);
  s.a = normal_matrix(rng, n, n);
  const double target = rng.uniform(0.0, max_norm);
  const double current = norm_one(s.a) * s.delta;
  if (current > 0.0) s.a = scaled(s.a, target / current);
  s.b = normal_matrix(rng, n, l);
  s.c = normal_matrix(rng, l, n);
  s.d = normal_matrix(rng, l, l);
  return s;
}

ssm::ContinuousSSM random_stable_system(Rng& rng, std::size_t n, std::size_t l) {
  ssm::ContinuousSSM s;
  s.delta = rng.uniform(0.05, 1.0);
  Tensor a = normal_matrix(rng, n, n);
  // Symmetric part below -0.5 I keeps exp(ΔA) contractive in the 2-norm.
  const double scale = 0.4 / std::max(1.0, norm_one(a));
  s.a = Tensor({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      s.a.at(i, j) = scale * (a.at(i, j) - a.at(j, i)) * 0.5 + (i == j ? -1.0 : 0.0) +
                     scale * 0.1 * a.at(i, j);
  s.b = normal_matrix(rng, n, l);
  s.c = normal_matrix(rng, l, n);
  s.d = normal_matrix(rng, l, l);
  return s;
}

std::vector<rat::Retrieved> brute_force_top_k(const std::vector<std::vector<double>>& entries,
                                              std::span<const double> query, std::size_t k) {
  double nq = 0.0;
  for (double v : query) nq += v * v;
  std::vector<rat::Retrieved> all;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    double dot = 0.0, ne = 0.0;
    for (std::size_t j = 0; j < query.size(); ++j) dot += query[j] * entries[i][j];
    for (double v : entries[i]) ne += v * v;
    all.push_back({i, dot / std::sqrt(nq * ne)});
  }
  std::stable_sort(all.begin(), all.end(), [](const rat::Retrieved& a, const rat::Retrieved& b) {
    return a.similarity > b.similarity;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

bool integer_cosine_below(const std::vector<long long>& a, const std::vector<long long>& b,
                          long long num, long long den) {
  MIM_CHECK(a.size() == b.size() && num > 0 && den > 0, DomainError,
            "integer_cosine_below: bad arguments");
  __int128 dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<__int128>(a[i]) * b[i];
    na += static_cast<__int128>(a[i]) * a[i];
    nb += static_cast<__int128>(b[i]) * b[i];
  }
  MIM_CHECK(na > 0 && nb > 0, DomainError, "integer_cosine_below: zero vector");
  if (dot <= 0) return true;
  // dot/sqrt(na·nb) < num/den  ⇔  dot²·den² < num²·na·nb
  return dot * dot * den * den < static_cast<__int128>(num) * num * na * nb;
}

GradCheck check_gradients(const std::function<ad::Var()>& loss,
                          const std::vector<std::pair<std::string, ad::Var>>& params,
                          std::size_t probes, Rng& rng, double step) {
  MIM_CHECK(!params.empty(), DomainError, "check_gradients: no parameters");
  const ad::Gradients g = ad::backward(loss());
  GradCheck out;
  for (std::size_t p = 0; p < probes; ++p) {
    const auto& [name, var] = params[rng.index(params.size())];
    ad::Var leaf = var;
    const std::size_t idx = rng.index(leaf.size());
    const double analytic = g.of(leaf)[idx];
    const double saved = leaf.value()[idx];
    double up, down;
    {
      ad::NoGradGuard no_grad;
      leaf.leaf_value()[idx] = saved + step;
      up = loss().value().item();
      leaf.leaf_value()[idx] = saved - step;
      down = loss().value().item();
      leaf.leaf_value()[idx] = saved;
    }
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
    ++out.probes;
    if (err >= out.max_error) {
      out.max_error = err;
      out.worst = name + "[" + std::to_string(idx) + "]";
    }
  }
  return out;
}

HandTable five_frame_table() {
  HandTable t;
  const BBox gt{0, 0, 10, 10};
  t.gt.assign(5, gt);
  // Same left edge and width; heights 10, 8, 5, 2 overlap the gt by that
  // fraction. The last box is disjoint.
  t.traj = {{0, 0, 10, 10}, {0, 0, 10, 8}, {0, 0, 10, 5}, {0, 0, 10, 2}, {20, 20, 10, 10}};
  t.ious = {1.0, 0.8, 0.5, 0.2, 0.0};
  // Center errors: 0, 1, 2.5, 4, sqrt(800) ≈ 28.28.
  for (int th = 0; th <= 50; ++th) {
    int c = 1;
    if (th >= 1) c = 2;
    if (th >= 3) c = 3;
    if (th >= 4) c = 4;
    if (th >= 29) c = 5;
    t.precision.push_back(c / 5.0);
  }
  // IoU > i/100: {1.0} always until i = 100, 0.8 until i = 80, 0.5 until 50, 0.2 until 20.
  for (int i = 0; i <= 100; ++i) {
    int c = 0;
    if (i < 100) c = 1;
    if (i < 80) c = 2;
    if (i < 50) c = 3;
    if (i < 20) c = 4;
    t.success.push_back(c / 5.0);
  }
  // Trapezoid: (c_0 + c_100)/2 + Σ_{i=1}^{99} c_i = 2 + 19·4 + 30·3 + 30·2 + 20·1 = 248.
  t.success_auc = 248.0 / 500.0;
  return t;
}

}  // namespace mim::verify
