#include "mim/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mim/error.hpp"
#include "mim/kernels/kernels.hpp"

namespace mim::ad {
namespace {

Shape mat_shape(std::size_t r, std::size_t c) { return {r, c}; }

void require_same(const Var& a, const Var& b, const char* op) {
  MIM_CHECK(a.rows() == b.rows() && a.cols() == b.cols(), ShapeError,
            std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                shape_str(b.shape()));
}

void require_row(const Var& a, const Var& row, const char* op) {
  MIM_CHECK(row.rows() == 1 && row.cols() == a.cols(), ShapeError,
            std::string(op) + ": expected 1x" + std::to_string(a.cols()) + " row, got " +
                shape_str(row.shape()));
}

template <class F, class DF>
Var unary(const Var& a, F f, DF df) {
  Tensor out(mat_shape(a.rows(), a.cols()));
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return make_op(std::move(out), {a}, [a, df](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    const Tensor& x = a.value();
    Tensor& dx = *pg[0];
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] += g[i] * df(x[i]);
  });
}

}  // namespace

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

Var matmul(const Var& a, const Var& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  MIM_CHECK(b.rows() == k, ShapeError,
            "matmul: inner dims disagree " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tensor out(mat_shape(m, n));
  kernels::active().gemm_nn(m, n, k, a.value().data(), b.value().data(), out.data());
  return make_op(std::move(out), {a, b},
                 [a, b, m, n, k](const Tensor& g, std::span<Tensor* const> pg) {
                   const auto& kt = kernels::active();
                   if (pg[0]) kt.gemm_nt(m, k, n, g.data(), b.value().data(), pg[0]->data());
                   if (pg[1]) kt.gemm_tn(k, n, m, a.value().data(), g.data(), pg[1]->data());
                 });
}

Var transpose(const Var& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(mat_shape(n, m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.value().at(i, j);
  return make_op(std::move(out), {a}, [m, n](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) pg[0]->at(i, j) += g.at(j, i);
  });
}

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  Tensor out(mat_shape(a.rows(), a.cols()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_op(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> pg) {
    for (Tensor* p : pg)
      if (p)
        for (std::size_t i = 0; i < g.size(); ++i) (*p)[i] += g[i];
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  Tensor out(mat_shape(a.rows(), a.cols()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_op(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> pg) {
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
    if (pg[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  Tensor out(mat_shape(a.rows(), a.cols()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_op(std::move(out), {a, b}, [a, b](const Tensor& g, std::span<Tensor* const> pg) {
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * b.value()[i];
    if (pg[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * a.value()[i];
  });
}

Var div(const Var& a, const Var& b) {
  require_same(a, b, "div");
  Tensor out(mat_shape(a.rows(), a.cols()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
  return make_op(std::move(out), {a, b}, [a, b](const Tensor& g, std::span<Tensor* const> pg) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double bv = b.value()[i];
      if (pg[0]) (*pg[0])[i] += g[i] / bv;
      if (pg[1]) (*pg[1])[i] -= g[i] * a.value()[i] / (bv * bv);
    }
  });
}

// Ties send the whole gradient to the first operand.
Var minimum(const Var& a, const Var& b) {
  require_same(a, b, "minimum");
  Tensor out(mat_shape(a.rows(), a.cols()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a.value()[i], b.value()[i]);
  return make_op(std::move(out), {a, b}, [a, b](const Tensor& g, std::span<Tensor* const> pg) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool first = a.value()[i] <= b.value()[i];
      Tensor* dst = first ? pg[0] : pg[1];
      if (dst) (*dst)[i] += g[i];
    }
  });
}

Var maximum(const Var& a, const Var& b) {
  require_same(a, b, "maximum");
  Tensor out(mat_shape(a.rows(), a.cols()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.value()[i], b.value()[i]);
  return make_op(std::move(out), {a, b}, [a, b](const Tensor& g, std::span<Tensor* const> pg) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool first = a.value()[i] >= b.value()[i];
      Tensor* dst = first ? pg[0] : pg[1];
      if (dst) (*dst)[i] += g[i];
    }
  });
}

Var add_row(const Var& a, const Var& row) {
  require_row(a, row, "add_row");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = a.value().reshaped(mat_shape(m, n));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += row.value()[j];
  return make_op(std::move(out), {a, row}, [m, n](const Tensor& g, std::span<Tensor* const> pg) {
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
    if (pg[1])
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*pg[1])[j] += g.at(i, j);
  });
}

Var mul_row(const Var& a, const Var& row) {
  require_row(a, row, "mul_row");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(mat_shape(m, n));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.value().at(i, j) * row.value()[j];
  return make_op(std::move(out), {a, row},
                 [a, row, m, n](const Tensor& g, std::span<Tensor* const> pg) {
                   for (std::size_t i = 0; i < m; ++i)
                     for (std::size_t j = 0; j < n; ++j) {
                       if (pg[0]) pg[0]->at(i, j) += g.at(i, j) * row.value()[j];
                       if (pg[1]) (*pg[1])[j] += g.at(i, j) * a.value().at(i, j);
                     }
                 });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return make_op(Tensor::scalar(s), {a}, [](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (auto& v : pg[0]->values()) v += g[0];
  });
}

Var mean(const Var& a) {
  MIM_CHECK(a.size() > 0, ShapeError, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Var sum_rows(const Var& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(mat_shape(1, n));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += a.value().at(i, j);
  return make_op(std::move(out), {a}, [m, n](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) pg[0]->at(i, j) += g[j];
  });
}

Var mean_rows(const Var& a) {
  MIM_CHECK(a.rows() > 0, ShapeError, "mean_rows of empty tensor");
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows()));
}

Var gelu(const Var& a) {
  return unary(a, gelu_value, [](double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
  });
}

Var sigmoid(const Var& a) {
  return unary(a, sigmoid_value, [](double x) {
    const double s = sigmoid_value(x);
    return s * (1.0 - s);
  });
}

Var softplus(const Var& a) { return unary(a, softplus_value, sigmoid_value); }

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x) { return x > 0 ? 1.0 : 0.0; });
}

Var abs(const Var& a) {
  return unary(a, [](double x) { return std::abs(x); },
               [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor softmax_values(const Tensor& x, int axis) {
  MIM_CHECK(axis == 0 || axis == 1, ShapeError, "softmax axis must be 0 or 1");
  const std::size_t m = x.rows(), n = x.cols();
  MIM_CHECK((axis == 1 ? n : m) > 0, ShapeError, "softmax over an empty axis");
  Tensor y(mat_shape(m, n));
  const std::size_t slices = axis == 1 ? m : n;
  const std::size_t len = axis == 1 ? n : m;
  const std::size_t stride = axis == 1 ? 1 : n;
  for (std::size_t s = 0; s < slices; ++s) {
    const std::size_t base = axis == 1 ? s * n : s;
    double mx = x[base];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, x[base + i * stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double e = std::exp(x[base + i * stride] - mx);
      y[base + i * stride] = e;
      z += e;
    }
    for (std::size_t i = 0; i < len; ++i) y[base + i * stride] /= z;
  }
  return y;
}

Var softmax(const Var& x, int axis) {
  Tensor y = softmax_values(x.value(), axis);
  const std::size_t m = x.rows(), n = x.cols();
  Tensor saved = y;
  return make_op(std::move(y), {x},
                 [saved = std::move(saved), axis, m, n](const Tensor& g,
                                                        std::span<Tensor* const> pg) {
                   if (!pg[0]) return;
                   const std::size_t slices = axis == 1 ? m : n;
                   const std::size_t len = axis == 1 ? n : m;
                   const std::size_t stride = axis == 1 ? 1 : n;
                   for (std::size_t s = 0; s < slices; ++s) {
                     const std::size_t base = axis == 1 ? s * n : s;
                     double dotgy = 0.0;
                     for (std::size_t i = 0; i < len; ++i)
                       dotgy += g[base + i * stride] * saved[base + i * stride];
                     for (std::size_t i = 0; i < len; ++i) {
                       const std::size_t k = base + i * stride;
                       (*pg[0])[k] += saved[k] * (g[k] - dotgy);
                     }
                   }
                 });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  require_row(x, gain, "layer_norm gain");
  require_row(x, bias, "layer_norm bias");
  const std::size_t m = x.rows(), n = x.cols();
  MIM_CHECK(n >= 1, ShapeError, "layer_norm over empty feature axis");
  Tensor xhat(mat_shape(m, n));
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto r = x.value().row_span(i);
    double mu = 0.0;
    for (double v : r) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : r) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) xhat.at(i, j) = (r[j] - mu) * inv_std[i];
  }
  Tensor out(mat_shape(m, n));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.at(i, j) = gain.value()[j] * xhat.at(i, j) + bias.value()[j];
  return make_op(
      std::move(out), {x, gain, bias},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), gain, m, n](
          const Tensor& g, std::span<Tensor* const> pg) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < m; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = g.at(i, j) * gain.value()[j];
            mean_d += d;
            mean_dx += d * xhat.at(i, j);
            if (pg[1]) (*pg[1])[j] += g.at(i, j) * xhat.at(i, j);
            if (pg[2]) (*pg[2])[j] += g.at(i, j);
          }
          if (!pg[0]) continue;
          mean_d *= inv_n;
          mean_dx *= inv_n;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = g.at(i, j) * gain.value()[j];
            pg[0]->at(i, j) += inv_std[i] * (d - mean_d - xhat.at(i, j) * mean_dx);
          }
        }
      });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  const std::size_t n = a.cols();
  MIM_CHECK(begin + count <= a.rows(), ShapeError, "slice_rows out of range");
  const double* src = a.value().data() + begin * n;
  Tensor out(mat_shape(count, n), std::vector<double>(src, src + count * n));
  return make_op(std::move(out), {a},
                 [begin, count, n](const Tensor& g, std::span<Tensor* const> pg) {
                   if (!pg[0]) return;
                   double* dst = pg[0]->data() + begin * n;
                   for (std::size_t i = 0; i < count * n; ++i) dst[i] += g[i];
                 });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  const std::size_t m = a.rows(), n = a.cols();
  MIM_CHECK(begin + count <= n, ShapeError, "slice_cols out of range");
  Tensor out(mat_shape(m, count));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out.at(i, j) = a.value().at(i, begin + j);
  return make_op(std::move(out), {a},
                 [begin, count, m](const Tensor& g, std::span<Tensor* const> pg) {
                   if (!pg[0]) return;
                   for (std::size_t i = 0; i < m; ++i)
                     for (std::size_t j = 0; j < count; ++j)
                       pg[0]->at(i, begin + j) += g.at(i, j);
                 });
}

Var concat_rows(const std::vector<Var>& parts) {
  MIM_CHECK(!parts.empty(), ShapeError, "concat_rows of nothing");
  const std::size_t n = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    MIM_CHECK(p.cols() == n, ShapeError, "concat_rows column mismatch");
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * n);
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(data.size());
    data.insert(data.end(), p.value().storage().begin(), p.value().storage().end());
  }
  return make_op(Tensor(mat_shape(rows, n), std::move(data)), parts,
                 [offsets](const Tensor& g, std::span<Tensor* const> pg) {
                   for (std::size_t k = 0; k < pg.size(); ++k) {
                     if (!pg[k]) continue;
                     for (std::size_t i = 0; i < pg[k]->size(); ++i)
                       (*pg[k])[i] += g[offsets[k] + i];
                   }
                 });
}

Var concat_cols(const std::vector<Var>& parts) {
  MIM_CHECK(!parts.empty(), ShapeError, "concat_cols of nothing");
  const std::size_t m = parts[0].rows();
  std::size_t cols = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    MIM_CHECK(p.rows() == m, ShapeError, "concat_cols row mismatch");
    offsets.push_back(cols);
    cols += p.cols();
  }
  Tensor out(mat_shape(m, cols));
  for (std::size_t k = 0; k < parts.size(); ++k)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < parts[k].cols(); ++j)
        out.at(i, offsets[k] + j) = parts[k].value().at(i, j);
  return make_op(std::move(out), parts,
                 [offsets, m](const Tensor& g, std::span<Tensor* const> pg) {
                   for (std::size_t k = 0; k < pg.size(); ++k) {
                     if (!pg[k]) continue;
                     const std::size_t w = pg[k]->cols();
                     for (std::size_t i = 0; i < m; ++i)
                       for (std::size_t j = 0; j < w; ++j)
                         pg[k]->at(i, j) += g.at(i, offsets[k] + j);
                   }
                 });
}

Var gather_rows(const Var& a, const std::vector<std::size_t>& index) {
  const std::size_t n = a.cols();
  Tensor out(mat_shape(index.size(), n));
  for (std::size_t i = 0; i < index.size(); ++i) {
    MIM_CHECK(index[i] < a.rows(), ShapeError, "gather_rows index out of range");
    std::copy_n(a.value().data() + index[i] * n, n, out.data() + i * n);
  }
  return make_op(std::move(out), {a}, [index, n](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < index.size(); ++i) {
      double* dst = pg[0]->data() + index[i] * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += g[i * n + j];
    }
  });
}

Var bce_with_logits(const Var& logits, const Tensor& targets) {
  Tensor weights(targets.shape());
  for (auto& w : weights.values()) w = 1.0 / static_cast<double>(weights.size());
  return bce_with_logits(logits, targets, weights);
}

Var bce_with_logits(const Var& logits, const Tensor& targets, const Tensor& weights) {
  MIM_CHECK(targets.size() == logits.size(), ShapeError, "bce_with_logits target size mismatch");
  MIM_CHECK(weights.size() == logits.size(), ShapeError, "bce_with_logits weight size mismatch");
  const std::size_t count = logits.size();
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double z = logits.value()[i];
    total += weights[i] * (softplus_value(z) - targets[i] * z);
  }
  return make_op(Tensor::scalar(total), {logits},
                 [logits, targets, weights, count](const Tensor& g, std::span<Tensor* const> pg) {
                   if (!pg[0]) return;
                   for (std::size_t i = 0; i < count; ++i)
                     (*pg[0])[i] +=
                         g[0] * weights[i] * (sigmoid_value(logits.value()[i]) - targets[i]);
                 });
}

}  // namespace mim::ad
