#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <filesystem>

#include "mim/checkpoint.hpp"
#include "mim/error.hpp"
#include "mim/nn.hpp"
#include "mim/ops.hpp"
#include "mim/optim.hpp"

using namespace mim;
using namespace mim::ad;
using mim::test::check_close;
using mim::test::check_grad;
using mim::test::random_param;
using mim::test::random_tensor;

TEST_CASE("matmul examples") {
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  CHECK(matmul(Var::constant(eye), Var::constant(m)).value() == m);
  CHECK(matmul(Var::constant(m), Var::constant(Tensor::matrix({{1}, {1}}))).value() ==
        Tensor::matrix({{3}, {7}}));
  CHECK(matmul(Var::constant(Tensor::zeros(2, 2)), Var::constant(m)).value() == Tensor::zeros(2, 2));
  CHECK_THROWS_AS(matmul(Var::constant(m), Var::constant(Tensor::zeros(3, 1))), ShapeError);
}

TEST_CASE("matmul matches a naive triple loop") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.index(9), k = 1 + rng.index(9), n = 1 + rng.index(9);
    const Tensor a = random_tensor(rng, m, k), b = random_tensor(rng, k, n);
    Tensor ref({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) ref.at(i, j) += a.at(i, p) * b.at(p, j);
    check_close(matmul(Var::constant(a), Var::constant(b)).value(), ref, 1e-12);
  }
}

TEST_CASE("softmax examples") {
  const Tensor u = softmax(Var::constant(Tensor::row({0, 0, 0})), 1).value();
  for (double v : u.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const Tensor p = softmax(Var::constant(Tensor::row({0, std::log(3.0)})), 1).value();
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(softmax(Var::constant(Tensor::row({7.5})), 1).value()[0] == 1.0);
}

TEST_CASE("softmax rows sum to one, are positive, and ignore shifts") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_tensor(rng, 3, 1 + rng.index(12), 10.0);
    const Tensor p = softmax_values(x, 1);
    Tensor shifted = x;
    const double c = rng.uniform(-50, 50);
    for (auto& v : shifted.values()) v += c;
    check_close(softmax_values(shifted, 1), p, 1e-12);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double s = 0.0;
      for (double v : p.row_span(r)) {
        CHECK(v > 0.0);
        s += v;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax stays finite for huge logits") {
  const Tensor p = softmax(Var::constant(Tensor::row({1000.0, 0.0, -1000.0})), 1).value();
  CHECK(p[0] == 1.0);
  CHECK(p.all_finite());
}

TEST_CASE("layer norm examples") {
  const Var gain = Var::constant(Tensor::row({1, 1})), zero = Var::constant(Tensor::row({0, 0}));
  const Tensor c = layer_norm(Var::constant(Tensor::row({2.5, 2.5})), gain, zero).value();
  CHECK(c[0] == 0.0);
  CHECK(c[1] == 0.0);
  const Tensor pm = layer_norm(Var::constant(Tensor::row({1, -1})), gain, zero).value();
  CHECK(pm[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(pm[1] == doctest::Approx(-1.0).epsilon(1e-6));
  const Var bias = Var::constant(Tensor::row({0.3, -0.7}));
  const Tensor b = layer_norm(Var::constant(Tensor::row({4, 9})),
                              Var::constant(Tensor::row({0, 0})), bias)
                       .value();
  CHECK(b == bias.value());
}

TEST_CASE("linear loss gradient is the broadcast input") {
  Rng rng(5);
  const Var w = random_param(rng, 3, 2);
  const Tensor x = Tensor::row({1.0, -2.0, 0.5});
  const Tensor g = backward(sum(matmul(Var::constant(x), w))).of(w);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(g.at(i, j) == x[i]);
}

TEST_CASE("two-class softmax cross-entropy gradient is p - y") {
  const Var z = Var::parameter(Tensor::row({0.3, -1.1}));
  const Var p = softmax(z, 1);
  const Var loss = scale(log(slice_cols(p, 1, 1)), -1.0);  // label 1
  const Tensor g = backward(loss).of(z);
  CHECK(g[0] == doctest::Approx(p.value()[0]).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(p.value()[1] - 1.0).epsilon(1e-12));
}

TEST_CASE("disconnected parameter gets a zero gradient") {
  const Var a = Var::parameter(Tensor::row({1, 2})), b = Var::parameter(Tensor::row({3, 4}));
  const Gradients g = backward(sum(a));
  CHECK_FALSE(g.reached(b));
  CHECK(g.of(b) == Tensor::zeros(1, 2));
}

TEST_CASE("backward rejects non-scalar losses") {
  CHECK_THROWS_AS(backward(Var::parameter(Tensor::row({1, 2}))), ShapeError);
}

TEST_CASE("no-grad guard drops the graph") {
  const Var a = Var::parameter(Tensor::row({1, 2}));
  Var s;
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    s = sum(a);
  }
  CHECK(grad_enabled());
  CHECK_FALSE(s.requires_grad());
}

TEST_CASE("non-finite results raise NumericError") {
  CHECK_THROWS_AS(log(Var::constant(Tensor::row({-1.0}))), NumericError);
  CHECK_THROWS_AS(div(Var::constant(Tensor::row({1.0})), Var::constant(Tensor::row({0.0}))),
                  NumericError);
}

TEST_CASE("elementwise and reduction gradients match finite differences") {
  Rng rng(6);
  const Var a = random_param(rng, 3, 4), b = random_param(rng, 3, 4), r = random_param(rng, 1, 4);
  const Var pos = Var::parameter([&] {
    Tensor t = random_tensor(rng, 3, 4);
    for (auto& v : t.values()) v = 0.5 + std::abs(v);
    return t;
  }());
  const std::vector<std::pair<std::string, Var>> params{{"a", a}, {"b", b}, {"r", r}, {"pos", pos}};
  check_grad(
      [&] {
        const Var x = add(mul(gelu(a), sigmoid(b)), div(softplus(a), pos));
        const Var y = add_row(mul_row(x, exp(scale(r, 0.3))), r);
        const Var z = add(log(pos), abs(sub(minimum(a, b), maximum(a, b))));
        return add(mean(mul(y, y)), sum(mean_rows(add_scalar(z, 0.1))));
      },
      params);
}

TEST_CASE("structural op gradients match finite differences") {
  Rng rng(7);
  const Var a = random_param(rng, 4, 3), b = random_param(rng, 3, 5), c = random_param(rng, 2, 3);
  const std::vector<std::pair<std::string, Var>> params{{"a", a}, {"b", b}, {"c", c}};
  check_grad(
      [&] {
        const Var m = matmul(a, b);                                   // 4×5
        const Var t = transpose(slice_cols(m, 1, 3));                 // 3×4
        const Var s = softmax(t, 1);
        const Var cat = concat_rows({slice_rows(a, 1, 2), c});        // 4×3
        const Var g = gather_rows(cat, {3, 0, 0, 2});
        const Var wide = concat_cols({g, softmax(a, 0)});             // 4×6
        return add(sum(mul(s, s)), mean(sum_rows(mul(wide, wide))));
      },
      params);
}

TEST_CASE("layer norm and bce gradients match finite differences") {
  Rng rng(8);
  const Var x = random_param(rng, 3, 6), gain = random_param(rng, 1, 6), bias = random_param(rng, 1, 6);
  Tensor targets({3, 1}), weights({3, 1});
  targets[1] = 1.0;
  weights[0] = 0.2;
  weights[1] = 0.5;
  weights[2] = 0.3;
  const std::vector<std::pair<std::string, Var>> params{{"x", x}, {"gain", gain}, {"bias", bias}};
  check_grad(
      [&] {
        const Var y = layer_norm(x, gain, bias);
        const Var logits = slice_cols(y, 2, 1);
        return add(add(mean(mul(y, y)), bce_with_logits(logits, targets)),
                   bce_with_logits(logits, targets, weights));
      },
      params);
}

TEST_CASE("unweighted bce is the uniformly weighted mean") {
  const Var z = Var::constant(Tensor::matrix({{0.3}, {-2.0}, {4.0}}));
  Tensor t({3, 1}), w({3, 1}, 1.0 / 3.0);
  t[2] = 1.0;
  CHECK(bce_with_logits(z, t).value().item() ==
        doctest::Approx(bce_with_logits(z, t, w).value().item()).epsilon(1e-15));
}

TEST_CASE("gelu, softplus and sigmoid reference values") {
  CHECK(gelu_value(0.0) == 0.0);
  CHECK(sigmoid_value(0.0) == 0.5);
  CHECK(softplus_value(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus_value(800.0) == 800.0);
  CHECK(sigmoid_value(-800.0) >= 0.0);
}

TEST_CASE("warm-up then cosine schedule") {
  CHECK(optim::warmup_cosine(0, 10, 100, 1.0) == doctest::Approx(0.1));
  CHECK(optim::warmup_cosine(9, 10, 100, 1.0) == doctest::Approx(1.0));
  CHECK(optim::warmup_cosine(10, 10, 100, 1.0) == doctest::Approx(1.0));
  CHECK(optim::warmup_cosine(55, 10, 100, 1.0) == doctest::Approx(0.5).epsilon(0.02));
  double prev = 2.0;
  for (std::size_t s = 10; s < 100; ++s) {
    const double lr = optim::warmup_cosine(s, 10, 100, 1.0);
    CHECK(lr <= prev);
    CHECK(lr >= 0.0);
    prev = lr;
  }
}

TEST_CASE("AdamW minimizes a quadratic") {
  const Var w = Var::parameter(Tensor::row({3.0, -2.0}));
  nn::ParamList params{{"w", w}};
  optim::AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  optim::AdamW opt(params, cfg);
  for (int i = 0; i < 500; ++i) {
    const Gradients g = backward(sum(mul(w, w)));
    opt.step({g.of(w)}, 0.05);
  }
  CHECK(std::abs(w.value()[0]) < 1e-2);
  CHECK(std::abs(w.value()[1]) < 1e-2);
  CHECK(opt.steps_taken() == 500);
}

TEST_CASE("checkpoint round trip is bit exact and rejects mismatches") {
  Rng rng(9);
  const nn::Mlp mlp = nn::Mlp::init({4, 7, 3}, rng);
  nn::ParamList params;
  mlp.collect("mlp", params);
  const auto path = std::filesystem::temp_directory_path() / "mim_numerics_ckpt.bin";
  checkpoint::write(path, checkpoint::snapshot(params));
  const auto back = checkpoint::read(path);
  CHECK(back == checkpoint::snapshot(params));

  Rng other_rng(10);
  const nn::Mlp other = nn::Mlp::init({4, 7, 3}, other_rng);
  nn::ParamList other_params;
  other.collect("mlp", other_params);
  CHECK(nn::checksum(other_params) != nn::checksum(params));
  checkpoint::restore(other_params, back);
  CHECK(nn::checksum(other_params) == nn::checksum(params));

  const nn::Mlp wrong = nn::Mlp::init({4, 5, 3}, other_rng);
  nn::ParamList wrong_params;
  wrong.collect("mlp", wrong_params);
  CHECK_THROWS_AS(checkpoint::restore(wrong_params, back), Error);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint reader rejects truncated files") {
  const auto path = std::filesystem::temp_directory_path() / "mim_numerics_trunc.bin";
  checkpoint::write(path, {{"a", Tensor::row({1, 2, 3})}});
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
  CHECK_THROWS_AS(checkpoint::read(path), FormatError);
  std::filesystem::remove(path);
}
