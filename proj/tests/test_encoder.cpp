#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include "mim/error.hpp"
#include "mim/mim_encoder.hpp"
#include "mim/ops.hpp"

using namespace mim;
using namespace mim::enc;
using ad::Var;
using mim::test::check_close;
using mim::test::random_tensor;

namespace {

EncoderConfig tiny(std::size_t depth = 2) {
  EncoderConfig c;
  c.dim = 8;
  c.state = 4;
  c.depth = depth;
  return c;
}

// Template plus `frames` search frames on a 2×2 grid.
tok::TokenGrid random_grid(Rng& rng, std::size_t frames, std::size_t dim = 8) {
  return {Var::constant(random_tensor(rng, (frames + 1) * 4, dim)), frames + 1, {4, 4, 2}};
}

Tensor rows_of(const Tensor& t, std::size_t begin, std::size_t count) {
  Tensor out({count, t.cols()});
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) out.at(r, c) = t.at(begin + r, c);
  return out;
}

}  // namespace

TEST_CASE("template summary examples") {
  Rng rng(51);
  const Tensor tokens = random_tensor(rng, 3, 4);
  const Tensor mean = ad::mean_rows(Var::constant(tokens)).value();
  check_close(template_summary(Var::constant(tokens), Var::constant(Tensor({4, 1}))).value(), mean,
              1e-15);

  const Tensor one = random_tensor(rng, 1, 4);
  check_close(template_summary(Var::constant(one), Var::constant(random_tensor(rng, 4, 1))).value(),
              one, 1e-15);

  // Scores [ln 3, 0] from tokens [ln 3, 1] and [0, 1] with weight [1, 0].
  const Tensor two = Tensor::matrix({{std::log(3.0), 1.0}, {0.0, 1.0}});
  Var scores;
  const Tensor s = template_summary(Var::constant(two), Var::constant(Tensor::matrix({{1}, {0}})),
                                    &scores)
                       .value();
  CHECK(scores.value()[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(s[0] == doctest::Approx(0.75 * std::log(3.0)).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("frame spatial scan with zero summary is a plain residual bidirectional scan") {
  Rng rng(52);
  const MiMBlock block = MiMBlock::init(0, tiny(), rng);
  const tok::TokenGrid grid = random_grid(rng, 1);
  const Var out = frame_spatial_scan(block, grid, Var::constant(Tensor({1, 8})));
  const Var search = grid.frame(1);
  const Var want = ad::add(search, ssm::bidirectional_scan(block.spatial, block.spatial_norm(search)));
  check_close(out.value(), want.value(), 1e-14);
}

TEST_CASE("frame spatial scan matches a hand-composed scan under the layer schedule") {
  Rng rng(53);
  const MiMBlock block = MiMBlock::init(1, tiny(), rng);  // column-major schedule
  const tok::TokenGrid grid = random_grid(rng, 1);
  const Var summary = Var::constant(random_tensor(rng, 1, 8));
  const Var search = grid.frame(1);
  const Var cond = ad::add_row(block.spatial_norm(search), summary);
  const Var ordered = ad::gather_rows(cond, {0, 2, 1, 3});
  const Tensor scanned = ssm::bidirectional_scan(block.spatial, ordered).value();
  Tensor want = search.value();
  const std::size_t slot[4] = {0, 2, 1, 3};
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t c = 0; c < 8; ++c) want.at(slot[j], c) += scanned.at(j, c);
  check_close(frame_spatial_scan(block, grid, summary).value(), want, 1e-14);

  // Two identical search frames give identical slices.
  Tensor dup = grid.tokens.value();
  Tensor two({12, 8});
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) two.at(r, c) = dup.at(r, c);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 8; ++c) two.at(8 + r, c) = dup.at(4 + r, c);
  const Tensor y = frame_spatial_scan(block, {Var::constant(two), 3, {4, 4, 2}}, summary).value();
  CHECK(rows_of(y, 0, 4) == rows_of(y, 4, 4));
}

TEST_CASE("time serialization scan examples") {
  Rng rng(54);
  const MiMBlock block = MiMBlock::init(0, tiny(), rng);
  const Tensor frame = random_tensor(rng, 4, 8);
  Tensor constant({12, 8});
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 8; ++c) constant.at(4 * t + r, c) = frame.at(r, c);
  const tok::TokenGrid still{Var::constant(constant), 3, {4, 4, 2}};
  CHECK(time_serialization_scan(block, still, 1.0).tokens.value() == constant);

  // T = 1: P¹ + one scan step over Δt·(P̂¹ − P̂⁰) per location.
  const tok::TokenGrid grid = random_grid(rng, 1);
  const Var normed = block.temporal_norm(grid.tokens);
  const Var resid = ad::scale(ad::sub(ad::slice_rows(normed, 4, 4), ad::slice_rows(normed, 0, 4)), 0.5);
  const Tensor step = ssm::selective_scan(block.temporal, resid, ssm::Direction::kForward, 1).value();
  Tensor want = grid.frame(1).value();
  for (std::size_t i = 0; i < want.size(); ++i) want[i] += step[i];
  const Tensor got = time_serialization_scan(block, grid, 0.5).tokens.value();
  check_close(rows_of(got, 4, 4), want, 1e-14);
  CHECK(rows_of(got, 0, 4) == grid.frame(0).value());
}

TEST_CASE("temporal residuals scale linearly with the step") {
  Rng rng(55);
  const Var x = Var::constant(random_tensor(rng, 12, 3));
  const Tensor one = temporal_residuals(x, 3, 4, 1.0).value();
  const Tensor two = temporal_residuals(x, 3, 4, 2.0).value();
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(two[i] == 2.0 * one[i]);
  // Location-major ordering: row p·T + (t − 1).
  CHECK(one.at(1 * 2 + 1, 0) == x.value().at(2 * 4 + 1, 0) - x.value().at(1 * 4 + 1, 0));
}

TEST_CASE("tracking attention examples") {
  Rng rng(56);
  EncoderConfig cfg = tiny();
  MiMBlock block = MiMBlock::init(0, cfg, rng);
  const Var query = Var::constant(random_tensor(rng, 1, 8));

  const Var one = Var::constant(random_tensor(rng, 1, 8));
  const AttentionResult r1 = tracking_attention(block, one, query, Injection::kQueryAttention);
  CHECK(r1.weights[0] == 1.0);
  const Tensor v = ad::matmul(one, block.w_v).value();
  for (std::size_t c = 0; c < 8; ++c)
    CHECK(r1.tokens.value()[c] == doctest::Approx(one.value()[c] + v[c]).epsilon(1e-14));

  // Zero key projection makes every key identical.
  block.w_k = Var::constant(Tensor({8, 8}));
  const Var many = Var::constant(random_tensor(rng, 6, 8));
  const AttentionResult ru = tracking_attention(block, many, query, Injection::kQueryAttention);
  for (double w : ru.weights.values()) CHECK(w == doctest::Approx(1.0 / 6.0).epsilon(1e-15));

  // Logits {0, ln 3} with d_k = 1.
  MiMBlock small;
  small.w_q = Var::constant(Tensor::matrix({{1.0}}));
  small.w_k = Var::constant(Tensor::matrix({{1.0}}));
  small.w_v = Var::constant(Tensor::matrix({{1.0}}));
  const AttentionResult r2 = tracking_attention(small, Var::constant(Tensor::matrix({{0.0}, {std::log(3.0)}})),
                                                Var::constant(Tensor::matrix({{1.0}})),
                                                Injection::kQueryAttention);
  CHECK(r2.weights[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(r2.weights[1] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK_THROWS_AS(tracking_attention(block, many, Var::constant(Tensor({1, 3})),
                                     Injection::kQueryAttention),
                  ShapeError);
}

TEST_CASE("every injection mode has correct gradients") {
  for (Injection inj : {Injection::kQueryAttention, Injection::kAdditive, Injection::kConcatenate,
                        Injection::kKeyValueAttention}) {
    Rng rng(57);
    EncoderConfig cfg = tiny();
    cfg.injection = inj;
    const MiMBlock block = MiMBlock::init(0, cfg, rng);
    nn::ParamList params;
    params.emplace_back("w_q", block.w_q);
    params.emplace_back("w_k", block.w_k);
    params.emplace_back("w_v", block.w_v);
    if (block.w_cat.defined()) params.emplace_back("w_cat", block.w_cat);
    const Var tokens = Var::parameter(random_tensor(rng, 5, 8));
    const Var query = Var::parameter(random_tensor(rng, 1, 8));
    params.emplace_back("tokens", tokens);
    params.emplace_back("query", query);
    mim::test::check_grad(
        [&] {
          const Var y = tracking_attention(block, tokens, query, inj).tokens;
          return ad::sum(ad::mul(y, y));
        },
        params, 5);
  }
}

TEST_CASE("encoder forward: composition, template isolation and determinism") {
  Rng rng(58);
  EncoderConfig cfg = tiny(1);
  cfg.temporal = cfg.retrieval = false;
  const EncoderStack stack = EncoderStack::init(cfg, rng);
  const tok::TokenGrid grid = random_grid(rng, 2);
  const tok::TokenGrid out = forward(stack, grid, std::nullopt);
  const TemplatePass tp = template_spatial_scan(stack.blocks[0], grid);
  check_close(rows_of(out.tokens.value(), 4, 8),
              frame_spatial_scan(stack.blocks[0], grid, tp.summary).value(), 0.0);

  EncoderConfig full = tiny(2);
  Rng a(59), b(59);
  const EncoderStack s1 = EncoderStack::init(full, a), s2 = EncoderStack::init(full, b);
  const Var q = Var::constant(random_tensor(rng, 1, 8));
  CHECK(forward(s1, grid, q).tokens.value() == forward(s2, grid, q).tokens.value());
  CHECK_THROWS_AS(forward(s1, grid, std::nullopt), DomainError);

  // The template slice after the stack depends on the template tokens only.
  const Var q2 = Var::constant(random_tensor(rng, 1, 8));
  tok::TokenGrid changed = grid;
  Tensor t = grid.tokens.value();
  t.at(9, 3) += 1.0;
  changed.tokens = Var::constant(t);
  CHECK(rows_of(forward(s1, changed, q2).tokens.value(), 0, 4) ==
        rows_of(forward(s1, grid, q).tokens.value(), 0, 4));

  // Without retrieval the query is ignored.
  EncoderConfig ablated = tiny(2);
  ablated.retrieval = false;
  Rng c(60);
  const EncoderStack s3 = EncoderStack::init(ablated, c);
  CHECK(forward(s3, grid, q).tokens.value() == forward(s3, grid, q2).tokens.value());
}
