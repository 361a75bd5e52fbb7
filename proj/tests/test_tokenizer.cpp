#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <algorithm>

#include "mim/error.hpp"
#include "mim/ops.hpp"
#include "mim/tokenizer.hpp"

using namespace mim;
using namespace mim::tok;
using ad::Var;

namespace {

Frame random_frame(Rng& rng, std::size_t h, std::size_t w) {
  Frame f(3, h, w);
  for (auto& v : f.data) v = rng.uniform();
  return f;
}

PositionEmbeddings zero_embeddings(std::size_t tokens, std::size_t frames, std::size_t dim) {
  return {Var::parameter(Tensor({tokens, dim})), Var::parameter(Tensor({frames, dim}))};
}

}  // namespace

TEST_CASE("token counts") {
  CHECK(PatchGeometry{256, 256, 16}.count() == 256);
  CHECK(PatchGeometry{64, 64, 16}.count() == 16);
  CHECK_THROWS_AS(PatchGeometry({250, 256, 16}).validate(), DomainError);
  Rng rng(41);
  CHECK_THROWS_AS(extract_patches(random_frame(rng, 250, 256), 16), DomainError);
}

TEST_CASE("patch extraction layout and inverse") {
  Frame f(3, 4, 4);
  for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = static_cast<double>(i);
  const Tensor p = extract_patches(f, 2);
  REQUIRE(p.rows() == 4);
  REQUIRE(p.cols() == 12);
  // Patch 1 is the top-right block; its first entries are channel 0 rows 0..1, cols 2..3.
  CHECK(p.at(1, 0) == f.at(0, 0, 2));
  CHECK(p.at(1, 1) == f.at(0, 0, 3));
  CHECK(p.at(1, 2) == f.at(0, 1, 2));
  CHECK(p.at(1, 4) == f.at(1, 0, 2));
  CHECK(p.at(2, 0) == f.at(0, 2, 0));
  CHECK(unpatchify(p, 3, 4, 4, 2) == f);

  Rng rng(42);
  const Frame g = random_frame(rng, 32, 48);
  CHECK(unpatchify(extract_patches(g, 8), 3, 32, 48, 8) == g);
}

TEST_CASE("grid shape and embedding additivity") {
  Rng rng(43);
  const std::size_t T = 8, D = 6;
  const nn::Linear proj = nn::Linear::init(3 * 16 * 16, D, rng);
  const PositionEmbeddings emb = PositionEmbeddings::init(256, T + 1, D, rng);
  std::vector<Frame> frames;
  for (std::size_t t = 0; t < T; ++t) frames.push_back(random_frame(rng, 256, 256));
  const TokenGrid grid = build_grid(random_frame(rng, 256, 256), frames, 16, proj, emb);
  CHECK(grid.frames == T + 1);
  CHECK(grid.tokens_per_frame() == 256);
  CHECK(grid.tokens.rows() == (T + 1) * 256);
  CHECK(grid.tokens.cols() == D);
  CHECK(grid.frame(3).rows() == 256);
}

TEST_CASE("zero embeddings leave projected patches") {
  Rng rng(44);
  const nn::Linear proj = nn::Linear::init(3 * 4 * 4, 5, rng);
  const Frame t = random_frame(rng, 8, 8), s = random_frame(rng, 8, 8);
  const TokenGrid grid = build_grid(t, {s}, 4, proj, zero_embeddings(4, 2, 5));
  CHECK(grid.frame(0).value() == patchify(t, 4, proj).value());
  CHECK(grid.frame(1).value() == patchify(s, 4, proj).value());
}

TEST_CASE("identical frames differ by temporal embedding differences") {
  Rng rng(45);
  const nn::Linear proj = nn::Linear::init(3 * 4 * 4, 5, rng);
  const PositionEmbeddings emb = PositionEmbeddings::init(4, 3, 5, rng, 1.0);
  const Frame f = random_frame(rng, 8, 8);
  const TokenGrid grid = build_grid(f, {f, f}, 4, proj, emb);
  const Tensor a = grid.frame(1).value(), b = grid.frame(2).value();
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t d = 0; d < 5; ++d)
      CHECK(b.at(s, d) - a.at(s, d) ==
            doctest::Approx(emb.temporal.value().at(2, d) - emb.temporal.value().at(1, d))
                .epsilon(1e-12));
}

TEST_CASE("scan permutations") {
  CHECK(scan_permutation(ScanOrder::kRowMajor, 2, 2) == Permutation{0, 1, 2, 3});
  CHECK(scan_permutation(ScanOrder::kColumnMajor, 2, 2) == Permutation{0, 2, 1, 3});
  CHECK(scan_permutation(ScanOrder::kRowMajorReversed, 2, 3) == Permutation{5, 4, 3, 2, 1, 0});
  CHECK(scan_permutation(ScanOrder::kColumnMajorReversed, 2, 2) == Permutation{3, 1, 2, 0});
  CHECK(order_for_layer(0) == ScanOrder::kRowMajor);
  CHECK(order_for_layer(1) == ScanOrder::kColumnMajor);
  CHECK(order_for_layer(5) == ScanOrder::kColumnMajor);
  CHECK_THROWS_AS(validate_permutation({0, 0, 1}, 3), DomainError);
  CHECK_THROWS_AS(validate_permutation({0, 1}, 3), DomainError);
}

TEST_CASE("schedules are bijections and invert exactly") {
  Rng rng(46);
  for (std::size_t layer = 0; layer < 8; ++layer) {
    const PatchGeometry g{24, 40, 8};
    const Permutation omega = schedule_for_layer(layer, g);
    validate_permutation(omega, g.count());
    const Permutation inv = invert(omega);
    for (std::size_t i = 0; i < omega.size(); ++i) CHECK(inv[omega[i]] == i);

    const Var x = Var::constant(mim::test::random_tensor(rng, 2 * g.count(), 3));
    CHECK(apply_schedule(apply_schedule(x, omega), inv).value() == x.value());
  }
  const Var x = Var::constant(mim::test::random_tensor(rng, 4, 2));
  CHECK(apply_schedule(x, {0, 1, 2, 3}).value() == x.value());
}

TEST_CASE("patchify gradient matches finite differences") {
  Rng rng(47);
  const nn::Linear proj = nn::Linear::init(3 * 2 * 2, 3, rng);
  const PositionEmbeddings emb = PositionEmbeddings::init(4, 2, 3, rng, 0.5);
  nn::ParamList params;
  params.emplace_back("w", proj.weight);
  params.emplace_back("b", proj.bias);
  emb.collect("emb", params);
  const Frame t = random_frame(rng, 4, 4), s = random_frame(rng, 4, 4);
  mim::test::check_grad(
      [&] {
        const Var g = build_grid(t, {s}, 2, proj, emb).tokens;
        return ad::sum(ad::mul(g, g));
      },
      params, 4);
}
