#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <filesystem>

#include "mim/error.hpp"
#include "mim/ops.hpp"
#include "mim/track_head.hpp"

using namespace mim;
using namespace mim::head;

namespace {

// Raw value whose sigmoid is p.
double logit(double p) { return std::log(p / (1.0 - p)); }

// Raw offset placing the center at pixel c from a cell starting at cell·K.
double offset_for(double c, std::size_t cell, double k) {
  return logit((c / k - static_cast<double>(cell) - 0.5) / kOffsetSpan + 0.5);
}

}  // namespace

TEST_CASE("decode examples") {
  const tok::PatchGeometry one{8, 8, 8};
  Tensor raw({1, 5});
  raw.at(0, kCx) = logit(0.5);
  raw.at(0, kCy) = logit(2.0 / 3.0);
  raw.at(0, kW) = logit(0.5);
  raw.at(0, kH) = logit(0.25);
  const Prediction p = decode(raw, one);
  CHECK(p.token == 0);
  CHECK(p.box.cx() == doctest::Approx(4.0));
  CHECK(p.box.cy() == doctest::Approx(8.0));  // one full span reaches a cell beyond
  CHECK(p.box.w == doctest::Approx(4.0));
  CHECK(p.box.h == doctest::Approx(2.0));

  const tok::PatchGeometry g{32, 32, 8};  // 4×4 grid
  Tensor grid({16, 5});
  grid.at(5, kLogit) = 3.0;
  const Prediction q = decode(grid, g);
  CHECK(q.token == 5);
  CHECK(q.box.cx() == doctest::Approx((1 + 0.5) * 8));
  CHECK(q.box.cy() == doctest::Approx((1 + 0.5) * 8));
  CHECK(q.score == doctest::Approx(ad::sigmoid_value(3.0)));

  CHECK(decode(Tensor({16, 5}, 0.7), g).token == 0);
  CHECK_THROWS_AS(decode(Tensor({15, 5}), g), ShapeError);
}

TEST_CASE("hann window and windowed decode") {
  const tok::PatchGeometry g{40, 40, 8};  // 5×5 grid
  const std::vector<double> w = hann_window(g);
  REQUIRE(w.size() == 25);
  CHECK(w[12] == doctest::Approx(1.0));
  CHECK(w[0] == doctest::Approx(0.0));
  CHECK(w[7] == doctest::Approx(0.5));    // row 1, column 2
  CHECK(w[6] == doctest::Approx(0.25));   // (1, 1)
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c) CHECK(w[r * 5 + c] == doctest::Approx(w[c * 5 + r]));
  CHECK(hann_window({8, 8, 8}) == std::vector<double>{1.0});

  // A stronger logit near the border loses to a weaker one at the middle.
  Tensor raw({25, 5});
  for (std::size_t i = 0; i < 25; ++i) raw.at(i, kLogit) = -5.0;
  raw.at(6, kLogit) = 4.0;
  raw.at(12, kLogit) = 1.0;
  CHECK(decode(raw, g).token == 6);
  const Prediction p = decode(raw, g, w);
  CHECK(p.token == 12);
  CHECK(p.score == doctest::Approx(ad::sigmoid_value(1.0)));
  CHECK(decode(raw, g, std::vector<double>(25, 1.0)).token == decode(raw, g).token);
  CHECK_THROWS_AS(decode(raw, g, std::vector<double>(24, 1.0)), ShapeError);
}

TEST_CASE("decode is covariant under token permutation") {
  const tok::PatchGeometry g{16, 24, 8};
  Rng rng(71);
  const Tensor raw = mim::test::random_tensor(rng, 6, 5);
  const Prediction p = decode(raw, g);
  // Moving the winning row to another slot moves the box by whole cells only.
  Tensor moved({6, 5}, -10.0);
  for (std::size_t c = 0; c < 5; ++c) moved.at(4, c) = raw.at(p.token, c);
  const Prediction m = decode(moved, g);
  CHECK(m.token == 4);
  const double dx = (1.0 - static_cast<double>(p.token % 3)) * 8.0;
  const double dy = (1.0 - static_cast<double>(p.token / 3)) * 8.0;
  CHECK(m.box.x == doctest::Approx(p.box.x + dx));
  CHECK(m.box.y == doctest::Approx(p.box.y + dy));
  CHECK(m.box.w == p.box.w);
}

TEST_CASE("positive token is the cell holding the box center") {
  const tok::PatchGeometry g{32, 32, 8};
  CHECK(positive_token({0, 0, 4, 4}, g) == 0);
  CHECK(positive_token({9, 17, 4, 4}, g) == 2 * 4 + 1);
  CHECK(positive_token({30, 30, 10, 10}, g) == 15);  // center clamped onto the grid
}

TEST_CASE("loss near its minimum and disjoint boxes") {
  const tok::PatchGeometry g{16, 16, 8};
  const BBox gt = BBox::from_center(12.0, 4.0, 8.0, 4.0);  // token 1
  Tensor raw({4, 5}, -30.0);
  raw.at(1, kLogit) = 30.0;
  // Every token in the 2×2 grid neighbors the positive one and must regress gt.
  for (std::size_t t = 0; t < 4; ++t) {
    raw.at(t, kCx) = offset_for(12.0, t % 2, 8.0);
    raw.at(t, kCy) = offset_for(4.0, t / 2, 8.0);
    raw.at(t, kW) = logit(0.5);
    raw.at(t, kH) = logit(0.25);
  }
  CHECK(raw.at(1, kCx) == doctest::Approx(0.0));
  const LossTerms near = loss(ad::Var::constant(raw), gt, g);
  CHECK(near.total.value().item() < 0.01);
  CHECK(near.iou == doctest::Approx(1.0));

  Tensor raw2({4, 5}, -30.0);
  raw2.at(2, kLogit) = 30.0;
  raw2.at(2, kCx) = logit(0.99);
  raw2.at(2, kCy) = logit(0.99);
  raw2.at(2, kW) = logit(0.01);
  raw2.at(2, kH) = logit(0.01);
  const LossTerms disjoint = loss(ad::Var::constant(raw2), BBox::from_center(2.0, 10.0, 2.0, 2.0), g);
  CHECK(disjoint.iou == 0.0);
  CHECK_THROWS_AS(loss(ad::Var::constant(raw), BBox{0, 0, 0, 1}, g), DomainError);
}

TEST_CASE("regression neighborhood") {
  const tok::PatchGeometry g{32, 32, 8};  // 4×4 grid
  CHECK(regression_tokens(0, g) == std::vector<std::size_t>{0, 1, 4, 5});
  CHECK(regression_tokens(5, g) == std::vector<std::size_t>{0, 1, 2, 4, 5, 6, 8, 9, 10});
  CHECK(regression_tokens(15, g) == std::vector<std::size_t>{10, 11, 14, 15});
  CHECK(regression_tokens(0, {8, 8, 8}) == std::vector<std::size_t>{0});
}

TEST_CASE("every supervised neighbor can reach the target center") {
  const tok::PatchGeometry g{32, 32, 8};
  Rng rng(76);
  for (int trial = 0; trial < 200; ++trial) {
    const BBox gt = BBox::from_center(rng.uniform(0, 32), rng.uniform(0, 32), 6, 6);
    for (std::size_t t : regression_tokens(positive_token(gt, g), g)) {
      const double lo = (static_cast<double>(t % 4) + 0.5 - 0.5 * kOffsetSpan) * 8.0;
      CHECK(gt.cx() > lo);
      CHECK(gt.cx() < lo + kOffsetSpan * 8.0);
    }
  }
}

TEST_CASE("loss: hand one-dimensional offset") {
  // 1×1 grid of side 8; gt (2, 2, 4, 4); prediction shifted right by 2 px.
  const tok::PatchGeometry g{8, 8, 8};
  Tensor raw({1, 5});
  raw.at(0, kLogit) = 0.0;
  raw.at(0, kCx) = logit(7.0 / 12.0);  // cx = 6
  raw.at(0, kCy) = logit(0.5);   // cy = 4
  raw.at(0, kW) = logit(0.5);    // w = 4
  raw.at(0, kH) = logit(0.5);    // h = 4
  const LossTerms t = loss(ad::Var::constant(raw), {2, 2, 4, 4}, g);
  CHECK(t.l1 == doctest::Approx(0.25).epsilon(1e-12));  // |6 − 4| / 8
  CHECK(t.iou == doctest::Approx(8.0 / 24.0).epsilon(1e-12));
  CHECK(t.bce == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(t.total.value().item() ==
        doctest::Approx(5 * 0.25 + 2 * (1 - 1.0 / 3.0) + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("loss is non-negative and its gradients match finite differences") {
  const tok::PatchGeometry g{16, 16, 8};
  Rng rng(72);
  for (int trial = 0; trial < 20; ++trial) {
    const ad::Var raw = ad::Var::parameter(mim::test::random_tensor(rng, 4, 5, 2.0));
    const BBox gt = BBox::from_center(rng.uniform(1, 15), rng.uniform(1, 15), rng.uniform(2, 10),
                                      rng.uniform(2, 10));
    CHECK(loss(raw, gt, g).total.value().item() >= 0.0);
    mim::test::check_grad([&] { return loss(raw, gt, g).total; }, {{"raw", raw}}, 73 + trial, 20);
  }
}

TEST_CASE("head params gradient") {
  Rng rng(74);
  const HeadParams h = HeadParams::init(6, 7, rng);
  nn::ParamList params;
  h.collect("head", params);
  const ad::Var tokens = ad::Var::constant(mim::test::random_tensor(rng, 4, 6));
  const tok::PatchGeometry g{16, 16, 8};
  mim::test::check_grad([&] { return loss(h(tokens), {3, 9, 6, 4}, g).total; }, params, 75);
}

TEST_CASE("track state steps") {
  TrackState s;
  s = step(std::move(s), {1, 2, 3, 4}, 0.9);
  CHECK(s.trajectory.size() == 1);
  s = step(std::move(s), {5, 6, 7, 8}, 0.0);
  CHECK(s.trajectory.size() == 2);
  CHECK(s.trajectory[0] == BBox{1, 2, 3, 4});
  CHECK(s.trajectory[1] == BBox{5, 6, 7, 8});
  CHECK(s.current == BBox{5, 6, 7, 8});
  CHECK(s.scores[1] == 0.0);
}

TEST_CASE("trajectory file round trip") {
  const std::vector<BBox> boxes{{0.1, 2.25, 3.0, 4.5}, {1.0 / 3.0, 7.0, 2.0, 9.125}};
  const auto path = std::filesystem::temp_directory_path() / "mim_head_traj.txt";
  write_trajectory(path, boxes);
  CHECK(read_trajectory(path) == boxes);
  std::filesystem::remove(path);
}
