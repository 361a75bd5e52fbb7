#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <cstdlib>
#include <filesystem>

#include "mim/checkpoint.hpp"
#include "mim/error.hpp"
#include "mim/harness/bench.hpp"
#include "mim/harness/config.hpp"
#include "mim/harness/dataset_io.hpp"
#include "mim/harness/metrics.hpp"
#include "mim/harness/model.hpp"
#include "mim/harness/parallel.hpp"
#include "mim/harness/svg.hpp"
#include "mim/harness/synth.hpp"
#include "mim/harness/track.hpp"
#include "mim/harness/train.hpp"

using namespace mim;
using namespace mim::harness;
namespace fs = std::filesystem;

namespace {

SyntheticScene simple_scene(Motion motion, double vx) {
  SyntheticScene s;
  s.seed = 5;
  s.width = s.height = 48;
  s.frames = 10;
  s.target.start = {10, 12, 8, 6};
  s.target.vx = vx;
  s.target.motion = motion;
  return s;
}

RunConfig tiny_run() {
  RunConfig c;
  c.frame_size = 16;
  c.canvas_size = 32;
  c.patch = 8;
  c.dim = 8;
  c.state = 4;
  c.depth = 1;
  c.window = 2;
  c.stride = 1;
  c.head_hidden = 8;
  c.crop_size = 16;
  c.light_patch = 8;
  c.light_width = 8;
  c.embed_dim = 8;
  c.steps = 3;
  c.batch = 2;
  c.warmup = 1;
  c.pool_size = 3;
  c.pool_frames = 5;
  c.eval_sequences = 2;
  c.eval_frames = 5;
  return c;
}

std::vector<SequenceDataset> tiny_pool(const RunConfig& c) {
  return make_pool(c.pool_seed, c.pool_size, c.canvas_size, c.canvas_size, c.pool_frames,
                   SceneMix{});
}

}  // namespace

TEST_CASE("generator examples") {
  const SequenceDataset still = generate(simple_scene(Motion::kStatic, 0.0));
  CHECK(still.size() == 10);
  for (const auto& b : still.gt) CHECK(b == still.gt[0]);

  const SequenceDataset moving = generate(simple_scene(Motion::kLinear, 2.0));
  for (std::size_t t = 1; t < moving.size(); ++t) CHECK(moving.gt[t].x - moving.gt[t - 1].x == 2.0);

  const SequenceDataset again = generate(simple_scene(Motion::kLinear, 2.0));
  CHECK(again.frames == moving.frames);
  CHECK(again.gt == moving.gt);

  SyntheticScene gone = simple_scene(Motion::kLinear, 10.0);
  CHECK_THROWS_AS(generate(gone), DomainError);
}

TEST_CASE("pools and evaluation sets are deterministic") {
  const auto a = make_pool(77, 3, 48, 48, 6, SceneMix{});
  const auto b = make_pool(77, 3, 48, 48, 6, SceneMix{});
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].frames == b[i].frames);
  const auto e = make_eval_set(88, 4, 48, 48, 6);
  CHECK(e.size() == 4);
  for (const auto& s : e) CHECK(s.gt.size() == s.frames.size());
}

TEST_CASE("iou examples") {
  const BBox a{0, 0, 2, 2};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {5, 5, 1, 1}) == 0.0);
  CHECK(iou(a, {1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou({1, 1, 2, 2}, a) == iou(a, {1, 1, 2, 2}));
}

TEST_CASE("perfect trajectory report") {
  const std::vector<BBox> gt{{1, 2, 3, 4}, {2, 3, 4, 5}, {3, 4, 5, 6}};
  const MetricReport r = evaluate(gt, gt);
  for (double p : r.precision) CHECK(p == 1.0);
  for (std::size_t i = 0; i < 100; ++i) CHECK(r.success[i] == 1.0);
  CHECK(r.success[100] == 0.0);  // IoU 1 is not > 1
  CHECK(r.success_auc == doctest::Approx(0.995).epsilon(1e-12));
  CHECK(r.precision_at_20 == 1.0);
  CHECK_THROWS_AS(evaluate(gt, {gt[0]}), DomainError);
}

TEST_CASE("five-frame hand table") {
  const verify::HandTable h = verify::five_frame_table();
  const MetricReport r = evaluate(h.traj, h.gt);
  CHECK(r.precision == h.precision);
  CHECK(r.success == h.success);
  CHECK(r.success_auc == h.success_auc);
  CHECK(r.success_auc == doctest::Approx(0.496).epsilon(1e-15));
}

TEST_CASE("curves are monotone and AUCs lie in [0, 1] on random trajectories") {
  Rng rng(81);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<BBox> traj, gt;
    const std::size_t n = 1 + rng.index(30);
    for (std::size_t i = 0; i < n; ++i) {
      gt.push_back({rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 20), rng.uniform(1, 20)});
      traj.push_back({gt.back().x + rng.normal(0, 5), gt.back().y + rng.normal(0, 5),
                      rng.uniform(1, 20), rng.uniform(1, 20)});
    }
    const MetricReport r = evaluate(traj, gt);
    REQUIRE(r.precision.size() == 51);
    REQUIRE(r.success.size() == 101);
    for (std::size_t i = 1; i < r.precision.size(); ++i) CHECK(r.precision[i] >= r.precision[i - 1]);
    for (std::size_t i = 1; i < r.success.size(); ++i) CHECK(r.success[i] <= r.success[i - 1]);
    CHECK(r.success_auc >= 0.0);
    CHECK(r.success_auc <= 1.0);
    CHECK(r.precision_auc >= 0.0);
    CHECK(r.precision_auc <= 1.0);
  }
}

TEST_CASE("csv and svg output") {
  const verify::HandTable h = verify::five_frame_table();
  const MetricReport r = evaluate(h.traj, h.gt);
  const std::string csv = metrics_csv(r);
  CHECK(csv.rfind("threshold_px,precision,threshold_iou,success\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 102);
  const std::string svg = curves_svg(r, "toy");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("config parsing and validation") {
  const RunConfig d;
  const RunConfig back = parse_config(dump_config(d));
  CHECK(dump_config(back) == dump_config(d));

  const RunConfig c = parse_config(R"({"dim": 24, "fusion": "cosine_decay", "injection": "additive"})");
  CHECK(c.dim == 24);
  CHECK(c.fusion == rat::Fusion::kCosineDecay);
  CHECK(c.injection == enc::Injection::kAdditive);

  CHECK_THROWS_AS(parse_config(R"({"dimm": 24})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"dim": -3})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"fusion": "median"})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"dim": "wide"})"), Error);
  CHECK_THROWS_AS(parse_config("{not json"), Error);
  CHECK_THROWS_AS(parse_config(R"({"frame_size": 60, "patch": 8})"), DomainError);
  CHECK_THROWS_AS(parse_config(R"({"tau": 1.5})"), DomainError);

  CHECK_THROWS_AS(parse_config(R"({"ablation_axes": true})"), DomainError);  // patch 8 is off-axis
  RunConfig p = full_size_config();
  p.ablation_axes = true;
  CHECK_THROWS_AS(p.validate(), DomainError);  // patch 16 is off-axis too
  p.frame_size = 144;
  p.patch = 48;
  p.validate();
  p.top_k = 4;
  CHECK_THROWS_AS(p.validate(), DomainError);

  CHECK(parse_config(R"({"score_window": false})").score_window == false);
  CHECK(with_variant(d, "no_both").temporal == false);
  CHECK(with_variant(d, "no_both").retrieval == false);
  CHECK(with_variant(d, "no_temporal").retrieval == true);
  CHECK_THROWS_AS(with_variant(d, "neither"), DomainError);
}

TEST_CASE("sequence files round trip up to 8-bit quantization") {
  const SequenceDataset s = generate(simple_scene(Motion::kLinear, 1.5));
  const fs::path dir = fs::temp_directory_path() / "mim_harness_seq";
  fs::remove_all(dir);
  write_sequence(dir, s);
  const SequenceDataset back = read_sequence(dir);
  REQUIRE(back.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(back.frames[i] == quantize(s.frames[i]));
  CHECK(back.gt == s.gt);
  fs::remove(dir / "groundtruth.txt");
  CHECK_THROWS_AS(read_sequence(dir), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("window indices") {
  CHECK(window_indices(10, 4, 2) == std::vector<std::size_t>{4, 6, 8, 10});
  CHECK(window_indices(3, 4, 2) == std::vector<std::size_t>{0, 0, 1, 3});
  CHECK(window_indices(0, 2, 1) == std::vector<std::size_t>{0, 0});
}

TEST_CASE("search region mapping round trips") {
  const RunConfig cfg = tiny_run();
  const TrackingModel m = TrackingModel::init(cfg, 1);
  const BBox box{5, 7, 4, 2};
  const SearchRegion r = search_region(m, box);
  CHECK(r.side == doctest::Approx(std::max(cfg.search_factor * 4.0, kMinSearchSide)));
  CHECK(r.x + 0.5 * r.side == doctest::Approx(box.cx()));
  const BBox local = to_region(box, r, cfg.frame_size);
  const BBox back = from_region(local, r, cfg.frame_size);
  CHECK(back.x == doctest::Approx(box.x));
  CHECK(back.y == doctest::Approx(box.y));
  CHECK(back.w == doctest::Approx(box.w));
  CHECK(back.h == doctest::Approx(box.h));
  CHECK(local.cx() == doctest::Approx(0.5 * cfg.frame_size));
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hit(100, 0);
  parallel_for(hit.size(), [&](std::size_t i) { hit[i] += 1; }, 4);
  for (int h : hit) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 7) throw DomainError("boom");
                  }, 3),
                  DomainError);
}

TEST_CASE("training: zero steps, determinism and worker independence") {
  RunConfig cfg = tiny_run();
  const auto pool = tiny_pool(cfg);

  RunConfig zero = cfg;
  zero.steps = 0;
  TrackingModel m0 = TrackingModel::init(zero, 3);
  const auto init = checkpoint::snapshot(m0.params());
  train(m0, pool);
  CHECK(checkpoint::snapshot(m0.params()) == init);

  TrackingModel a = TrackingModel::init(cfg, 3), b = TrackingModel::init(cfg, 3);
  const TrainReport ra = train(a, pool);
  ::setenv("MIM_THREADS", "3", 1);
  const TrainReport rb = train(b, pool);
  ::unsetenv("MIM_THREADS");
  CHECK(ra.checksum == rb.checksum);
  CHECK(ra.step_loss == rb.step_loss);
  CHECK(ra.step_loss.size() == 3);
  CHECK(ra.checksum != nn::checksum(TrackingModel::init(cfg, 3).params()));
}

TEST_CASE("model save and load") {
  const RunConfig cfg = tiny_run();
  const TrackingModel m = TrackingModel::init(cfg, 4);
  const fs::path dir = fs::temp_directory_path() / "mim_harness_model";
  save_model(dir, m);
  const TrackingModel back = load_model(dir);
  CHECK(nn::checksum(back.params()) == nn::checksum(m.params()));
  CHECK(dump_config(back.config) == dump_config(m.config));
  fs::remove_all(dir);
}

TEST_CASE("tracking outputs and ablation invariance to memory") {
  RunConfig cfg = with_variant(tiny_run(), "no_both");
  const auto evals = make_eval_set(cfg.eval_seed, 1, cfg.canvas_size, cfg.canvas_size, 6);
  const TrackingModel m = TrackingModel::init(cfg, 5);
  const TrackResult plain = track(m, evals[0]);
  CHECK(plain.state.trajectory.size() == 6);
  CHECK(plain.frame_ms.size() == 6);
  CHECK(plain.state.trajectory[0] == evals[0].gt[0]);
  CHECK(plain.report.frames == 5);

  rat::MemoryCorpus junk(cfg.tau, cfg.embed_dim, cfg.memory_capacity);
  Rng rng(6);
  for (int i = 0; i < 5; ++i) {
    std::vector<double> e(cfg.embed_dim);
    for (auto& v : e) v = rng.normal();
    junk.maybe_insert(e);
  }
  const TrackResult seeded = track(m, evals[0], junk);
  CHECK(seeded.state.trajectory == plain.state.trajectory);

  const RunConfig full = with_variant(tiny_run(), "full");
  const TrackingModel mf = TrackingModel::init(full, 5);
  const TrackResult rf = track(mf, evals[0]);
  CHECK(rf.memory_size.front() == 1);
  for (std::size_t i = 1; i < rf.memory_size.size(); ++i)
    CHECK(rf.memory_size[i] >= std::min<std::size_t>(rf.memory_size[i - 1], full.memory_capacity));
  const TrackResult again = track(mf, evals[0]);
  CHECK(again.state.trajectory == rf.state.trajectory);
  CHECK(again.memory == rf.memory);

  const SequenceDataset wrong = make_eval_set(1, 1, 40, 40, 4)[0];
  CHECK_THROWS_AS(track(mf, wrong), ShapeError);
}

TEST_CASE("bench output shape") {
  BenchOptions opt;
  opt.dim = 4;
  opt.state = 4;
  opt.runs = 5;
  const auto one = bench_scan({64}, opt);
  REQUIRE(one.size() == 1);
  CHECK(one[0].ratio == 0.0);
  const std::string csv = bench_csv(one);
  CHECK(csv.rfind("length,median_ns,cv,ratio\n", 0) == 0);
  CHECK(csv.find("64,") != std::string::npos);
  const auto two = bench_scan({64, 128}, opt);
  CHECK(two[1].ratio > 0.0);
  CHECK_THROWS_AS(bench_scan({128, 64}, opt), DomainError);
}
