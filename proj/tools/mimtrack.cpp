#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mim/error.hpp"
#include "mim/harness/bench.hpp"
#include "mim/harness/config.hpp"
#include "mim/harness/dataset_io.hpp"
#include "mim/harness/model.hpp"
#include "mim/harness/parallel.hpp"
#include "mim/harness/svg.hpp"
#include "mim/harness/synth.hpp"
#include "mim/harness/track.hpp"
#include "mim/harness/train.hpp"
#include "mim/kernels/kernels.hpp"
#include "mim/verify.hpp"

namespace fs = std::filesystem;
using namespace mim;
using namespace mim::harness;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

RunConfig base_config(const Globals& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  MIM_CHECK(os, FormatError, "cannot open " + path.string() + " for writing");
  os << text;
  MIM_CHECK(os.good(), FormatError, "failed writing " + path.string());
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

// Sequences under dir: either dir itself or its immediate subdirectories, sorted.
std::vector<SequenceDataset> read_sequences(const fs::path& dir) {
  if (fs::exists(dir / "groundtruth.txt")) return {read_sequence(dir)};
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::exists(e.path() / "groundtruth.txt")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  MIM_CHECK(!dirs.empty(), FormatError, "no sequences found under " + dir.string());
  std::vector<SequenceDataset> out;
  for (const auto& d : dirs) out.push_back(read_sequence(d));
  return out;
}

std::vector<SequenceDataset> held_out(const RunConfig& cfg) {
  // Quantized like anything read back from disk, so in-memory and file runs agree.
  auto set = make_eval_set(cfg.eval_seed, cfg.eval_sequences, cfg.canvas_size, cfg.canvas_size,
                           cfg.eval_frames);
  for (auto& s : set)
    for (auto& f : s.frames) f = quantize(f);
  return set;
}

int cmd_synth(const Globals& g, const std::string& kind, std::size_t count, std::size_t frames) {
  const RunConfig cfg = base_config(g);
  std::vector<SequenceDataset> seqs;
  if (kind == "eval") {
    const std::uint64_t seed = g.seed ? *g.seed : cfg.eval_seed;
    seqs = make_eval_set(seed, count ? count : cfg.eval_sequences, cfg.canvas_size,
                         cfg.canvas_size, frames ? frames : cfg.eval_frames);
  } else {
    const std::uint64_t seed = g.seed ? *g.seed : cfg.pool_seed;
    seqs = make_pool(seed, count ? count : cfg.pool_size, cfg.canvas_size, cfg.canvas_size,
                     frames ? frames : cfg.pool_frames, SceneMix{});
  }
  for (const auto& s : seqs) write_sequence(fs::path(g.out) / s.name, s);
  std::cout << "wrote " << seqs.size() << " sequences to " << g.out << "\n";
  return 0;
}

int cmd_train(const Globals& g, const std::string& variant, const std::string& data) {
  const RunConfig cfg = with_variant(base_config(g), variant);
  std::vector<SequenceDataset> pool;
  if (data.empty()) {
    pool = make_pool(cfg.pool_seed, cfg.pool_size, cfg.canvas_size, cfg.canvas_size,
                     cfg.pool_frames, SceneMix{});
    for (auto& s : pool)
      for (auto& f : s.frames) f = quantize(f);
  } else {
    pool = read_sequences(data);
  }
  TrackingModel m = TrackingModel::init(cfg, cfg.seed);
  fs::create_directories(g.out);
  std::ofstream log(fs::path(g.out) / "train_log.csv", std::ios::trunc);
  log << "step,loss,lr\n";
  const TrainReport rep = train(m, pool, [&](std::size_t step, double loss, double lr) {
    log << step << ',' << fmt(loss) << ',' << fmt(lr) << '\n';
    if ((step + 1) % 100 == 0) std::cerr << "step " << step + 1 << " loss " << loss << "\n";
  });
  save_model(g.out, m);
  json summary = {{"variant", variant},
                  {"steps", cfg.steps},
                  {"parameters", nn::parameter_count(m.params())},
                  {"probe_loss_before", rep.probe_loss_before},
                  {"probe_loss_after", rep.probe_loss_after},
                  {"checksum", rep.checksum}};
  write_text(fs::path(g.out) / "train_report.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

void write_track_outputs(const fs::path& dir, const TrackResult& r, const std::string& title) {
  fs::create_directories(dir);
  head::write_trajectory(dir / "trajectory.txt", r.state.trajectory);
  write_text(dir / "metrics.csv", metrics_csv(r.report));
  write_text(dir / "curves.svg", curves_svg(r.report, title));
  std::ostringstream t;
  t << "frame,ms,memory_size\n";
  for (std::size_t i = 0; i < r.frame_ms.size(); ++i)
    t << i << ',' << fmt(r.frame_ms[i]) << ',' << r.memory_size[i] << '\n';
  write_text(dir / "timing.csv", t.str());
}

json report_json(const MetricReport& r) {
  return {{"frames", r.frames},         {"mean_iou", r.mean_iou},
          {"precision_at_20", r.precision_at_20}, {"success_auc", r.success_auc},
          {"precision_auc", r.precision_auc},     {"mean_center_error", r.mean_center_error}};
}

int cmd_track(const Globals& g, const std::string& model_dir, const std::string& sequence,
              const std::string& memory, const std::string& save_memory) {
  const TrackingModel m = load_model(model_dir);
  const SequenceDataset seq = read_sequence(sequence);
  std::optional<rat::MemoryCorpus> initial;
  if (!memory.empty()) initial = rat::MemoryCorpus::load(memory, m.config.memory_capacity);
  const TrackResult r = track(m, seq, initial);
  write_track_outputs(g.out, r, seq.name.empty() ? "sequence" : seq.name);
  if (!save_memory.empty()) r.memory.save(save_memory);
  std::cout << report_json(r.report).dump(2) << "\n";
  return 0;
}

int cmd_eval(const Globals& g, const std::string& model_dir, const std::string& data) {
  const TrackingModel m = load_model(model_dir);
  const auto seqs = data.empty() ? held_out(m.config) : read_sequences(data);
  std::vector<TrackResult> results(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) { results[i] = track(m, seqs[i]); });

  std::vector<BBox> traj, gt;
  std::ostringstream per;
  per << "sequence,mean_iou,precision_at_20,success_auc\n";
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto& r = results[i];
    per << seqs[i].name << ',' << fmt(r.report.mean_iou) << ',' << fmt(r.report.precision_at_20)
        << ',' << fmt(r.report.success_auc) << '\n';
    traj.insert(traj.end(), r.state.trajectory.begin() + 1, r.state.trajectory.end());
    gt.insert(gt.end(), seqs[i].gt.begin() + 1, seqs[i].gt.end());
    write_track_outputs(fs::path(g.out) / seqs[i].name, r, seqs[i].name);
  }
  const MetricReport overall = evaluate(traj, gt);
  write_text(fs::path(g.out) / "sequences.csv", per.str());
  write_text(fs::path(g.out) / "metrics.csv", metrics_csv(overall));
  write_text(fs::path(g.out) / "curves.svg", curves_svg(overall, "all sequences"));
  const json summary = report_json(overall);
  write_text(fs::path(g.out) / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_bench(const Globals& g, const std::vector<std::size_t>& lengths, std::size_t runs) {
  BenchOptions opt;
  opt.runs = runs;
  if (g.seed) opt.seed = *g.seed;
  const std::string csv = bench_csv(bench_scan(lengths, opt));
  fs::create_directories(g.out);
  write_text(fs::path(g.out) / "bench.csv", csv);
  std::cout << "kernels: " << kernels::isa_name(kernels::active_isa()) << "\n" << csv;
  return 0;
}

int cmd_verify(const Globals& g) {
  const fs::path scratch = fs::path(g.out) / "verify_scratch";
  fs::create_directories(scratch);
  const auto results = verify::run_all(scratch);
  const std::string summary = verify::summary_json(results);
  write_text(fs::path(g.out) / "verify.json", summary + "\n");
  std::cout << summary << "\n";
  for (const auto& r : results)
    if (!r.passed) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mamba-in-Mamba tracker: synthetic data, training, tracking and verification"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Override the seed");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  std::string kind = "pool";
  std::size_t count = 0, frames = 0;
  auto* synth = app.add_subcommand("synth", "Write synthetic sequences as PPM frames");
  synth->add_option("--kind", kind, "pool or eval")->check(CLI::IsMember({"pool", "eval"}));
  synth->add_option("--count", count, "Number of sequences (default from config)");
  synth->add_option("--frames", frames, "Frames per sequence (default from config)");

  std::string variant = "full", data;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write model.ckpt");
  train_cmd->add_option("--variant", variant, "full, no_temporal, no_retrieval or no_both")
      ->check(CLI::IsMember({"full", "no_temporal", "no_retrieval", "no_both"}));
  train_cmd->add_option("--data", data, "Sequence directory (default: generated pool)");

  std::string model_dir, sequence, memory, save_memory;
  auto* track_cmd = app.add_subcommand("track", "Track one sequence");
  track_cmd->add_option("--model", model_dir, "Directory with model.ckpt and config.json")
      ->required();
  track_cmd->add_option("--sequence", sequence, "Sequence directory")->required();
  track_cmd->add_option("--memory", memory, "Initial memory corpus file");
  track_cmd->add_option("--save-memory", save_memory, "Write the final corpus here");

  auto* eval_cmd = app.add_subcommand("eval", "Track every sequence of a set and aggregate");
  eval_cmd->add_option("--model", model_dir, "Directory with model.ckpt and config.json")
      ->required();
  eval_cmd->add_option("--data", data, "Sequence directory (default: generated held-out set)");

  std::vector<std::size_t> lengths{4096, 8192, 16384, 32768};
  std::size_t runs = 7;
  auto* bench = app.add_subcommand("bench", "Time the selective scan at increasing lengths");
  bench->add_option("--lengths", lengths, "Ascending sequence lengths")->delimiter(',');
  bench->add_option("--runs", runs, "Timed runs per length")->check(CLI::Range(5, 1000));

  auto* verify_cmd = app.add_subcommand("verify", "Run every oracle suite");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count()) g.seed = seed;

  try {
    if (*synth) return cmd_synth(g, kind, count, frames);
    if (*train_cmd) return cmd_train(g, variant, data);
    if (*track_cmd) return cmd_track(g, model_dir, sequence, memory, save_memory);
    if (*eval_cmd) return cmd_eval(g, model_dir, data);
    if (*bench) return cmd_bench(g, lengths, runs);
    if (*verify_cmd) return cmd_verify(g);
  } catch (const mim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
