#include "mim/harness/track.hpp"

#include <algorithm>
#include <chrono>

#include "mim/error.hpp"

namespace mim::harness {

MetricReport evaluate_tracking(const std::vector<BBox>& traj, const std::vector<BBox>& gt) {
  MIM_CHECK(traj.size() == gt.size() && traj.size() >= 2, DomainError,
            "evaluate_tracking: need matching trajectories of at least two frames");
  return evaluate({traj.begin() + 1, traj.end()}, {gt.begin() + 1, gt.end()});
}

namespace {

// Intersection with the canvas; a box fully outside collapses onto the nearest edge.
BBox clamp_to(const BBox& b, const BBox& canvas) {
  const double x0 = std::clamp(b.x, canvas.x, canvas.x + canvas.w - 1.0);
  const double y0 = std::clamp(b.y, canvas.y, canvas.y + canvas.h - 1.0);
  const double x1 = std::clamp(b.x + b.w, x0 + 1.0, canvas.x + canvas.w);
  const double y1 = std::clamp(b.y + b.h, y0 + 1.0, canvas.y + canvas.h);
  return {x0, y0, x1 - x0, y1 - y0};
}

}  // namespace

TrackResult track(const TrackingModel& m, const SequenceDataset& seq,
                  const std::optional<rat::MemoryCorpus>& initial_memory) {
  using clock = std::chrono::steady_clock;
  const RunConfig& cfg = m.config;
  MIM_CHECK(seq.size() >= 2 && seq.gt.size() == seq.size(), DomainError,
            "track: sequence needs at least two frames and a ground-truth box per frame");
  for (const auto& f : seq.frames)
    MIM_CHECK(f.channels == 3 && f.height == cfg.canvas_size && f.width == cfg.canvas_size,
              ShapeError, "track: frames must be 3x" + std::to_string(cfg.canvas_size) + "x" +
                              std::to_string(cfg.canvas_size));
  ad::NoGradGuard no_grad;
  const double W = static_cast<double>(cfg.canvas_size);
  const BBox canvas{0.0, 0.0, W, W};

  TrackResult r{{}, {}, {}, rat::MemoryCorpus(cfg.tau, cfg.embed_dim, cfg.memory_capacity), {}};
  auto t0 = clock::now();
  const Frame templ = make_template(m, seq.frames[0], seq.gt[0]);
  Tensor cold;
  if (cfg.retrieval) {
    cold = rat::make_query(m.light, seq.frames[0], seq.gt[0], cfg.crop_factor).embedding;
    if (initial_memory) {
      r.memory = *initial_memory;
    } else {
      r.memory.maybe_insert(cold.values());
    }
  } else if (initial_memory) {
    r.memory = *initial_memory;
  }
  const std::vector<double> window_weights =
      cfg.score_window ? head::hann_window(m.geometry()) : std::vector<double>{};
  r.state = head::step(std::move(r.state), seq.gt[0], 1.0);
  r.frame_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
  r.memory_size.push_back(r.memory.size());

  for (std::size_t f = 1; f < seq.size(); ++f) {
    t0 = clock::now();
    BBox prev = r.state.current;
    if (intersection_area(prev, canvas) <= 0.0 || !prev.valid()) prev = seq.gt[0];
    const SearchRegion region = search_region(m, prev);
    std::vector<const Frame*> window;
    for (std::size_t i : window_indices(f, cfg.window, cfg.stride)) window.push_back(&seq.frames[i]);
    const std::vector<Frame> frames = search_frames(m, window, region);
    std::optional<Var> query;
    Tensor e_q;
    if (cfg.retrieval) {
      e_q = rat::make_query(m.light, seq.frames[f], prev, cfg.crop_factor).embedding;
      query = augmented_query(m, r.memory, e_q.values(), cold);
    }
    const Tensor raw = head_output(m, templ, frames, query).value();
    head::Prediction pred = cfg.score_window ? head::decode(raw, m.geometry(), window_weights)
                                             : head::decode(raw, m.geometry());
    pred.box = clamp_to(from_region(pred.box, region, cfg.frame_size), canvas);
    if (cfg.retrieval) r.memory.maybe_insert(e_q.values());
    r.state = head::step(std::move(r.state), pred.box, pred.score);
    r.frame_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
    r.memory_size.push_back(r.memory.size());
  }
  r.report = evaluate_tracking(r.state.trajectory, seq.gt);
  return r;
}

}  // namespace mim::harness
