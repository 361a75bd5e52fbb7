#include "mim/harness/train.hpp"

#include <cmath>
#include <sstream>

#include "mim/error.hpp"
#include "mim/harness/parallel.hpp"
#include "mim/ops.hpp"
#include "mim/optim.hpp"

namespace mim::harness {
namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // splitmix64 finalizer over a simple combination.
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull ^ (b + 0x632BE59BD9B4E019ull) * 0xBF58476D1CE4E5B9ull ^
                    (c + 0x94D049BB133111EBull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

TrainSample draw_sample(const std::vector<PreparedSequence>& pool, Rng& rng) {
  TrainSample s;
  s.sequence = rng.index(pool.size());
  s.target = 1 + rng.index(pool[s.sequence].data->size() - 1);
  return s;
}

}  // namespace

std::vector<PreparedSequence> prepare(const TrackingModel& m,
                                      const std::vector<SequenceDataset>& pool) {
  std::vector<PreparedSequence> out;
  out.reserve(pool.size());
  for (const auto& seq : pool) {
    MIM_CHECK(seq.size() >= 2 && seq.gt.size() == seq.size(), DomainError,
              "training sequences need at least two annotated frames");
    out.push_back({&seq, make_template(m, seq.frames[0], seq.gt[0])});
  }
  return out;
}

BBox jitter_box(const BBox& box, double shift, double scale, double width, double height,
                Rng& rng) {
  const double w = box.w * (1.0 + rng.uniform(-scale, scale));
  const double h = box.h * (1.0 + rng.uniform(-scale, scale));
  double cx = box.cx() + shift * box.w * rng.uniform(-1.0, 1.0);
  double cy = box.cy() + shift * box.h * rng.uniform(-1.0, 1.0);
  cx = std::clamp(cx, 0.5, width - 0.5);
  cy = std::clamp(cy, 0.5, height - 0.5);
  return BBox::from_center(cx, cy, w, h);
}

head::LossTerms sample_loss(const TrackingModel& m, const PreparedSequence& seq,
                            std::size_t target, Rng& rng) {
  const RunConfig& cfg = m.config;
  const SequenceDataset& data = *seq.data;
  const double W = static_cast<double>(cfg.canvas_size);
  // The previous box, perturbed, stands in for the tracker's last estimate.
  const BBox prev = jitter_box(data.gt[target - 1], cfg.aug_shift, cfg.aug_scale, W, W, rng);
  const SearchRegion region = search_region(m, prev);
  std::vector<const Frame*> window;
  for (std::size_t i : window_indices(target, cfg.window, cfg.stride))
    window.push_back(&data.frames[i]);
  const std::vector<Frame> frames = search_frames(m, window, region);

  std::optional<Var> query;
  if (cfg.retrieval) {
    auto encode = [&](std::size_t frame, const BBox& box) {
      return m.light.encode(rat::crop_and_resize(data.frames[frame], box, cfg.crop_factor,
                                                 cfg.crop_size).image);
    };
    const Var cold = encode(0, data.gt[0]);
    rat::MemoryCorpus corpus(cfg.tau, cfg.embed_dim, cfg.memory_capacity);
    std::vector<Var> entries;
    if (corpus.maybe_insert(cold.value().values())) entries.push_back(cold);
    // Earlier frames stand in for the crops a tracker would have inserted.
    const std::size_t n_mem = std::min(cfg.memory_crops, target - 1);
    for (std::size_t k = 0; k < n_mem; ++k) {
      const std::size_t j = k == 0 ? target - 1 : 1 + rng.index(target - 1);
      const Var e = encode(j, jitter_box(data.gt[j], cfg.aug_shift, cfg.aug_scale, W, W, rng));
      if (corpus.maybe_insert(e.value().values())) entries.push_back(e);
    }
    Tensor e_q;
    {
      ad::NoGradGuard no_grad;
      e_q = encode(target, prev).value();
    }
    const auto picked = rat::select_for_fusion(corpus, e_q.values(), cfg.top_k, cfg.fusion);
    std::vector<Var> features;
    std::vector<double> sims;
    for (const auto& r : picked) {
      features.push_back(entries[r.index]);
      sims.push_back(r.similarity);
    }
    query = augmented_query(m, features, sims, cold);
  }
  const Var raw = head_output(m, seq.templ, frames, query);
  return head::loss(raw, to_region(data.gt[target], region, cfg.frame_size), m.geometry());
}

double probe_loss(const TrackingModel& m, const std::vector<PreparedSequence>& pool,
                  std::uint64_t seed, std::size_t count) {
  ad::NoGradGuard no_grad;
  std::vector<double> losses(count);
  parallel_for(count, [&](std::size_t i) {
    Rng rng(mix_seed(seed, 0xFFFF, i));
    const TrainSample s = draw_sample(pool, rng);
    losses[i] = sample_loss(m, pool[s.sequence], s.target, rng).total.value().item();
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(count);
}

TrainReport train(TrackingModel& m, const std::vector<SequenceDataset>& pool,
                  const StepCallback& on_step) {
  const RunConfig& cfg = m.config;
  MIM_CHECK(!pool.empty(), DomainError, "train: empty dataset pool");
  const auto prepared = prepare(m, pool);
  const nn::ParamList params = m.params();
  optim::AdamWConfig oc;
  oc.weight_decay = cfg.weight_decay;
  oc.grad_clip = cfg.grad_clip;
  optim::AdamW opt(params, oc);

  TrainReport report;
  report.probe_loss_before = probe_loss(m, prepared, cfg.seed);
  std::vector<std::vector<Tensor>> grads(cfg.batch);
  std::vector<double> losses(cfg.batch);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    try {
      parallel_for(cfg.batch, [&](std::size_t b) {
        Rng rng(mix_seed(cfg.seed, step, b));
        const TrainSample s = draw_sample(prepared, rng);
        const head::LossTerms terms = sample_loss(m, prepared[s.sequence], s.target, rng);
        const ad::Gradients g = ad::backward(terms.total);
        grads[b].clear();
        for (const auto& p : params) grads[b].push_back(g.of(p.second));
        losses[b] = terms.total.value().item();
      });
    } catch (const NumericError& e) {
      std::ostringstream os;
      os << "training diverged at step " << step << ": " << e.what();
      throw NumericError(os.str());
    }
    std::vector<Tensor> total = grads[0];
    double loss = losses[0];
    for (std::size_t b = 1; b < cfg.batch; ++b) {
      loss += losses[b];
      for (std::size_t i = 0; i < total.size(); ++i) {
        auto dst = total[i].values();
        const auto src = grads[b][i].values();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
    }
    const double inv = 1.0 / static_cast<double>(cfg.batch);
    for (auto& t : total)
      for (auto& v : t.values()) v *= inv;
    loss *= inv;
    MIM_CHECK(std::isfinite(loss), NumericError,
              "training diverged at step " + std::to_string(step) + ": non-finite loss");
    const double lr = optim::warmup_cosine(step, cfg.warmup, cfg.steps, cfg.lr);
    opt.step(total, lr);
    report.step_loss.push_back(loss);
    if (on_step) on_step(step, loss, lr);
  }
  report.probe_loss_after = probe_loss(m, prepared, cfg.seed);
  report.checksum = nn::checksum(params);
  return report;
}

}  // namespace mim::harness
