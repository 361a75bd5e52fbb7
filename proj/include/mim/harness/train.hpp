#pragma once

#include <functional>
#include <vector>

#include "mim/harness/model.hpp"
#include "mim/harness/synth.hpp"

namespace mim::harness {

// One supervised example: predict frame `target` of pool[sequence].
struct TrainSample {
  std::size_t sequence = 0;
  std::size_t target = 1;
};

// Precomputed per-sequence inputs that do not depend on parameters.
struct PreparedSequence {
  const SequenceDataset* data = nullptr;
  Frame templ;
};

std::vector<PreparedSequence> prepare(const TrackingModel& m,
                                      const std::vector<SequenceDataset>& pool);

// Randomly shifted and rescaled copy of box, kept overlapping the canvas.
BBox jitter_box(const BBox& box, double shift, double scale, double width, double height, Rng& rng);

// Loss graph for one example. rng drives the box augmentation and memory sampling.
head::LossTerms sample_loss(const TrackingModel& m, const PreparedSequence& seq,
                            std::size_t target, Rng& rng);

struct TrainReport {
  std::vector<double> step_loss;  // batch-mean loss before each update
  double probe_loss_before = 0.0;
  double probe_loss_after = 0.0;
  std::uint64_t checksum = 0;
};

using StepCallback = std::function<void(std::size_t step, double loss, double lr)>;

// AdamW with linear warm-up then cosine decay. Deterministic for a fixed
// config regardless of worker count. Throws NumericError naming the step when
// the loss turns non-finite.
TrainReport train(TrackingModel& m, const std::vector<SequenceDataset>& pool,
                  const StepCallback& on_step = {});

// Mean loss over a fixed, seed-determined probe set of examples.
double probe_loss(const TrackingModel& m, const std::vector<PreparedSequence>& pool,
                  std::uint64_t seed, std::size_t count = 32);

}  // namespace mim::harness
