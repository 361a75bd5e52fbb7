#pragma once

#include <optional>
#include <vector>

#include "mim/harness/metrics.hpp"
#include "mim/harness/model.hpp"
#include "mim/harness/synth.hpp"

namespace mim::harness {

struct TrackResult {
  head::TrackState state;            // frame 0 holds the given initial box
  std::vector<double> frame_ms;      // wall time per processed frame (frame 0 included)
  std::vector<std::size_t> memory_size;  // corpus size after each frame
  rat::MemoryCorpus memory;
  MetricReport report;               // over frames 1..n-1
};

// Runs the tracker over seq starting from its first ground-truth box. When
// initial_memory is given it replaces the freshly seeded corpus.
TrackResult track(const TrackingModel& m, const SequenceDataset& seq,
                  const std::optional<rat::MemoryCorpus>& initial_memory = std::nullopt);

// Metrics over frames 1..n-1 (the first frame is given, not predicted).
MetricReport evaluate_tracking(const std::vector<BBox>& traj, const std::vector<BBox>& gt);

}  // namespace mim::harness
