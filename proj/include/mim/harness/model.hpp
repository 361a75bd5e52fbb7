#pragma once

// The full tracker: patch embedding, MiM encoder, light crop encoder with its
// fusion MLP, and the box head, plus the glue that turns frames and a memory
// corpus into head outputs.

#include <filesystem>
#include <optional>
#include <vector>

#include "mim/harness/config.hpp"
#include "mim/mim_encoder.hpp"
#include "mim/rat_memory.hpp"
#include "mim/tokenizer.hpp"
#include "mim/track_head.hpp"

namespace mim::harness {

using ad::Var;

struct TrackingModel {
  RunConfig config;
  nn::Linear patch_proj;
  tok::PositionEmbeddings embeddings;
  enc::EncoderStack encoder;
  rat::LightEncoder light;
  nn::Mlp fusion_mlp;  // embed_dim → 2·dim → dim
  head::HeadParams head;

  static TrackingModel init(const RunConfig& cfg, std::uint64_t seed);
  nn::ParamList params() const;
  tok::PatchGeometry geometry() const;
};

// model.ckpt plus config.json in dir; load rebuilds the model from both.
void save_model(const std::filesystem::path& dir, const TrackingModel& m);
TrackingModel load_model(const std::filesystem::path& dir);

// Frame indices feeding the prediction for `target`: window members spaced
// by stride, oldest first, clamped at frame 0; the last entry is `target`.
std::vector<std::size_t> window_indices(std::size_t target, std::size_t window, std::size_t stride);

// Square search window in canvas pixels, shared by every frame of a window.
struct SearchRegion {
  double x = 0.0, y = 0.0, side = 1.0;
};

// Window of side search_factor·max(w, h) (at least kMinSearchSide) centered on box.
inline constexpr double kMinSearchSide = 16.0;
SearchRegion search_region(const TrackingModel& m, const BBox& box);

// Canvas box → model-input coordinates of the region, and back.
BBox to_region(const BBox& box, const SearchRegion& r, std::size_t size);
BBox from_region(const BBox& box, const SearchRegion& r, std::size_t size);

// The region cut out of each frame and resampled to frame_size.
std::vector<Frame> search_frames(const TrackingModel& m, const std::vector<const Frame*>& frames,
                                 const SearchRegion& r);

// Target-centered context crop of the first frame, resampled to frame size.
Frame make_template(const TrackingModel& m, const Frame& first, const BBox& box);

// e_a from a corpus of fixed embeddings; cold_start is the template-crop embedding.
Var augmented_query(const TrackingModel& m, const rat::MemoryCorpus& corpus,
                    std::span<const double> query, const Tensor& cold_start);

// e_a from differentiable memory features (training path).
Var augmented_query(const TrackingModel& m, const std::vector<Var>& features,
                    const std::vector<double>& similarities, const Var& cold_start);

// Raw head output (L×5) for the last frame of the window.
Var head_output(const TrackingModel& m, const Frame& templ, const std::vector<Frame>& frames,
                const std::optional<Var>& query);

}  // namespace mim::harness
