#pragma once

// Every model, ablation and training knob, loadable from a JSON object whose
// keys mirror the field names. Missing keys keep their defaults; unknown keys
// are an error.

#include <cstdint>
#include <filesystem>
#include <string>

#include "mim/mim_encoder.hpp"
#include "mim/rat_memory.hpp"

namespace mim::harness {

struct RunConfig {
  // Model.
  std::size_t frame_size = 32;   // model input (search crop) side
  std::size_t canvas_size = 64;  // full frame side
  double search_factor = 2.5;    // search crop side / max(w, h) of the previous box
  std::size_t patch = 4;
  std::size_t dim = 32;
  std::size_t state = 4;
  std::size_t depth = 2;
  std::size_t window = 2;  // search frames per prediction; the last is the target
  std::size_t stride = 2;
  bool temporal = true;
  bool retrieval = true;
  enc::Injection injection = enc::Injection::kQueryAttention;
  std::size_t head_hidden = 32;
  bool score_window = true;  // weight tracking scores by a Hann window over the token grid

  // Retrieval memory.
  double tau = 0.8;
  std::size_t top_k = 7;
  rat::Fusion fusion = rat::Fusion::kRetrievalMean;
  std::size_t memory_capacity = 256;
  double crop_factor = 1.1;
  double template_context = 2.0;
  std::size_t crop_size = 32;
  std::size_t light_patch = 8;
  std::size_t light_width = 16;
  std::size_t light_state = 4;
  std::size_t embed_dim = 128;

  // Training.
  std::size_t steps = 2000;
  std::size_t batch = 8;
  std::size_t warmup = 100;
  double lr = 3e-3;
  double weight_decay = 0.05;
  double grad_clip = 1.0;
  double aug_shift = 0.5;   // fraction of box size
  double aug_scale = 0.15;  // relative size jitter
  std::size_t memory_crops = 3;
  std::size_t pool_size = 64;
  std::size_t pool_frames = 24;
  std::uint64_t pool_seed = 1000;

  // Evaluation.
  std::size_t eval_sequences = 24;
  std::size_t eval_frames = 30;
  std::uint64_t eval_seed = 2000;

  std::uint64_t seed = 1;
  // Restrict patch, depth, window and top_k to the ablation option sets.
  bool ablation_axes = false;

  // Throws DomainError naming the first offending field.
  void validate() const;
};

// Full-size configuration: 256 px input, patch 16, width 384, depth 24.
RunConfig full_size_config();

// "full", "no_temporal", "no_retrieval", "no_both".
RunConfig with_variant(RunConfig cfg, const std::string& variant);

RunConfig parse_config(const std::string& json_text);
std::string dump_config(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

std::string to_string(rat::Fusion f);
std::string to_string(enc::Injection i);

}  // namespace mim::harness
