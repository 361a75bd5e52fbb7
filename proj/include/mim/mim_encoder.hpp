#pragma once

// Mamba-in-Mamba block stack. Each block runs, with pre-norm residuals:
//   1. a bidirectional spatial scan over the template tokens, summarized into
//      one softmax-weighted template token;
//   2. a bidirectional spatial scan over every search frame after adding the
//      summary token to each of its tokens;
//   3. tracking attention of the retrieval query over the search tokens;
//   4. a forward temporal scan over frame-to-frame token residuals at each
//      spatial location.
// Stages 3 and 4 can be switched off for ablations. The template slice (t = 0)
// is only ever touched by stage 1.

#include <optional>
#include <string>
#include <vector>

#include "mim/nn.hpp"
#include "mim/ssm.hpp"
#include "mim/tokenizer.hpp"

namespace mim::enc {

using ad::Var;

enum class Injection { kQueryAttention, kAdditive, kConcatenate, kKeyValueAttention };

struct EncoderConfig {
  std::size_t dim = 384;
  std::size_t state = 16;
  std::size_t depth = 24;
  bool temporal = true;
  bool retrieval = true;
  Injection injection = Injection::kQueryAttention;
  double frame_dt = 1.0;
};

struct MiMBlock {
  std::size_t index = 0;
  nn::LayerNorm spatial_norm;
  nn::LayerNorm temporal_norm;
  ssm::SelectiveParams spatial;
  ssm::SelectiveParams temporal;
  Var score_weight;  // D×1 scoring vector for the template summary
  Var w_q, w_k, w_v;  // D×D
  Var w_cat;          // 2D×D, concatenate injection only

  static MiMBlock init(std::size_t index, const EncoderConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

struct TemplatePass {
  Var tokens;   // L×D template slice after the residual update
  Var summary;  // 1×D
  Var scores;   // 1×L softmax weights
};

// Σ_j softmax(tokens · weight)_j · tokens_j.
Var template_summary(const Var& tokens, const Var& score_weight, Var* scores = nullptr);

TemplatePass template_spatial_scan(const MiMBlock& block, const tok::TokenGrid& grid);
// Returns the T·L search rows after the residual update.
Var frame_spatial_scan(const MiMBlock& block, const tok::TokenGrid& grid, const Var& summary);

struct AttentionResult {
  Var tokens;      // T·L × D
  Tensor weights;  // 1 × T·L attention probabilities (query attention only)
};

AttentionResult tracking_attention(const MiMBlock& block, const Var& search_tokens,
                                   const Var& query, Injection injection);

// Δt·(x̂^t − x̂^{t−1}) for t = 1..T, where x̂ = normed tokens, ordered
// location-major: row p·T + (t−1).
Var temporal_residuals(const Var& normed, std::size_t frames, std::size_t tokens_per_frame,
                       double dt);
tok::TokenGrid time_serialization_scan(const MiMBlock& block, const tok::TokenGrid& grid,
                                       double dt);

struct EncoderStack {
  EncoderConfig config;
  std::vector<MiMBlock> blocks;

  static EncoderStack init(const EncoderConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

// One augmented query is shared by every block. Throws DomainError when
// retrieval is enabled and no query is supplied.
tok::TokenGrid forward(const EncoderStack& stack, const tok::TokenGrid& grid,
                       const std::optional<Var>& query);

}  // namespace mim::enc
