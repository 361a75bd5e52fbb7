#include <cmath>

#include "mim/error.hpp"
#include "mim/mim_encoder.hpp"
#include "mim/ops.hpp"

namespace mim::enc {

MiMBlock MiMBlock::init(std::size_t index, const EncoderConfig& cfg, Rng& rng) {
  const std::size_t d = cfg.dim;
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(d));
  MiMBlock b;
  b.index = index;
  b.spatial_norm = nn::LayerNorm::init(d);
  b.temporal_norm = nn::LayerNorm::init(d);
  b.spatial = ssm::SelectiveParams::init(d, cfg.state, rng);
  b.temporal = ssm::SelectiveParams::init(d, cfg.state, rng);
  b.score_weight = nn::normal_param(d, 1, 0.02, rng);
  b.w_q = nn::normal_param(d, d, proj_std, rng);
  b.w_k = nn::normal_param(d, d, proj_std, rng);
  b.w_v = nn::normal_param(d, d, proj_std, rng);
  if (cfg.injection == Injection::kConcatenate)
    b.w_cat = nn::normal_param(2 * d, d, 0.5 * proj_std, rng);
  return b;
}

void MiMBlock::collect(const std::string& prefix, nn::ParamList& out) const {
  spatial_norm.collect(prefix + ".spatial_norm", out);
  temporal_norm.collect(prefix + ".temporal_norm", out);
  spatial.collect(prefix + ".spatial", out);
  temporal.collect(prefix + ".temporal", out);
  out.emplace_back(prefix + ".score_weight", score_weight);
  out.emplace_back(prefix + ".w_q", w_q);
  out.emplace_back(prefix + ".w_k", w_k);
  out.emplace_back(prefix + ".w_v", w_v);
  if (w_cat.defined()) out.emplace_back(prefix + ".w_cat", w_cat);
}

Var template_summary(const Var& tokens, const Var& score_weight, Var* scores) {
  using namespace ad;
  const Var s = softmax(transpose(matmul(tokens, score_weight)), 1);  // 1×L
  if (scores) *scores = s;
  return matmul(s, tokens);
}

namespace {

// Bidirectional scan under the block's schedule, mapped back to row-major slots.
Var scheduled_scan(const MiMBlock& block, const Var& x, const tok::PatchGeometry& g) {
  const tok::Permutation omega = tok::schedule_for_layer(block.index, g);
  const Var ordered = tok::apply_schedule(x, omega);
  const Var scanned = ssm::bidirectional_scan(block.spatial, ordered, omega.size());
  return tok::apply_schedule(scanned, tok::invert(omega));
}

}  // namespace

TemplatePass template_spatial_scan(const MiMBlock& block, const tok::TokenGrid& grid) {
  const Var templ = grid.frame(0);
  const Var scanned = scheduled_scan(block, block.spatial_norm(templ), grid.geometry);
  TemplatePass out;
  out.summary = template_summary(scanned, block.score_weight, &out.scores);
  out.tokens = ad::add(templ, scanned);
  return out;
}

Var frame_spatial_scan(const MiMBlock& block, const tok::TokenGrid& grid, const Var& summary) {
  const std::size_t L = grid.tokens_per_frame();
  MIM_CHECK(grid.frames >= 2, ShapeError, "frame_spatial_scan needs at least one search frame");
  const Var search = ad::slice_rows(grid.tokens, L, grid.search_frames() * L);
  const Var conditioned = ad::add_row(block.spatial_norm(search), summary);
  return ad::add(search, scheduled_scan(block, conditioned, grid.geometry));
}

AttentionResult tracking_attention(const MiMBlock& block, const Var& search_tokens,
                                   const Var& query, Injection injection) {
  using namespace ad;
  const std::size_t d = search_tokens.cols();
  MIM_CHECK(query.defined() && query.rows() == 1 && query.cols() == d, ShapeError,
            "tracking_attention: query must be 1x" + std::to_string(d));
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(block.w_k.cols()));
  AttentionResult out;
  switch (injection) {
    case Injection::kQueryAttention: {
      const Var q = matmul(query, block.w_q);                          // 1×dk
      const Var k = matmul(search_tokens, block.w_k);                  // TL×dk
      const Var v = matmul(search_tokens, block.w_v);                  // TL×D
      const Var p = softmax(scale(matmul(q, transpose(k)), inv_sqrt_dk), 1);  // 1×TL
      const Var attended = matmul(p, v);                               // 1×D
      out.weights = p.value();
      out.tokens = add(search_tokens, matmul(transpose(p), attended));
      break;
    }
    case Injection::kAdditive: {
      out.tokens = add_row(search_tokens, matmul(query, block.w_v));
      break;
    }
    case Injection::kConcatenate: {
      MIM_CHECK(block.w_cat.defined(), DomainError,
                "concatenate injection requested but block has no w_cat");
      const std::vector<std::size_t> zeros(search_tokens.rows(), 0);
      const Var tiled = gather_rows(query, zeros);
      out.tokens = add(search_tokens, matmul(concat_cols({search_tokens, tiled}), block.w_cat));
      break;
    }
    case Injection::kKeyValueAttention: {
      // Each token attends over {query, null slot}; the null slot has logit 0
      // and value 0, so the weight on the query is sigmoid(logit).
      const Var q = matmul(search_tokens, block.w_q);                  // TL×dk
      const Var k = matmul(query, block.w_k);                          // 1×dk
      const Var v = matmul(query, block.w_v);                          // 1×D
      const Var gate = sigmoid(scale(matmul(q, transpose(k)), inv_sqrt_dk));  // TL×1
      out.weights = transpose(gate).value();
      out.tokens = add(search_tokens, matmul(gate, v));
      break;
    }
  }
  return out;
}

Var temporal_residuals(const Var& normed, std::size_t frames, std::size_t tokens_per_frame,
                       double dt) {
  MIM_CHECK(frames >= 2, DomainError, "time_serialization_scan needs T >= 1");
  const std::size_t T = frames - 1, L = tokens_per_frame;
  std::vector<std::size_t> cur(T * L), prev(T * L);
  for (std::size_t p = 0; p < L; ++p)
    for (std::size_t t = 1; t <= T; ++t) {
      cur[p * T + (t - 1)] = t * L + p;
      prev[p * T + (t - 1)] = (t - 1) * L + p;
    }
  return ad::scale(ad::sub(ad::gather_rows(normed, cur), ad::gather_rows(normed, prev)), dt);
}

tok::TokenGrid time_serialization_scan(const MiMBlock& block, const tok::TokenGrid& grid,
                                       double dt) {
  MIM_CHECK(grid.frames >= 2, DomainError, "time_serialization_scan needs T >= 1");
  const std::size_t T = grid.search_frames(), L = grid.tokens_per_frame();
  const Var residuals = temporal_residuals(block.temporal_norm(grid.tokens), grid.frames, L, dt);
  const Var scanned = ssm::selective_scan(block.temporal, residuals, ssm::Direction::kForward, T);
  // Back to time-major order: row (t−1)·L + p.
  std::vector<std::size_t> to_time(T * L);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t p = 0; p < L; ++p) to_time[t * L + p] = p * T + t;
  const Var search = ad::slice_rows(grid.tokens, L, T * L);
  const Var updated = ad::add(search, ad::gather_rows(scanned, to_time));
  return grid.with_tokens(ad::concat_rows({grid.frame(0), updated}));
}

EncoderStack EncoderStack::init(const EncoderConfig& cfg, Rng& rng) {
  MIM_CHECK(cfg.depth >= 1, DomainError, "encoder depth must be at least 1");
  EncoderStack s;
  s.config = cfg;
  for (std::size_t i = 0; i < cfg.depth; ++i) s.blocks.push_back(MiMBlock::init(i, cfg, rng));
  return s;
}

void EncoderStack::collect(const std::string& prefix, nn::ParamList& out) const {
  for (const auto& b : blocks) b.collect(prefix + ".block" + std::to_string(b.index), out);
}

tok::TokenGrid forward(const EncoderStack& stack, const tok::TokenGrid& grid,
                       const std::optional<Var>& query) {
  const auto& cfg = stack.config;
  MIM_CHECK(!cfg.retrieval || query.has_value(), DomainError,
            "encoder forward: retrieval is enabled but no query was supplied");
  tok::TokenGrid cur = grid;
  for (const auto& block : stack.blocks) {
    const TemplatePass tp = template_spatial_scan(block, cur);
    Var search = frame_spatial_scan(block, cur, tp.summary);
    if (cfg.retrieval) search = tracking_attention(block, search, *query, cfg.injection).tokens;
    cur = cur.with_tokens(ad::concat_rows({tp.tokens, search}));
    if (cfg.temporal) cur = time_serialization_scan(block, cur, cfg.frame_dt);
  }
  return cur;
}

}  // namespace mim::enc
