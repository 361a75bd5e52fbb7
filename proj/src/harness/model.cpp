#include "mim/harness/model.hpp"

#include <algorithm>

#include <fstream>

#include "mim/checkpoint.hpp"
#include "mim/error.hpp"
#include "mim/ops.hpp"

namespace mim::harness {

TrackingModel TrackingModel::init(const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  TrackingModel m;
  m.config = cfg;
  const tok::PatchGeometry g{cfg.frame_size, cfg.frame_size, cfg.patch};
  m.patch_proj = nn::Linear::init(3 * cfg.patch * cfg.patch, cfg.dim, rng);
  m.embeddings = tok::PositionEmbeddings::init(g.count(), cfg.window + 1, cfg.dim, rng);
  enc::EncoderConfig ec;
  ec.dim = cfg.dim;
  ec.state = cfg.state;
  ec.depth = cfg.depth;
  ec.temporal = cfg.temporal;
  ec.retrieval = cfg.retrieval;
  ec.injection = cfg.injection;
  m.encoder = enc::EncoderStack::init(ec, rng);
  rat::LightEncoderConfig lc;
  lc.crop = cfg.crop_size;
  lc.patch = cfg.light_patch;
  lc.width = cfg.light_width;
  lc.state = cfg.light_state;
  lc.embed = cfg.embed_dim;
  m.light = rat::LightEncoder::init(lc, rng);
  m.fusion_mlp = nn::Mlp::init({cfg.embed_dim, 2 * cfg.dim, cfg.dim}, rng);
  m.head = head::HeadParams::init(cfg.dim, cfg.head_hidden, rng);
  return m;
}

nn::ParamList TrackingModel::params() const {
  nn::ParamList out;
  patch_proj.collect("patch_proj", out);
  embeddings.collect("embed", out);
  encoder.collect("encoder", out);
  if (config.retrieval) {
    light.collect("light", out);
    fusion_mlp.collect("fusion", out);
  }
  head.collect("head", out);
  return out;
}

tok::PatchGeometry TrackingModel::geometry() const {
  return {config.frame_size, config.frame_size, config.patch};
}

void save_model(const std::filesystem::path& dir, const TrackingModel& m) {
  std::filesystem::create_directories(dir);
  checkpoint::write(dir / "model.ckpt", checkpoint::snapshot(m.params()));
  std::ofstream os(dir / "config.json", std::ios::trunc);
  os << dump_config(m.config) << '\n';
  MIM_CHECK(os.good(), FormatError, "failed writing " + (dir / "config.json").string());
}

TrackingModel load_model(const std::filesystem::path& dir) {
  TrackingModel m = TrackingModel::init(load_config(dir / "config.json"), 0);
  checkpoint::restore(m.params(), checkpoint::read(dir / "model.ckpt"));
  return m;
}

std::vector<std::size_t> window_indices(std::size_t target, std::size_t window,
                                        std::size_t stride) {
  MIM_CHECK(window >= 1, DomainError, "window must be at least 1");
  std::vector<std::size_t> idx(window);
  for (std::size_t j = 0; j < window; ++j) {
    const std::size_t back = (window - 1 - j) * stride;
    idx[j] = back > target ? 0 : target - back;
  }
  return idx;
}

SearchRegion search_region(const TrackingModel& m, const BBox& box) {
  const double side = std::max(m.config.search_factor * std::max(box.w, box.h), kMinSearchSide);
  return {box.cx() - 0.5 * side, box.cy() - 0.5 * side, side};
}

BBox to_region(const BBox& box, const SearchRegion& r, std::size_t size) {
  const double s = static_cast<double>(size) / r.side;
  return {(box.x - r.x) * s, (box.y - r.y) * s, box.w * s, box.h * s};
}

BBox from_region(const BBox& box, const SearchRegion& r, std::size_t size) {
  const double s = r.side / static_cast<double>(size);
  return {r.x + box.x * s, r.y + box.y * s, box.w * s, box.h * s};
}

std::vector<Frame> search_frames(const TrackingModel& m, const std::vector<const Frame*>& frames,
                                 const SearchRegion& r) {
  std::vector<Frame> out;
  out.reserve(frames.size());
  const double half = 0.5 * r.side;
  for (const Frame* f : frames)
    out.push_back(rat::crop_square(*f, r.x + half, r.y + half, r.side, m.config.frame_size,
                                   m.config.frame_size));
  return out;
}

Frame make_template(const TrackingModel& m, const Frame& first, const BBox& box) {
  return rat::crop_context(first, box, m.config.template_context, m.config.frame_size,
                           m.config.frame_size);
}

Var augmented_query(const TrackingModel& m, const rat::MemoryCorpus& corpus,
                    std::span<const double> query, const Tensor& cold_start) {
  const auto picked = rat::select_for_fusion(corpus, query, m.config.top_k, m.config.fusion);
  std::vector<Var> features;
  std::vector<double> sims;
  for (const auto& r : picked) {
    features.push_back(Var::constant(corpus.entry_tensor(r.index)));
    sims.push_back(r.similarity);
  }
  return rat::fuse_and_project(features, sims, m.config.fusion, m.fusion_mlp,
                               Var::constant(cold_start));
}

Var augmented_query(const TrackingModel& m, const std::vector<Var>& features,
                    const std::vector<double>& similarities, const Var& cold_start) {
  return rat::fuse_and_project(features, similarities, m.config.fusion, m.fusion_mlp, cold_start);
}

Var head_output(const TrackingModel& m, const Frame& templ, const std::vector<Frame>& frames,
                const std::optional<Var>& query) {
  MIM_CHECK(frames.size() == m.config.window, ShapeError,
            "head_output: expected " + std::to_string(m.config.window) + " frames");
  const tok::TokenGrid grid = tok::build_grid(templ, frames, m.config.patch, m.patch_proj,
                                              m.embeddings);
  const tok::TokenGrid out =
      enc::forward(m.encoder, grid, m.config.retrieval ? query : std::nullopt);
  return m.head(out.frame(out.frames - 1));
}

}  // namespace mim::harness
