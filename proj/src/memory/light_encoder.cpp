#include <cmath>

#include "mim/error.hpp"
#include "mim/ops.hpp"
#include "mim/rat_memory.hpp"
#include "mim/tokenizer.hpp"

namespace mim::rat {

LightEncoder LightEncoder::init(const LightEncoderConfig& cfg, Rng& rng) {
  const tok::PatchGeometry g{cfg.crop, cfg.crop, cfg.patch};
  g.validate();
  LightEncoder e;
  e.config = cfg;
  e.patch_proj = nn::Linear::init(3 * cfg.patch * cfg.patch, cfg.width, rng);
  e.position = nn::normal_param(g.count(), cfg.width, 0.02, rng);
  e.norm = nn::LayerNorm::init(cfg.width);
  e.scan = ssm::SelectiveParams::init(cfg.width, cfg.state, rng);
  e.out_proj = nn::Linear::init(cfg.width, cfg.embed, rng);
  return e;
}

void LightEncoder::collect(const std::string& prefix, nn::ParamList& out) const {
  patch_proj.collect(prefix + ".patch_proj", out);
  out.emplace_back(prefix + ".position", position);
  norm.collect(prefix + ".norm", out);
  scan.collect(prefix + ".scan", out);
  out_proj.collect(prefix + ".out_proj", out);
}

Var LightEncoder::encode(const Frame& crop) const {
  MIM_CHECK(crop.height == config.crop && crop.width == config.crop && crop.channels == 3,
            ShapeError, "LightEncoder expects a 3x" + std::to_string(config.crop) + "x" +
                            std::to_string(config.crop) + " crop");
  const Var tokens = ad::add(tok::patchify(crop, config.patch, patch_proj), position);
  const Var mixed = ad::add(tokens, ssm::bidirectional_scan(scan, norm(tokens)));
  return out_proj(ad::mean_rows(mixed));
}

QueryFeature make_query(const LightEncoder& enc, const Frame& frame, const BBox& bbox,
                        double factor) {
  const Crop crop = crop_and_resize(frame, bbox, factor, enc.config.crop);
  ad::NoGradGuard no_grad;
  QueryFeature q{enc.encode(crop.image).value(), bbox};
  double sq = 0.0;
  for (double v : q.embedding.values()) sq += v * v;
  MIM_CHECK(sq > 0.0, DomainError, "query embedding has zero norm");
  return q;
}

}  // namespace mim::rat
