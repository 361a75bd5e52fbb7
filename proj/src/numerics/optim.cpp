#include "mim/optim.hpp"

#include <cmath>
#include <numbers>

#include "mim/error.hpp"

namespace mim::optim {

AdamW::AdamW(nn::ParamList params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& [name, v] : params_) {
    m_.emplace_back(v.shape());
    v_.emplace_back(v.shape());
  }
}

double AdamW::step(const std::vector<Tensor>& grads, double lr) {
  MIM_CHECK(grads.size() == params_.size(), ShapeError, "AdamW: gradient count mismatch");
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  MIM_CHECK(std::isfinite(norm), NumericError, "AdamW: non-finite gradient norm");
  const double clip =
      (config_.grad_clip > 0.0 && norm > config_.grad_clip) ? config_.grad_clip / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Var p = params_[i].second;
    Tensor& w = p.leaf_value();
    const Tensor& g = grads[i];
    MIM_CHECK(g.size() == w.size(), ShapeError, "AdamW: gradient shape mismatch for " +
                                                    params_[i].first);
    const bool decay = w.rows() > 1;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k] * clip;
      m_[i][k] = config_.beta1 * m_[i][k] + (1.0 - config_.beta1) * gk;
      v_[i][k] = config_.beta2 * v_[i][k] + (1.0 - config_.beta2) * gk * gk;
      const double mhat = m_[i][k] / bc1;
      const double vhat = v_[i][k] / bc2;
      if (decay) w[k] -= lr * config_.weight_decay * w[k];
      w[k] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
  return norm;
}

double warmup_cosine(std::size_t step, std::size_t warmup_steps, std::size_t total_steps,
                     double peak_lr) {
  if (warmup_steps > 0 && step < warmup_steps)
    return peak_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return peak_lr;
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return 0.5 * peak_lr * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

}  // namespace mim::optim
