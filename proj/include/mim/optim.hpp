#pragma once

#include <cstddef>
#include <vector>

#include "mim/autodiff.hpp"
#include "mim/nn.hpp"

namespace mim::optim {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables
};

// Adam with decoupled weight decay. Decay is skipped for 1×n parameters
// (biases, norm gains, per-channel scalars).
class AdamW {
 public:
  AdamW(nn::ParamList params, AdamWConfig config);

  // grads[i] belongs to params[i]. Returns the pre-clip global gradient norm.
  double step(const std::vector<Tensor>& grads, double lr);
  std::size_t steps_taken() const { return t_; }

 private:
  nn::ParamList params_;
  AdamWConfig config_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

// Linear warm-up to peak_lr over warmup_steps, then cosine decay to zero at total_steps.
double warmup_cosine(std::size_t step, std::size_t warmup_steps, std::size_t total_steps,
                     double peak_lr);

}  // namespace mim::optim
