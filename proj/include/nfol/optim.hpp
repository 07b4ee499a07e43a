#pragma once

#include <vector>

#include "nfol/autodiff.hpp"

namespace nfol {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-10;  // classic L2: folded into the gradient
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long t = 0;
};

double global_norm(const std::vector<Tensor>& grads);

// Scales all gradients by max_norm / norm when the global norm exceeds it.
void clip_global_norm(std::vector<Tensor>& grads, double max_norm);

// Bias-corrected Adam update, applied in parameter order. The state is
// created lazily on first use and must always be fed the same parameter list.
void adam_step(const std::vector<Tensor*>& params, std::vector<Tensor>& grads,
               AdamState& state, const AdamConfig& cfg);

}  // namespace nfol
