#include "nfol/optim.hpp"

#include <cmath>

#include "nfol/error.hpp"

namespace nfol {

double global_norm(const std::vector<Tensor>& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.data) sq += v * v;
  return std::sqrt(sq);
}

void clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = global_norm(grads);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (auto& g : grads)
    for (double& v : g.data) v *= scale;
}

void adam_step(const std::vector<Tensor*>& params, std::vector<Tensor>& grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size())
    throw Error(ErrorKind::Contract, "parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.push_back(Tensor::zeros_like(*p));
      state.v.push_back(Tensor::zeros_like(*p));
    }
  }
  if (state.m.size() != params.size())
    throw Error(ErrorKind::Contract, "optimizer state does not match parameters");
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    Tensor& g = grads[k];
    if (!p.same_shape(g))
      throw Error(ErrorKind::Shape, "gradient shape does not match parameter");
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (int i = 0; i < p.size(); ++i) {
      const double gi = g[i] + cfg.weight_decay * p[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace nfol
