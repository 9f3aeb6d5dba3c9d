#pragma once

#include <cmath>

#include "myops/nn.hpp"

namespace myops {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update on a single parameter, step counted from 1.
inline void adam_step(Param& p, const AdamConfig& cfg, int64_t step) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (size_t i = 0; i < p.size(); ++i) {
    const double g = p.grad.data[i];
    p.m.data[i] = cfg.beta1 * p.m.data[i] + (1.0 - cfg.beta1) * g;
    p.v.data[i] = cfg.beta2 * p.v.data[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = p.m.data[i] / bc1;
    const double vhat = p.v.data[i] / bc2;
    p.value.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

// Applies the accumulated gradients to every layer and advances the step.
inline void adam_update(Network& net, const AdamConfig& cfg) {
  ++net.step;
  for (ConvLayer& l : net.layers) {
    adam_step(l.weight, cfg, net.step);
    adam_step(l.bias, cfg, net.step);
  }
}

}  // namespace myops
