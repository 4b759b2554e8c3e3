// SPDX-License-Identifier: Apache-2.0
#include "genre/optimizer.hpp"

#include <cmath>

#include "genre/error.hpp"

namespace genre {

void sgd_nesterov_step(std::span<real> theta, std::span<const real> grad, std::span<real> velocity, real lr, real mu) {
  if (theta.size() != grad.size() || theta.size() != velocity.size()) {
    throw DimensionError("nesterov step: parameter, gradient and velocity sizes differ");
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    velocity[i] = mu * velocity[i] - lr * grad[i];
    theta[i] = theta[i] + mu * velocity[i] - lr * grad[i];
  }
}

NesterovSgd::NesterovSgd(real lr, real momentum) : lr_(lr), momentum_(momentum) {
  set_lr(lr);
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
}

void NesterovSgd::set_lr(real lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and >= 0");
  lr_ = lr;
}

void NesterovSgd::step(std::vector<NamedTensor>& params) {
  for (auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    auto& v = velocity_[p.name];
    if (v.empty()) v.assign(p.tensor.numel(), 0.0);
    if (v.size() != p.tensor.numel()) throw DimensionError("velocity of '" + p.name + "' has the wrong size");
    auto theta = p.tensor.mutable_data();
    sgd_nesterov_step(theta, p.tensor.grad(), v, lr_, momentum_);
    for (real x : theta) {
      if (!std::isfinite(x)) throw NumericError("parameter '" + p.name + "' became non-finite after an update");
    }
  }
}

}  // namespace genre
