// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "genre/gradcheck.hpp"
#include "genre/tensor.hpp"

namespace genre {

/// v <- mu v - lr g;  theta <- theta + mu v - lr g.
void sgd_nesterov_step(std::span<real> theta, std::span<const real> grad, std::span<real> velocity, real lr, real mu);

/// Nesterov SGD over named parameters. Velocities start at zero and are keyed
/// by parameter name so they can be checkpointed.
class NesterovSgd {
 public:
  NesterovSgd(real lr = 0.01, real momentum = 0.9);

  real lr() const { return lr_; }
  void set_lr(real lr);
  real momentum() const { return momentum_; }

  /// Applies one update to every parameter that received a gradient and
  /// checks the result: NumericError naming the parameter on NaN/Inf.
  void step(std::vector<NamedTensor>& params);

  std::map<std::string, std::vector<real>>& velocities() { return velocity_; }
  const std::map<std::string, std::vector<real>>& velocities() const { return velocity_; }

 private:
  real lr_;
  real momentum_;
  std::map<std::string, std::vector<real>> velocity_;
};

}  // namespace genre
