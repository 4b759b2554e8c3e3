// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "genre/rng.hpp"
#include "genre/tensor.hpp"

namespace genre {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
};

/// Compares reverse-mode gradients of `loss_fn` against central differences.
///
/// `loss_fn` must rebuild the graph from the current parameter values on each
/// call and be deterministic (dropout masks fixed, e.g. by reseeding inside
/// the closure). Coordinates are all of them when the parameters hold at most
/// `max_coords` values, otherwise a seeded sample of `max_coords`.
///
/// The error of one coordinate is
///   |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
/// and the result carries the maximum over the checked coordinates.
GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::vector<NamedTensor> params,
                           double eps = 1e-5, std::size_t max_coords = 1000,
                           std::uint64_t sample_seed = 0);

/// Distance of the graph below `root` from its nearest non-differentiable
/// point: the smallest |input| of any relu and the smallest gap between the
/// maximum and the runner-up of any max-pool window with a positive maximum
/// (windows of relu zeros are covered by the relu term). Infinity when the
/// graph has neither op. A central difference is only meaningful when this
/// margin is large compared to the effect of the perturbation.
double kink_margin(const Tensor& root);

}  // namespace genre
