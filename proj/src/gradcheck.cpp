// SPDX-License-Identifier: Apache-2.0
#include "genre/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "genre/error.hpp"

namespace genre {

GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::vector<NamedTensor> params,
                           double eps, std::size_t max_coords, std::uint64_t sample_seed) {
  for (auto& p : params) {
    if (!p.tensor.is_leaf() || !p.tensor.requires_grad()) {
      throw ContractError("grad_check: '" + p.name + "' is not a trainable leaf");
    }
    p.tensor.zero_grad();
  }
  backward(loss_fn());

  struct Coord {
    std::size_t param;
    std::size_t index;
  };
  std::vector<Coord> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p].tensor.numel(); ++i) coords.push_back({p, i});
  if (coords.size() > max_coords) {
    Rng rng(sample_seed);
    rng.shuffle(std::span<Coord>(coords));
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end(), [](const Coord& a, const Coord& b) {
      return a.param != b.param ? a.param < b.param : a.index < b.index;
    });
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  for (const Coord& c : coords) {
    Tensor& t = params[c.param].tensor;
    const auto grad = t.grad();
    const double analytic = grad.empty() ? 0.0 : grad[c.index];
    const double original = t.data()[c.index];
    t.mutable_data()[c.index] = original + eps;
    const double up = loss_fn().item();
    t.mutable_data()[c.index] = original - eps;
    const double down = loss_fn().item();
    t.mutable_data()[c.index] = original;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic - numeric) / denom;
    ++result.coords_checked;
    if (result.coords_checked == 1 || err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_param = params[c.param].name;
      result.worst_index = c.index;
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

double kink_margin(const Tensor& root) {
  double margin = std::numeric_limits<double>::infinity();
  std::vector<detail::Node*> stack{root.node()};
  std::unordered_set<detail::Node*> seen{root.node()};
  while (!stack.empty()) {
    const detail::Node* n = stack.back();
    stack.pop_back();
    if (n->inputs.empty()) {
      // leaf, or an op that records no graph
    } else if (n->op == OpKind::relu) {
      for (real v : n->inputs.at(0)->value) margin = std::min(margin, std::abs(v));
    } else if (n->op == OpKind::maxpool_time && n->attrs.size() == 2) {
      const auto& x = n->inputs.at(0)->value;
      const std::size_t steps = n->inputs.at(0)->shape.back();
      const std::size_t window = n->attrs[0], stride = n->attrs[1];
      const std::size_t out_steps = n->shape.back();
      for (std::size_t r = 0; r < x.size() / steps; ++r) {
        for (std::size_t t = 0; t < out_steps; ++t) {
          real best = -std::numeric_limits<real>::infinity(), second = best;
          for (std::size_t j = t * stride; j < t * stride + window; ++j) {
            const real v = x[r * steps + j];
            if (v > best) {
              second = best;
              best = v;
            } else if (v > second) {
              second = v;
            }
          }
          if (best > 0.0 && window > 1) margin = std::min(margin, best - second);
        }
      }
    }
    for (const auto& in : n->inputs) {
      if (seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  return margin;
}

}  // namespace genre
