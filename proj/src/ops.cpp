// SPDX-License-Identifier: Apache-2.0
#include "genre/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "genre/error.hpp"

namespace genre {

using detail::make_result;
using detail::Node;

namespace {

// Gradient buffer of input i, or nullptr when that input needs no gradient.
real* grad_of(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.ensure_grad();
  return in.grad.data();
}

const real* value_of(Node& self, std::size_t i) { return self.inputs[i]->value.data(); }

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + " expects rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " . " +
                         shape_str(b.shape()));
  }
  std::vector<real> out(m * n, 0.0);
  const real* pa = a.data().data();
  const real* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    real* row = out.data() + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const real av = pa[i * k + kk];
      const real* brow = pb + kk * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result(OpKind::matmul, {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const real* g = self.grad.data();
    const real* pa = value_of(self, 0);
    const real* pb = value_of(self, 1);
    if (real* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          real acc = 0.0;
          const real* grow = g + i * n;
          const real* brow = pb + kk * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + kk] += acc;
        }
      }
    }
    if (real* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        const real* grow = g + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const real av = pa[i * k + kk];
          real* gbrow = gb + kk * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "linear weight");
  const bool vector_input = x.rank() == 1;
  if (!vector_input) require_rank(x, 2, "linear input");
  const std::size_t m = vector_input ? 1 : x.dim(0);
  const std::size_t k = vector_input ? x.dim(0) : x.dim(1);
  const std::size_t n = weight.dim(0);
  if (weight.dim(1) != k) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{n}) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  std::vector<real> out(m * n);
  const real* px = x.data().data();
  const real* pw = weight.data().data();
  const real* pbias = has_bias ? bias.data().data() : nullptr;
  for (std::size_t i = 0; i < m; ++i) {
    const real* xrow = px + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const real* wrow = pw + j * k;
      real acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += xrow[kk] * wrow[kk];
      out[i * n + j] = has_bias ? acc + pbias[j] : acc;
    }
  }
  Shape shape = vector_input ? Shape{n} : Shape{m, n};
  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result(OpKind::linear, std::move(shape), std::move(out), std::move(inputs),
                     [m, k, n, has_bias](Node& self) {
                       const real* g = self.grad.data();
                       const real* px = value_of(self, 0);
                       const real* pw = value_of(self, 1);
                       if (real* gx = grad_of(self, 0)) {
                         for (std::size_t i = 0; i < m; ++i) {
                           real* gxrow = gx + i * k;
                           for (std::size_t j = 0; j < n; ++j) {
                             const real gv = g[i * n + j];
                             const real* wrow = pw + j * k;
                             for (std::size_t kk = 0; kk < k; ++kk) gxrow[kk] += gv * wrow[kk];
                           }
                         }
                       }
                       if (real* gw = grad_of(self, 1)) {
                         for (std::size_t i = 0; i < m; ++i) {
                           const real* xrow = px + i * k;
                           for (std::size_t j = 0; j < n; ++j) {
                             const real gv = g[i * n + j];
                             real* gwrow = gw + j * k;
                             for (std::size_t kk = 0; kk < k; ++kk) gwrow[kk] += gv * xrow[kk];
                           }
                         }
                       }
                       if (has_bias) {
                         if (real* gb = grad_of(self, 2)) {
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                         }
                       }
                     });
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<real> out(a.numel());
  const auto pa = a.data();
  const auto pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
  return make_result(OpKind::add, a.shape(), std::move(out), {a, b}, [](Node& self) {
    const std::size_t n = self.grad.size();
    for (std::size_t in = 0; in < 2; ++in) {
      if (real* g = grad_of(self, in))
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<real> out(a.numel());
  const auto pa = a.data();
  const auto pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
  return make_result(OpKind::sub, a.shape(), std::move(out), {a, b}, [](Node& self) {
    const std::size_t n = self.grad.size();
    if (real* g = grad_of(self, 0))
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i];
    if (real* g = grad_of(self, 1))
      for (std::size_t i = 0; i < n; ++i) g[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<real> out(a.numel());
  const auto pa = a.data();
  const auto pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
  return make_result(OpKind::mul, a.shape(), std::move(out), {a, b}, [](Node& self) {
    const std::size_t n = self.grad.size();
    const real* pa = value_of(self, 0);
    const real* pb = value_of(self, 1);
    if (real* g = grad_of(self, 0))
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * pb[i];
    if (real* g = grad_of(self, 1))
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * pa[i];
  });
}

Tensor scale(const Tensor& x, real factor) {
  std::vector<real> out(x.data().begin(), x.data().end());
  for (real& v : out) v *= factor;
  return make_result(OpKind::scale, x.shape(), std::move(out), {x}, [factor](Node& self) {
    if (real* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  real acc = 0.0;
  for (real v : x.data()) acc += v;
  return make_result(OpKind::sum, {}, {acc}, {x}, [](Node& self) {
    if (real* g = grad_of(self, 0)) {
      const std::size_t n = self.inputs[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

namespace {

real stable_sigmoid(real x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const real e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor elementwise(Activation kind, const Tensor& x) {
  const auto px = x.data();
  std::vector<real> out(px.size());
  OpKind op = OpKind::relu;
  switch (kind) {
    case Activation::relu:
      op = OpKind::relu;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = px[i] > 0.0 ? px[i] : 0.0;
      break;
    case Activation::tanh:
      op = OpKind::tanh;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(px[i]);
      break;
    case Activation::sigmoid:
      op = OpKind::sigmoid;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(px[i]);
      break;
  }
  return make_result(op, x.shape(), std::move(out), {x}, [kind](Node& self) {
    real* g = grad_of(self, 0);
    if (!g) return;
    const real* in = value_of(self, 0);
    const real* y = self.value.data();
    const real* up = self.grad.data();
    const std::size_t n = self.grad.size();
    switch (kind) {
      case Activation::relu:
        for (std::size_t i = 0; i < n; ++i)
          if (in[i] > 0.0) g[i] += up[i];
        break;
      case Activation::tanh:
        for (std::size_t i = 0; i < n; ++i) g[i] += up[i] * (1.0 - y[i] * y[i]);
        break;
      case Activation::sigmoid:
        for (std::size_t i = 0; i < n; ++i) g[i] += up[i] * y[i] * (1.0 - y[i]);
        break;
    }
  });
}

// ---------------------------------------------------------------------------
// Softmax and cross-entropy

namespace {

// Softmax of `cols` entries at `in` into `out`, honouring an optional mask.
// Returns false if the row has no unmasked entry.
bool softmax_row(const real* in, const std::uint8_t* mask, std::size_t cols, real* out) {
  real mx = -INFINITY;
  for (std::size_t j = 0; j < cols; ++j)
    if (!mask || mask[j]) mx = std::max(mx, in[j]);
  if (mx == -INFINITY) return false;
  real total = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    if (!mask || mask[j]) {
      out[j] = std::exp(in[j] - mx);
      total += out[j];
    } else {
      out[j] = 0.0;
    }
  }
  for (std::size_t j = 0; j < cols; ++j) out[j] /= total;
  return true;
}

}  // namespace

Tensor softmax(const Tensor& x, std::span<const std::uint8_t> mask) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw DimensionError("softmax expects a vector or matrix, got " + shape_str(x.shape()));
  }
  if (!mask.empty() && mask.size() != x.numel()) {
    throw DimensionError("softmax: mask of " + std::to_string(mask.size()) +
                         " entries for input " + shape_str(x.shape()));
  }
  const std::size_t cols = x.shape().back();
  const std::size_t rows = cols == 0 ? 0 : x.numel() / cols;
  std::vector<real> out(x.numel());
  const real* px = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint8_t* m = mask.empty() ? nullptr : mask.data() + r * cols;
    if (!softmax_row(px + r * cols, m, cols, out.data() + r * cols)) {
      throw ContractError("softmax: row " + std::to_string(r) + " has an empty support (all masked)");
    }
  }
  if (cols == 0) throw ContractError("softmax: empty input has no support");
  return make_result(OpKind::softmax, x.shape(), std::move(out), {x}, [rows, cols](Node& self) {
    real* g = grad_of(self, 0);
    if (!g) return;
    const real* y = self.value.data();
    const real* up = self.grad.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t o = r * cols;
      real dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += y[o + j] * up[o + j];
      for (std::size_t j = 0; j < cols; ++j) g[o + j] += y[o + j] * (up[o + j] - dot);
    }
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels,
                             std::span<const real> sample_weights, std::vector<real>* probs_out) {
  if (logits.rank() != 1 && logits.rank() != 2) {
    throw DimensionError("softmax_cross_entropy expects [G] or [B x G] logits, got " +
                         shape_str(logits.shape()));
  }
  const std::size_t classes = logits.shape().back();
  const std::size_t batch = logits.rank() == 1 ? 1 : logits.dim(0);
  if (labels.size() != batch) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for a batch of " + std::to_string(batch));
  }
  if (!sample_weights.empty() && sample_weights.size() != batch) {
    throw DimensionError("softmax_cross_entropy: weight count differs from batch size");
  }
  if (batch == 0 || classes == 0) throw DimensionError("softmax_cross_entropy: empty batch");
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ParameterError("label " + std::to_string(labels[i]) + " out of range for " +
                           std::to_string(classes) + " classes");
    }
  }
  std::vector<real> probs(batch * classes);
  const real* px = logits.data().data();
  real loss = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    softmax_row(px + i * classes, nullptr, classes, probs.data() + i * classes);
    const real p = std::max(probs[i * classes + static_cast<std::size_t>(labels[i])], 1e-12);
    const real w = sample_weights.empty() ? 1.0 : sample_weights[i];
    loss += -w * std::log(p);
  }
  loss /= static_cast<real>(batch);
  if (probs_out) *probs_out = probs;
  std::vector<int> label_copy(labels.begin(), labels.end());
  std::vector<real> weight_copy(sample_weights.begin(), sample_weights.end());
  return make_result(
      OpKind::softmax_cross_entropy, {}, {loss}, {logits},
      [batch, classes, probs = std::move(probs), label_copy = std::move(label_copy),
       weight_copy = std::move(weight_copy)](Node& self) {
        real* g = grad_of(self, 0);
        if (!g) return;
        const real up = self.grad[0] / static_cast<real>(batch);
        for (std::size_t i = 0; i < batch; ++i) {
          const real w = weight_copy.empty() ? 1.0 : weight_copy[i];
          for (std::size_t c = 0; c < classes; ++c) {
            const real onehot = static_cast<std::size_t>(label_copy[i]) == c ? 1.0 : 0.0;
            g[i * classes + c] += up * w * (probs[i * classes + c] - onehot);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Batch normalization and dropout

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, RunningStats& stats,
                 Mode mode) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError("batchnorm expects [B x C] or [B x C x T], got " + shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0), channels = x.dim(1);
  const std::size_t steps = x.rank() == 3 ? x.dim(2) : 1;
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    throw DimensionError("batchnorm: affine parameters must be [" + std::to_string(channels) +
                         "], got " + shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
  }
  if (stats.mean.empty()) stats = RunningStats(channels);
  if (stats.mean.size() != channels || stats.var.size() != channels) {
    throw DimensionError("batchnorm: running statistics sized for a different channel count");
  }
  if (mode == Mode::train && batch < 2) {
    throw ParameterError("batchnorm: train mode needs a batch of at least 2 (got " +
                         std::to_string(batch) + ")");
  }
  const std::size_t count = batch * steps;
  const real* px = x.data().data();
  const real* pg = gamma.data().data();
  const real* pb = beta.data().data();
  std::vector<real> xhat(x.numel());
  std::vector<real> inv_std(channels);
  std::vector<real> out(x.numel());
  auto at = [=](std::size_t b, std::size_t c) { return (b * channels + c) * steps; };

  for (std::size_t c = 0; c < channels; ++c) {
    real mean = 0.0, var = 0.0;
    if (mode == Mode::train) {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < steps; ++t) mean += px[at(b, c) + t];
      mean /= static_cast<real>(count);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < steps; ++t) {
          const real d = px[at(b, c) + t] - mean;
          var += d * d;
        }
      var /= static_cast<real>(count);
      stats.mean[c] = (1.0 - kBatchNormMomentum) * stats.mean[c] + kBatchNormMomentum * mean;
      const real unbiased = var * static_cast<real>(count) / static_cast<real>(count - 1);
      stats.var[c] = (1.0 - kBatchNormMomentum) * stats.var[c] + kBatchNormMomentum * unbiased;
    } else {
      mean = stats.mean[c];
      var = stats.var[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEpsilon);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < steps; ++t) {
        const std::size_t i = at(b, c) + t;
        xhat[i] = (px[i] - mean) * inv_std[c];
        out[i] = pg[c] * xhat[i] + pb[c];
      }
  }

  const bool training = mode == Mode::train;
  return make_result(
      OpKind::batchnorm, x.shape(), std::move(out), {x, gamma, beta},
      [batch, channels, steps, count, training, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node& self) {
        const real* up = self.grad.data();
        const real* pg = value_of(self, 1);
        real* gx = grad_of(self, 0);
        real* ggamma = grad_of(self, 1);
        real* gbeta = grad_of(self, 2);
        auto at = [=](std::size_t b, std::size_t c) { return (b * channels + c) * steps; };
        for (std::size_t c = 0; c < channels; ++c) {
          real sum_up = 0.0, sum_up_xhat = 0.0;
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = 0; t < steps; ++t) {
              const std::size_t i = at(b, c) + t;
              sum_up += up[i];
              sum_up_xhat += up[i] * xhat[i];
            }
          if (gbeta) gbeta[c] += sum_up;
          if (ggamma) ggamma[c] += sum_up_xhat;
          if (!gx) continue;
          const real n = static_cast<real>(count);
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = 0; t < steps; ++t) {
              const std::size_t i = at(b, c) + t;
              if (training) {
                gx[i] += pg[c] * inv_std[c] / n * (n * up[i] - sum_up - xhat[i] * sum_up_xhat);
              } else {
                gx[i] += pg[c] * inv_std[c] * up[i];
              }
            }
        }
      });
}

Tensor dropout(const Tensor& x, real p, Rng& rng, Mode mode) {
  if (!(p >= 0.0) || p >= 1.0) {
    throw ParameterError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (mode == Mode::eval || p == 0.0) return x;
  const real keep_scale = 1.0 / (1.0 - p);
  std::vector<real> factor(x.numel());
  for (real& f : factor) f = rng.bernoulli(p) ? 0.0 : keep_scale;
  std::vector<real> out(x.numel());
  const auto px = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = px[i] * factor[i];
  return make_result(OpKind::dropout, x.shape(), std::move(out), {x},
                     [factor = std::move(factor)](Node& self) {
                       if (real* g = grad_of(self, 0))
                         for (std::size_t i = 0; i < factor.size(); ++i)
                           g[i] += self.grad[i] * factor[i];
                     });
}

// ---------------------------------------------------------------------------
// Temporal convolution and pooling

Tensor conv_time(const Tensor& x, const Tensor& kernels, std::size_t stride) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError("conv_time expects [C x T] or [B x C x T], got " + shape_str(x.shape()));
  }
  require_rank(kernels, 3, "conv_time kernels");
  if (stride == 0) throw ParameterError("conv_time: stride must be positive");
  const bool batched = x.rank() == 3;
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t c_in = x.shape()[x.rank() - 2];
  const std::size_t steps = x.shape().back();
  const std::size_t c_out = kernels.dim(0), k = kernels.dim(2);
  if (kernels.dim(1) != c_in) {
    throw DimensionError("conv_time: kernels " + shape_str(kernels.shape()) +
                         " do not match input " + shape_str(x.shape()));
  }
  if (k == 0 || k > steps) {
    throw DimensionError("conv_time: kernel length " + std::to_string(k) +
                         " exceeds input length " + std::to_string(steps) + " (input " +
                         shape_str(x.shape()) + ")");
  }
  const std::size_t out_steps = (steps - k) / stride + 1;
  std::vector<real> out(batch * c_out * out_steps, 0.0);
  const real* px = x.data().data();
  const real* pw = kernels.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < c_out; ++co) {
      real* orow = out.data() + (b * c_out + co) * out_steps;
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const real* xrow = px + (b * c_in + ci) * steps;
        const real* wrow = pw + (co * c_in + ci) * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const real w = wrow[kk];
          const real* src = xrow + kk;
          if (stride == 1) {
            for (std::size_t t = 0; t < out_steps; ++t) orow[t] += w * src[t];
          } else {
            for (std::size_t t = 0; t < out_steps; ++t) orow[t] += w * src[t * stride];
          }
        }
      }
    }
  }
  Shape shape = batched ? Shape{batch, c_out, out_steps} : Shape{c_out, out_steps};
  return make_result(
      OpKind::conv_time, std::move(shape), std::move(out), {x, kernels},
      [batch, c_in, steps, c_out, k, stride, out_steps](Node& self) {
        const real* up = self.grad.data();
        const real* px = value_of(self, 0);
        const real* pw = value_of(self, 1);
        if (real* gw = grad_of(self, 1)) {
          for (std::size_t co = 0; co < c_out; ++co)
            for (std::size_t ci = 0; ci < c_in; ++ci)
              for (std::size_t kk = 0; kk < k; ++kk) {
                real acc = 0.0;
                for (std::size_t b = 0; b < batch; ++b) {
                  const real* urow = up + (b * c_out + co) * out_steps;
                  const real* src = px + (b * c_in + ci) * steps + kk;
                  for (std::size_t t = 0; t < out_steps; ++t) acc += urow[t] * src[t * stride];
                }
                gw[(co * c_in + ci) * k + kk] += acc;
              }
        }
        if (real* gx = grad_of(self, 0)) {
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t ci = 0; ci < c_in; ++ci) {
              real* dst = gx + (b * c_in + ci) * steps;
              for (std::size_t co = 0; co < c_out; ++co) {
                const real* urow = up + (b * c_out + co) * out_steps;
                const real* wrow = pw + (co * c_in + ci) * k;
                for (std::size_t kk = 0; kk < k; ++kk) {
                  const real w = wrow[kk];
                  real* d = dst + kk;
                  if (stride == 1) {
                    for (std::size_t t = 0; t < out_steps; ++t) d[t] += w * urow[t];
                  } else {
                    for (std::size_t t = 0; t < out_steps; ++t) d[t * stride] += w * urow[t];
                  }
                }
              }
            }
        }
      });
}

Tensor maxpool_time(const Tensor& x, std::size_t window, std::size_t stride) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError("maxpool_time expects [C x T] or [B x C x T], got " +
                         shape_str(x.shape()));
  }
  if (window == 0 || stride == 0) throw ParameterError("maxpool_time: window and stride must be positive");
  const std::size_t steps = x.shape().back();
  if (window > steps) {
    throw DimensionError("maxpool_time: window " + std::to_string(window) +
                         " exceeds input length " + std::to_string(steps));
  }
  const std::size_t rows = x.numel() / steps;
  const std::size_t out_steps = (steps - window) / stride + 1;
  std::vector<real> out(rows * out_steps);
  std::vector<std::size_t> argmax(rows * out_steps);
  const real* px = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const real* row = px + r * steps;
    for (std::size_t t = 0; t < out_steps; ++t) {
      std::size_t best = t * stride;
      for (std::size_t j = best + 1; j < t * stride + window; ++j)
        if (row[j] > row[best]) best = j;
      out[r * out_steps + t] = row[best];
      argmax[r * out_steps + t] = r * steps + best;
    }
  }
  Shape shape = x.shape();
  shape.back() = out_steps;
  Tensor y = make_result(OpKind::maxpool_time, std::move(shape), std::move(out), {x},
                         [argmax = std::move(argmax)](Node& self) {
                           if (real* g = grad_of(self, 0))
                             for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
                         });
  y.node()->attrs = {window, stride};
  return y;
}

// ---------------------------------------------------------------------------
// Structural

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() == 0 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
    throw DimensionError("concat: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t na = a.shape().back(), nb = b.shape().back();
  const std::size_t width = na + nb;
  const std::size_t rows = numel(Shape(a.shape().begin(), a.shape().end() - 1));
  std::vector<real> out(rows * width);
  const real* pa = a.data().data();
  const real* pb = b.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(pa + r * na, pa + (r + 1) * na, out.begin() + static_cast<std::ptrdiff_t>(r * width));
    std::copy(pb + r * nb, pb + (r + 1) * nb,
              out.begin() + static_cast<std::ptrdiff_t>(r * width + na));
  }
  Shape shape = a.shape();
  shape.back() = width;
  return make_result(OpKind::concat, std::move(shape), std::move(out), {a, b},
                     [rows, na, nb](Node& self) {
                       const std::size_t width = na + nb;
                       if (real* ga = grad_of(self, 0))
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < na; ++j) ga[r * na + j] += self.grad[r * width + j];
                       if (real* gb = grad_of(self, 1))
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < nb; ++j)
                             gb[r * nb + j] += self.grad[r * width + na + j];
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<real> out(x.data().begin(), x.data().end());
  return make_result(OpKind::reshape, std::move(shape), std::move(out), {x}, [](Node& self) {
    if (real* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids, std::optional<int> padding_id) {
  require_rank(table, 2, "embedding table");
  const std::size_t vocab = table.dim(0), width = table.dim(1);
  std::vector<real> out(ids.size() * width);
  const real* pt = table.data().data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw DimensionError("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                           std::to_string(vocab) + " rows");
    }
    const real* src = pt + static_cast<std::size_t>(ids[i]) * width;
    std::copy(src, src + width, out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  std::vector<int> id_copy(ids.begin(), ids.end());
  const int pad = padding_id.value_or(-1);
  return make_result(OpKind::embedding, {ids.size(), width}, std::move(out), {table},
                     [width, pad, id_copy = std::move(id_copy)](Node& self) {
                       real* g = grad_of(self, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i < id_copy.size(); ++i) {
                         if (id_copy[i] == pad) continue;
                         real* dst = g + static_cast<std::size_t>(id_copy[i]) * width;
                         for (std::size_t j = 0; j < width; ++j) dst[j] += self.grad[i * width + j];
                       }
                     });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len) {
  require_rank(x, 2, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (start + len > cols) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") outside " + shape_str(x.shape()));
  }
  std::vector<real> out(rows * len);
  const real* px = x.data().data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(px + r * cols + start, px + r * cols + start + len,
              out.begin() + static_cast<std::ptrdiff_t>(r * len));
  return make_result(OpKind::slice_cols, {rows, len}, std::move(out), {x},
                     [rows, cols, start, len](Node& self) {
                       if (real* g = grad_of(self, 0))
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < len; ++j)
                             g[r * cols + start + j] += self.grad[r * len + j];
                     });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_rank(x, 2, "gather_rows");
  const std::size_t total = x.dim(0), width = x.dim(1);
  std::vector<real> out(rows.size() * width);
  const real* px = x.data().data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= total) throw DimensionError("gather_rows: row index out of range");
    std::copy(px + rows[i] * width, px + (rows[i] + 1) * width,
              out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result(OpKind::gather_rows, {rows.size(), width}, std::move(out), {x},
                     [width, idx = std::move(idx)](Node& self) {
                       if (real* g = grad_of(self, 0))
                         for (std::size_t i = 0; i < idx.size(); ++i)
                           for (std::size_t j = 0; j < width; ++j)
                             g[idx[i] * width + j] += self.grad[i * width + j];
                     });
}

Tensor scatter_rows(const Tensor& x, std::span<const std::size_t> rows, std::size_t total) {
  require_rank(x, 2, "scatter_rows");
  const std::size_t width = x.dim(1);
  if (rows.size() != x.dim(0)) {
    throw DimensionError("scatter_rows: " + std::to_string(rows.size()) + " targets for " +
                         std::to_string(x.dim(0)) + " rows");
  }
  std::vector<real> out(total * width, 0.0);
  std::vector<std::uint8_t> used(total, 0);
  const real* px = x.data().data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= total) throw DimensionError("scatter_rows: target row out of range");
    if (used[rows[i]]) throw ContractError("scatter_rows: duplicate target row");
    used[rows[i]] = 1;
    std::copy(px + i * width, px + (i + 1) * width,
              out.begin() + static_cast<std::ptrdiff_t>(rows[i] * width));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result(OpKind::scatter_rows, {total, width}, std::move(out), {x},
                     [width, idx = std::move(idx)](Node& self) {
                       if (real* g = grad_of(self, 0))
                         for (std::size_t i = 0; i < idx.size(); ++i)
                           for (std::size_t j = 0; j < width; ++j)
                             g[i * width + j] += self.grad[idx[i] * width + j];
                     });
}

Tensor stack_time(std::span<const Tensor> steps) {
  if (steps.empty()) throw DimensionError("stack_time: no steps");
  require_rank(steps[0], 2, "stack_time");
  const Shape& step_shape = steps[0].shape();
  const std::size_t rows = step_shape[0], width = step_shape[1], len = steps.size();
  std::vector<real> out(rows * len * width);
  for (std::size_t t = 0; t < len; ++t) {
    if (steps[t].shape() != step_shape) {
      throw DimensionError("stack_time: step " + std::to_string(t) + " has shape " +
                           shape_str(steps[t].shape()) + ", expected " + shape_str(step_shape));
    }
    const real* src = steps[t].data().data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(src + r * width, src + (r + 1) * width,
                out.begin() + static_cast<std::ptrdiff_t>((r * len + t) * width));
  }
  std::vector<Tensor> inputs(steps.begin(), steps.end());
  return make_result(OpKind::stack_time, {rows, len, width}, std::move(out), std::move(inputs),
                     [rows, len, width](Node& self) {
                       for (std::size_t t = 0; t < len; ++t) {
                         real* g = grad_of(self, t);
                         if (!g) continue;
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < width; ++j)
                             g[r * width + j] += self.grad[(r * len + t) * width + j];
                       }
                     });
}

Tensor time_slice(const Tensor& x, std::size_t t) {
  require_rank(x, 3, "time_slice");
  const std::size_t rows = x.dim(0), len = x.dim(1), width = x.dim(2);
  if (t >= len) throw DimensionError("time_slice: step out of range for " + shape_str(x.shape()));
  std::vector<real> out(rows * width);
  const real* px = x.data().data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(px + (r * len + t) * width, px + (r * len + t + 1) * width,
              out.begin() + static_cast<std::ptrdiff_t>(r * width));
  return make_result(OpKind::time_slice, {rows, width}, std::move(out), {x},
                     [rows, len, width, t](Node& self) {
                       if (real* g = grad_of(self, 0))
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < width; ++j)
                             g[(r * len + t) * width + j] += self.grad[r * width + j];
                     });
}

Tensor where_rows(std::span<const std::uint8_t> mask, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "where_rows");
  require_same_shape(a, b, "where_rows");
  const std::size_t rows = a.dim(0), width = a.dim(1);
  if (mask.size() != rows) throw DimensionError("where_rows: mask length differs from row count");
  std::vector<real> out(rows * width);
  const real* pa = a.data().data();
  const real* pb = b.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const real* src = mask[r] ? pa : pb;
    std::copy(src + r * width, src + (r + 1) * width,
              out.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  Mask keep(mask.begin(), mask.end());
  return make_result(OpKind::where_rows, {rows, width}, std::move(out), {a, b},
                     [width, keep = std::move(keep)](Node& self) {
                       real* ga = grad_of(self, 0);
                       real* gb = grad_of(self, 1);
                       for (std::size_t r = 0; r < keep.size(); ++r) {
                         real* g = keep[r] ? ga : gb;
                         if (!g) continue;
                         for (std::size_t j = 0; j < width; ++j)
                           g[r * width + j] += self.grad[r * width + j];
                       }
                     });
}

Tensor weighted_sum_time(const Tensor& alpha, const Tensor& h) {
  require_rank(alpha, 2, "weighted_sum_time weights");
  require_rank(h, 3, "weighted_sum_time values");
  const std::size_t rows = h.dim(0), len = h.dim(1), width = h.dim(2);
  if (alpha.dim(0) != rows || alpha.dim(1) != len) {
    throw DimensionError("weighted_sum_time: weights " + shape_str(alpha.shape()) +
                         " do not match values " + shape_str(h.shape()));
  }
  std::vector<real> out(rows * width, 0.0);
  const real* pa = alpha.data().data();
  const real* ph = h.data().data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < len; ++t) {
      const real a = pa[r * len + t];
      if (a == 0.0) continue;
      const real* src = ph + (r * len + t) * width;
      for (std::size_t j = 0; j < width; ++j) out[r * width + j] += a * src[j];
    }
  return make_result(OpKind::weighted_sum_time, {rows, width}, std::move(out), {alpha, h},
                     [rows, len, width](Node& self) {
                       const real* pa = value_of(self, 0);
                       const real* ph = value_of(self, 1);
                       const real* up = self.grad.data();
                       real* galpha = grad_of(self, 0);
                       real* gh = grad_of(self, 1);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t t = 0; t < len; ++t) {
                           const std::size_t base = (r * len + t) * width;
                           if (galpha) {
                             real acc = 0.0;
                             for (std::size_t j = 0; j < width; ++j) acc += up[r * width + j] * ph[base + j];
                             galpha[r * len + t] += acc;
                           }
                           if (gh) {
                             const real a = pa[r * len + t];
                             for (std::size_t j = 0; j < width; ++j) gh[base + j] += a * up[r * width + j];
                           }
                         }
                     });
}

}  // namespace genre
