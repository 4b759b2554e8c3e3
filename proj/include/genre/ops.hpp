// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "genre/rng.hpp"
#include "genre/tensor.hpp"

namespace genre {

// Dense linear algebra --------------------------------------------------------

/// [m x k] . [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// x [m x k] times weight [n x k] transposed, plus optional bias [n]: [m x n].
/// Each output row depends only on the matching input row.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

// Elementwise -----------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, real factor);
/// Sum of all elements as a rank-0 tensor.
Tensor sum(const Tensor& x);

enum class Activation { relu, tanh, sigmoid };

Tensor elementwise(Activation kind, const Tensor& x);
inline Tensor relu(const Tensor& x) { return elementwise(Activation::relu, x); }
inline Tensor tanh(const Tensor& x) { return elementwise(Activation::tanh, x); }
inline Tensor sigmoid(const Tensor& x) { return elementwise(Activation::sigmoid, x); }

// Normalization and losses ----------------------------------------------------

/// Softmax along the last axis of a vector or of each matrix row, computed with
/// max subtraction. Masked entries (mask byte 0) get exactly 0; a row with no
/// unmasked entry raises ContractError.
Tensor softmax(const Tensor& x, std::span<const std::uint8_t> mask = {});

/// Mean over the batch of -log(softmax(logits)[label]), with the probability
/// clamped at 1e-12 before the log. logits is [B x G] (or [G] for B = 1).
/// Optional per-sample weights multiply each term. The backward rule is the
/// fused (p - onehot) * weight / B; the clamp is not differentiated.
/// If `probs_out` is given it receives the B x G probabilities.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels,
                             std::span<const real> sample_weights = {},
                             std::vector<real>* probs_out = nullptr);

struct RunningStats {
  std::vector<real> mean;
  std::vector<real> var;

  RunningStats() = default;
  explicit RunningStats(std::size_t channels) : mean(channels, 0.0), var(channels, 1.0) {}
};

inline constexpr real kBatchNormEpsilon = 1e-5;
inline constexpr real kBatchNormMomentum = 0.1;

/// Per-channel batch normalization of [B x C x T] or [B x C] input.
/// Train mode normalizes with the batch statistics over (batch, time), using
/// the biased variance, and folds them into `stats` with momentum 0.1 (the
/// running variance takes the unbiased estimate). Eval mode uses `stats`.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, RunningStats& stats,
                 Mode mode);

/// Inverted dropout. Train mode zeroes each element with probability p and
/// scales survivors by 1/(1-p); eval mode and p == 0 return x unchanged.
Tensor dropout(const Tensor& x, real p, Rng& rng, Mode mode);

// Temporal convolution and pooling --------------------------------------------

/// Valid 1-D cross-correlation along time. x is [C_in x T] or [B x C_in x T],
/// kernels [C_out x C_in x k]. Output length floor((T - k) / stride) + 1.
Tensor conv_time(const Tensor& x, const Tensor& kernels, std::size_t stride = 1);

/// Per-channel max over windows along the last axis. x is [C x T] or
/// [B x C x T]. Gradient goes to the first maximal position of each window.
Tensor maxpool_time(const Tensor& x, std::size_t window, std::size_t stride);

// Structural ------------------------------------------------------------------

/// Concatenation along the last axis; all leading dims must agree.
Tensor concat(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& x, Shape shape);

/// Row lookup table[ids] -> [n x D]. Rows equal to `padding_id` receive no
/// gradient, so the padding row never changes during training.
Tensor embedding(const Tensor& table, std::span<const int> ids,
                 std::optional<int> padding_id = std::nullopt);

/// Columns [start, start + len) of a matrix.
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len);

/// Rows of a matrix picked by index (repeats allowed).
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

/// Places row i of x at row rows[i] of a zero [total x n] matrix. Targets
/// must be distinct.
Tensor scatter_rows(const Tensor& x, std::span<const std::size_t> rows, std::size_t total);

/// L tensors of shape [R x d] -> [R x L x d].
Tensor stack_time(std::span<const Tensor> steps);

/// Step t of [R x L x d] -> [R x d].
Tensor time_slice(const Tensor& x, std::size_t t);

/// Row r of the result is a[r] if mask[r] else b[r]. a, b are [R x d].
Tensor where_rows(std::span<const std::uint8_t> mask, const Tensor& a, const Tensor& b);

/// s[r] = sum_t alpha[r, t] * h[r, t, :]. alpha [R x L], h [R x L x d].
/// Positions with alpha exactly 0 are left out of the forward sum, so values
/// stored at masked positions cannot perturb the result.
Tensor weighted_sum_time(const Tensor& alpha, const Tensor& h);

}  // namespace genre
