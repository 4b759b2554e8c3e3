// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "genre/ops.hpp"
#include "genre/rng.hpp"
#include "genre/tensor.hpp"

namespace genre {

/// One convolution block: conv_time -> batchnorm -> relu -> maxpool_time
/// (when pool_window > 0, stride = window) -> dropout.
struct CnnBlockSpec {
  std::size_t out_channels = 0;
  std::size_t kernel_len = 1;
  std::size_t stride = 1;
  std::size_t pool_window = 0;
  double dropout_p = 0.0;

  bool operator==(const CnnBlockSpec&) const = default;
};

/// Mel bins are the input channels; kernels slide along time only.
struct CnnConfig {
  std::size_t input_mels = 500;
  std::size_t input_frames = 1500;
  std::size_t feature_dim = 500;
  std::vector<CnnBlockSpec> blocks;

  /// 4 blocks, widths 256/256/384/500, kernels 8/8/4/4, pools 4/4/4/-,
  /// dropout `dropout_p` after each pooled block.
  static CnnConfig standard(double dropout_p = 0.5);

  bool operator==(const CnnConfig&) const = default;
};

/// "out:kernel:stride:pool" comma-separated, e.g. "256:8:1:4,500:4:1:0".
/// Dropout `dropout_p` is attached to every block that pools.
std::vector<CnnBlockSpec> parse_block_stack(const std::string& text, double dropout_p);
std::string format_block_stack(const std::vector<CnnBlockSpec>& blocks);

/// Time length left after each block; throws ConfigError if the stack does not
/// fit the input grid.
std::vector<std::size_t> block_output_lengths(const CnnConfig& cfg);

struct CnnBlockParams {
  Tensor kernel;  // [out x in x k]
  Tensor gamma;   // [out]
  Tensor beta;    // [out]
  RunningStats stats;
};

struct CnnParams {
  std::vector<CnnBlockParams> blocks;
  Tensor proj_weight;  // [feature_dim x last_channels]
  Tensor proj_bias;    // [feature_dim]
};

/// Kernels uniform in +-sqrt(6 / fan_in), gamma 1, beta 0, projection He
/// uniform with zero bias. The convolutions carry no bias of their own; the
/// batchnorm shift plays that role.
CnnParams init_cnn(const CnnConfig& cfg, Rng& rng);

Tensor cnn_block(const Tensor& x, const CnnBlockSpec& spec, CnnBlockParams& params, Mode mode, Rng& rng);

/// [B x mels x frames] -> [B x feature_dim]: the block stack, a global max over
/// the remaining time axis, and a linear projection.
Tensor cnn_forward(const Tensor& spectrograms, const CnnConfig& cfg, CnnParams& params, Mode mode, Rng& rng);

}  // namespace genre
