// SPDX-License-Identifier: Apache-2.0
#include "genre/cnn.hpp"

#include <cmath>
#include <sstream>

#include "genre/error.hpp"

namespace genre {

CnnConfig CnnConfig::standard(double dropout_p) {
  CnnConfig cfg;
  cfg.blocks = {
      {256, 8, 1, 4, dropout_p},
      {256, 8, 1, 4, dropout_p},
      {384, 4, 1, 4, dropout_p},
      {500, 4, 1, 0, 0.0},
  };
  return cfg;
}

std::vector<CnnBlockSpec> parse_block_stack(const std::string& text, double dropout_p) {
  std::vector<CnnBlockSpec> blocks;
  std::stringstream all(text);
  std::string item;
  while (std::getline(all, item, ',')) {
    std::stringstream parts(item);
    std::string field;
    std::vector<std::size_t> nums;
    while (std::getline(parts, field, ':')) {
      try {
        std::size_t used = 0;
        const long v = std::stol(field, &used);
        if (used != field.size() || v < 0) throw std::invalid_argument(field);
        nums.push_back(static_cast<std::size_t>(v));
      } catch (const std::exception&) {
        throw ConfigError("block stack: bad number '" + field + "' in '" + item + "'");
      }
    }
    if (nums.size() != 4) throw ConfigError("block stack: '" + item + "' is not out:kernel:stride:pool");
    CnnBlockSpec b{nums[0], nums[1], nums[2], nums[3], nums[3] > 0 ? dropout_p : 0.0};
    if (b.out_channels == 0 || b.kernel_len == 0 || b.stride == 0) {
      throw ConfigError("block stack: channels, kernel and stride must be positive in '" + item + "'");
    }
    blocks.push_back(b);
  }
  if (blocks.empty()) throw ConfigError("block stack is empty");
  return blocks;
}

std::string format_block_stack(const std::vector<CnnBlockSpec>& blocks) {
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(blocks[i].out_channels) + ':' + std::to_string(blocks[i].kernel_len) + ':' +
           std::to_string(blocks[i].stride) + ':' + std::to_string(blocks[i].pool_window);
  }
  return out;
}

std::vector<std::size_t> block_output_lengths(const CnnConfig& cfg) {
  if (cfg.blocks.empty()) throw ConfigError("cnn: no blocks configured");
  if (cfg.input_mels == 0 || cfg.input_frames == 0 || cfg.feature_dim == 0) {
    throw ConfigError("cnn: grid and feature sizes must be positive");
  }
  std::vector<std::size_t> lengths;
  std::size_t t = cfg.input_frames;
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const auto& b = cfg.blocks[i];
    if (b.kernel_len == 0 || b.stride == 0 || b.out_channels == 0) {
      throw ConfigError("cnn: block " + std::to_string(i) + " has a zero size");
    }
    if (!(b.dropout_p >= 0.0 && b.dropout_p < 1.0)) {
      throw ConfigError("cnn: block " + std::to_string(i) + " dropout must lie in [0, 1)");
    }
    if (b.kernel_len > t) {
      throw ConfigError("cnn: block " + std::to_string(i) + " kernel " + std::to_string(b.kernel_len) +
                        " exceeds remaining time length " + std::to_string(t));
    }
    t = (t - b.kernel_len) / b.stride + 1;
    if (b.pool_window > 0) {
      if (b.pool_window > t) {
        throw ConfigError("cnn: block " + std::to_string(i) + " pool window " +
                          std::to_string(b.pool_window) + " exceeds time length " + std::to_string(t));
      }
      t = (t - b.pool_window) / b.pool_window + 1;
    }
    lengths.push_back(t);
  }
  return lengths;
}

namespace {

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
  std::vector<real> v(numel(shape));
  for (real& x : v) x = rng.uniform(-bound, bound);
  return Tensor::parameter(std::move(shape), std::move(v));
}

}  // namespace

CnnParams init_cnn(const CnnConfig& cfg, Rng& rng) {
  block_output_lengths(cfg);
  CnnParams p;
  std::size_t in = cfg.input_mels;
  for (const auto& b : cfg.blocks) {
    CnnBlockParams bp;
    const double fan_in = static_cast<double>(in * b.kernel_len);
    bp.kernel = uniform_param({b.out_channels, in, b.kernel_len}, std::sqrt(6.0 / fan_in), rng);
    bp.gamma = Tensor::parameter({b.out_channels}, std::vector<real>(b.out_channels, 1.0));
    bp.beta = Tensor::parameter({b.out_channels}, std::vector<real>(b.out_channels, 0.0));
    bp.stats = RunningStats(b.out_channels);
    p.blocks.push_back(std::move(bp));
    in = b.out_channels;
  }
  p.proj_weight = uniform_param({cfg.feature_dim, in}, std::sqrt(6.0 / static_cast<double>(in)), rng);
  p.proj_bias = Tensor::parameter({cfg.feature_dim}, std::vector<real>(cfg.feature_dim, 0.0));
  return p;
}

Tensor cnn_block(const Tensor& x, const CnnBlockSpec& spec, CnnBlockParams& params, Mode mode, Rng& rng) {
  Tensor y = conv_time(x, params.kernel, spec.stride);
  y = batchnorm(y, params.gamma, params.beta, params.stats, mode);
  y = relu(y);
  if (spec.pool_window > 0) y = maxpool_time(y, spec.pool_window, spec.pool_window);
  return dropout(y, spec.dropout_p, rng, mode);
}

Tensor cnn_forward(const Tensor& spectrograms, const CnnConfig& cfg, CnnParams& params, Mode mode, Rng& rng) {
  if (spectrograms.rank() != 3 || spectrograms.dim(1) != cfg.input_mels ||
      spectrograms.dim(2) != cfg.input_frames) {
    throw DimensionError("cnn: expected input [B x " + std::to_string(cfg.input_mels) + " x " +
                         std::to_string(cfg.input_frames) + "], got " + shape_str(spectrograms.shape()));
  }
  if (params.blocks.size() != cfg.blocks.size()) {
    throw DimensionError("cnn: parameter blocks do not match the configuration");
  }
  Tensor h = spectrograms;
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) h = cnn_block(h, cfg.blocks[i], params.blocks[i], mode, rng);
  const std::size_t batch = h.dim(0), channels = h.dim(1);
  h = maxpool_time(h, h.dim(2), h.dim(2));
  h = reshape(h, {batch, channels});
  return linear(h, params.proj_weight, params.proj_bias);
}

}  // namespace genre
