// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "genre/cnn.hpp"
#include "genre/gradcheck.hpp"
#include "genre/han.hpp"
#include "genre/lyrics.hpp"
#include "genre/spectrogram.hpp"

namespace genre {

/// The 16 top-level genres, in the order used for label ids.
std::vector<std::string> default_genres();

struct ModelConfig {
  CnnConfig cnn = CnnConfig::standard();
  HanConfig han;
  std::size_t max_sentences = kDefaultMaxSentences;
  std::size_t max_words = kDefaultMaxWords;
  std::vector<std::string> labels = default_genres();
  bool embeddings_trainable = true;

  std::size_t classes() const { return labels.size(); }
  std::size_t fused_dim() const { return han.output_dim() + cnn.feature_dim; }
  /// ConfigError on inconsistent sizes or duplicate labels.
  void validate() const;
  int label_id(const std::string& genre) const;  // -1 when absent

  bool operator==(const ModelConfig&) const = default;
};

struct FusionParams {
  Tensor w;  // [G x F]
  Tensor b;  // [G]
};

/// Logits W_p [han ; cnn] + b_p for a batch: han [B x 2H], cnn [B x C].
Tensor fuse_logits(const Tensor& han, const Tensor& cnn, const FusionParams& p);

/// Single-track probabilities softmax(W_p [han ; cnn] + b_p), vectors in.
Tensor fuse_classify(const Tensor& han_vec, const Tensor& cnn_vec, const FusionParams& p);

/// One training or inference example.
struct Sample {
  std::string track_id;
  int label = -1;
  bool has_audio = true;
  Spectrogram spectrogram;  // ignored when has_audio is false
  TokenGrid lyrics;
};

struct ForwardOutput {
  Tensor logits;  // [B x G]
  HanBatchOutput han;
};

class Model {
 public:
  /// Fresh parameters drawn from `rng` in a fixed order: CNN, HAN, fusion.
  Model(ModelConfig config, Tensor embeddings, Rng& rng);

  const ModelConfig& config() const { return config_; }
  Tensor& embeddings() { return embeddings_; }
  const Tensor& embeddings() const { return embeddings_; }
  CnnParams& cnn() { return cnn_; }
  HanParams& han() { return han_; }
  FusionParams& fusion() { return fusion_; }

  /// Every trainable tensor under a stable dotted name. The embedding table
  /// is listed only when it is trainable.
  std::vector<NamedTensor> parameters();
  /// Every tensor that a checkpoint stores, trainable or not.
  std::vector<NamedTensor> state_tensors();
  /// Batchnorm running statistics by block.
  std::vector<RunningStats*> running_stats();

  /// Batched forward. Tracks without audio get a zero CNN vector; tracks
  /// without lyrics a zero HAN vector.
  ForwardOutput forward(std::span<const Sample* const> batch, Mode mode, Rng& rng);

 private:
  ModelConfig config_;
  Tensor embeddings_;
  CnnParams cnn_;
  HanParams han_;
  FusionParams fusion_;
};

/// Spectrograms of a batch as a [B x mels x frames] constant. DimensionError
/// if any sample does not match the configured grid.
Tensor spectrogram_batch(std::span<const Sample* const> batch, const CnnConfig& cfg);

}  // namespace genre
