// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "genre/model.hpp"
#include "genre/spectrogram.hpp"
#include "genre/trainer.hpp"

namespace genre {

/// Every setting a command can take from a config file or a flag.
struct RunConfig {
  TrainConfig train;
  SpectrogramConfig audio;
  std::string cnn_blocks = "256:8:1:4,256:8:1:4,384:4:1:4,500:4:1:0";
  double cnn_dropout = 0.5;
  std::size_t cnn_features = 500;
  HanConfig han;
  std::size_t max_sentences = kDefaultMaxSentences;
  std::size_t max_words = kDefaultMaxWords;
  std::vector<std::string> labels = default_genres();
  bool embeddings_trainable = true;
  std::size_t vocab_min_count = 1;
  std::array<double, 3> split_fractions{0.8, 0.1, 0.1};
  std::optional<std::uint64_t> split_seed;  // defaults to the training seed

  std::string manifest;
  std::string embeddings;
  std::string cache_dir;
  std::string out_dir;

  /// Model shape implied by the settings: CNN input grid = audio n_mels x frames.
  ModelConfig model_config() const;
  /// ConfigError describing the first inconsistent setting.
  void validate() const;
};

/// Keys accepted by apply_setting, sorted.
std::vector<std::string> config_keys();

/// Sets one key from its text value. ConfigError on an unknown key or a value
/// that does not parse completely.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Parses "key = value" lines; '#' starts a comment. Unknown and repeated keys
/// are errors naming the line.
void apply_config_text(RunConfig& cfg, std::string_view text);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Canonical "key = value" rendering of every setting.
std::string format_config(const RunConfig& cfg);

}  // namespace genre
