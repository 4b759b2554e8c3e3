// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "genre/lyrics.hpp"
#include "genre/model.hpp"
#include "genre/trainer.hpp"

namespace genre {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointBlob {
  Shape shape;
  std::vector<real> values;
  bool operator==(const CheckpointBlob&) const = default;
};

/// Everything needed to predict with a model or resume its training.
/// Blob names: "param/<tensor>", "stats/<block>.mean|var", "velocity/<tensor>".
struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  SpectrogramConfig audio;  // how WAV input is turned into the model's grid
  std::vector<std::string> vocab_tokens;  // real tokens in id order from 2
  TrainerState state;
  std::map<std::string, CheckpointBlob> blobs;

  bool operator==(const Checkpoint&) const = default;
};

Checkpoint make_checkpoint(Model& model, const Vocab& vocab, const TrainConfig& train, const TrainerState& state,
                           const NesterovSgd* optimizer, const SpectrogramConfig& audio = {});

/// "GFCK", u16 version, u64 JSON length, JSON (model, training and audio
/// settings, vocabulary, trainer state), u32 blob count, then per blob: u16 name length, name, u8 dtype
/// (1 = f32, 2 = f64), u8 rank, u64 dims, little-endian payload. Blobs are
/// written as f64 so a round trip is bitwise exact.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// FormatError on malformed bytes, CheckpointError on an unsupported version.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model (parameters and running statistics) from a
/// checkpoint. CheckpointError when a tensor is missing or has the wrong shape.
std::unique_ptr<Model> restore_model(const Checkpoint& ckpt);
/// Loads velocities and trainer counters into `trainer`.
void restore_trainer(const Checkpoint& ckpt, Trainer& trainer);
Vocab checkpoint_vocab(const Checkpoint& ckpt);

/// Config <-> JSON text, strict about unknown keys.
std::string model_config_json(const ModelConfig& cfg);
ModelConfig parse_model_config_json(std::string_view text);

}  // namespace genre
