// SPDX-License-Identifier: Apache-2.0
#include "genre/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "genre/error.hpp"
#include "genre/ops.hpp"

namespace genre {

std::vector<std::string> default_genres() {
  return {"Rock",         "Electronic", "Experimental", "Hip-Hop",           "Folk",   "Instrumental",
          "Pop",          "International", "Classical", "Old-Time / Historic", "Jazz", "Country",
          "Soul-RnB",     "Spoken",     "Blues",        "Easy Listening"};
}

void ModelConfig::validate() const {
  block_output_lengths(cnn);
  if (han.embed_dim == 0 || han.hidden == 0 || han.attention_dim == 0) {
    throw ConfigError("han sizes must be positive");
  }
  if (max_sentences == 0 || max_words == 0) throw ConfigError("lyrics grid sizes must be positive");
  if (labels.size() < 2) throw ConfigError("at least two labels are required");
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (l.empty()) throw ConfigError("empty label name");
    if (!seen.insert(l).second) throw ConfigError("duplicate label '" + l + "'");
  }
}

int ModelConfig::label_id(const std::string& genre) const {
  const auto it = std::find(labels.begin(), labels.end(), genre);
  return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

Tensor fuse_logits(const Tensor& han, const Tensor& cnn, const FusionParams& p) {
  if (han.rank() != 2 || cnn.rank() != 2 || han.dim(0) != cnn.dim(0)) {
    throw DimensionError("fusion: branch outputs " + shape_str(han.shape()) + " and " + shape_str(cnn.shape()) +
                         " do not form a batch");
  }
  if (p.w.dim(1) != han.dim(1) + cnn.dim(1)) {
    throw DimensionError("fusion: W_p " + shape_str(p.w.shape()) + " expects " + std::to_string(p.w.dim(1)) +
                         " features, got " + std::to_string(han.dim(1) + cnn.dim(1)));
  }
  return linear(concat(han, cnn), p.w, p.b);
}

Tensor fuse_classify(const Tensor& han_vec, const Tensor& cnn_vec, const FusionParams& p) {
  if (han_vec.rank() != 1 || cnn_vec.rank() != 1) throw DimensionError("fuse_classify expects two vectors");
  const Tensor logits = fuse_logits(reshape(han_vec, {1, han_vec.dim(0)}), reshape(cnn_vec, {1, cnn_vec.dim(0)}), p);
  return softmax(reshape(logits, {p.w.dim(0)}));
}

Model::Model(ModelConfig config, Tensor embeddings, Rng& rng) : config_(std::move(config)) {
  config_.validate();
  if (embeddings.rank() != 2 || embeddings.dim(1) != config_.han.embed_dim) {
    throw DimensionError("model: embedding table " + shape_str(embeddings.shape()) + " does not have width " +
                         std::to_string(config_.han.embed_dim));
  }
  embeddings_ = embeddings;
  cnn_ = init_cnn(config_.cnn, rng);
  han_ = init_han(config_.han, rng);
  const std::size_t f = config_.fused_dim(), g = config_.classes();
  const double bound = std::sqrt(6.0 / static_cast<double>(f + g));
  std::vector<real> w(g * f);
  for (real& x : w) x = rng.uniform(-bound, bound);
  fusion_.w = Tensor::parameter({g, f}, std::move(w));
  fusion_.b = Tensor::parameter({g}, std::vector<real>(g, 0.0));
}

namespace {

void add_gru(std::vector<NamedTensor>& out, const std::string& name, const GruParams& g) {
  out.push_back({name + ".w", g.w});
  out.push_back({name + ".u", g.u});
  out.push_back({name + ".b", g.b});
}

void add_attention(std::vector<NamedTensor>& out, const std::string& name, const AttentionParams& a) {
  out.push_back({name + ".w", a.w});
  out.push_back({name + ".b", a.b});
  out.push_back({name + ".context", a.context});
}

}  // namespace

std::vector<NamedTensor> Model::state_tensors() {
  std::vector<NamedTensor> out;
  out.push_back({"embeddings", embeddings_});
  for (std::size_t i = 0; i < cnn_.blocks.size(); ++i) {
    const std::string prefix = "cnn.block" + std::to_string(i);
    out.push_back({prefix + ".kernel", cnn_.blocks[i].kernel});
    out.push_back({prefix + ".gamma", cnn_.blocks[i].gamma});
    out.push_back({prefix + ".beta", cnn_.blocks[i].beta});
  }
  out.push_back({"cnn.proj.w", cnn_.proj_weight});
  out.push_back({"cnn.proj.b", cnn_.proj_bias});
  add_gru(out, "han.word_fwd", han_.word_fwd);
  add_gru(out, "han.word_bwd", han_.word_bwd);
  add_attention(out, "han.word_att", han_.word_att);
  add_gru(out, "han.sent_fwd", han_.sent_fwd);
  add_gru(out, "han.sent_bwd", han_.sent_bwd);
  add_attention(out, "han.sent_att", han_.sent_att);
  out.push_back({"fusion.w", fusion_.w});
  out.push_back({"fusion.b", fusion_.b});
  return out;
}

std::vector<NamedTensor> Model::parameters() {
  std::vector<NamedTensor> out;
  for (auto& t : state_tensors()) {
    if (t.tensor.requires_grad()) out.push_back(std::move(t));
  }
  return out;
}

std::vector<RunningStats*> Model::running_stats() {
  std::vector<RunningStats*> out;
  for (auto& b : cnn_.blocks) out.push_back(&b.stats);
  return out;
}

Tensor spectrogram_batch(std::span<const Sample* const> batch, const CnnConfig& cfg) {
  const std::size_t per = cfg.input_mels * cfg.input_frames;
  std::vector<real> values;
  values.reserve(batch.size() * per);
  for (const Sample* s : batch) {
    if (s->spectrogram.mels != cfg.input_mels || s->spectrogram.frames != cfg.input_frames) {
      throw DimensionError("track '" + s->track_id + "': spectrogram is " + std::to_string(s->spectrogram.mels) +
                           " x " + std::to_string(s->spectrogram.frames) + ", the model expects " +
                           std::to_string(cfg.input_mels) + " x " + std::to_string(cfg.input_frames));
    }
    values.insert(values.end(), s->spectrogram.values.begin(), s->spectrogram.values.end());
  }
  return Tensor::constant({batch.size(), cfg.input_mels, cfg.input_frames}, std::move(values));
}

ForwardOutput Model::forward(std::span<const Sample* const> batch, Mode mode, Rng& rng) {
  if (batch.empty()) throw ContractError("model: empty batch");
  const std::size_t n = batch.size();
  std::vector<const Sample*> audio;
  std::vector<std::size_t> audio_rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (batch[i]->has_audio) {
      audio.push_back(batch[i]);
      audio_rows.push_back(i);
    }
  }
  Tensor cnn_out;
  if (audio.empty()) {
    cnn_out = Tensor::zeros({n, config_.cnn.feature_dim});
  } else {
    // Batch statistics need two tracks; a lone audio track in a training
    // batch goes through the CNN in inference mode.
    const Mode cnn_mode = audio.size() < 2 ? Mode::eval : mode;
    cnn_out = cnn_forward(spectrogram_batch(audio, config_.cnn), config_.cnn, cnn_, cnn_mode, rng);
    if (audio.size() != n) cnn_out = scatter_rows(cnn_out, audio_rows, n);
  }
  std::vector<const TokenGrid*> grids(n);
  for (std::size_t i = 0; i < n; ++i) grids[i] = &batch[i]->lyrics;
  ForwardOutput out;
  out.han = han_forward_batch(grids, embeddings_, config_.han, han_);
  out.logits = fuse_logits(out.han.songs, cnn_out, fusion_);
  return out;
}

}  // namespace genre
