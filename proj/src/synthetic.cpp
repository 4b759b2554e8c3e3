// SPDX-License-Identifier: Apache-2.0
#include "genre/synthetic.hpp"

#include "genre/error.hpp"

namespace genre {

namespace {
constexpr std::size_t kClassWords = 6;
const char* const kFiller[] = {"the", "and", "we", "you", "night", "road"};
}  // namespace

ModelConfig tiny_model_config(std::vector<std::string> labels) {
  ModelConfig cfg;
  cfg.cnn.input_mels = 8;
  cfg.cnn.input_frames = 60;
  cfg.cnn.feature_dim = 6;
  cfg.cnn.blocks = {{5, 4, 1, 2, 0.0}, {4, 3, 1, 2, 0.0}, {6, 3, 1, 0, 0.0}};
  cfg.han.embed_dim = 6;
  cfg.han.hidden = 4;
  cfg.han.attention_dim = 5;
  cfg.max_sentences = 4;
  cfg.max_words = 6;
  cfg.labels = std::move(labels);
  cfg.validate();
  return cfg;
}

Vocab synthetic_vocab(std::size_t classes) {
  std::vector<std::string> tokens;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t j = 0; j < kClassWords; ++j) tokens.push_back("c" + std::to_string(c) + "w" + std::to_string(j));
  for (const char* w : kFiller) tokens.emplace_back(w);
  return Vocab::from_tokens(std::move(tokens));
}

std::string synthetic_lyrics(std::size_t cls, Rng& rng) {
  std::string text;
  const std::size_t lines = 2 + rng.below(3);
  for (std::size_t l = 0; l < lines; ++l) {
    const std::size_t words = 3 + rng.below(4);
    for (std::size_t w = 0; w < words; ++w) {
      if (w) text += ' ';
      if (rng.bernoulli(0.75)) {
        text += "c" + std::to_string(cls) + "w" + std::to_string(rng.below(kClassWords));
      } else {
        text += kFiller[rng.below(std::size(kFiller))];
      }
    }
    text += '\n';
  }
  return text;
}

Spectrogram synthetic_spectrogram(std::size_t cls, std::size_t classes, std::size_t mels, std::size_t frames,
                                  Rng& rng) {
  Spectrogram s;
  s.mels = mels;
  s.frames = frames;
  s.values.resize(mels * frames);
  for (float& v : s.values) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  const std::size_t band = cls * mels / std::max<std::size_t>(classes, 1);
  const std::size_t period = 3 + cls;
  const std::size_t phase = rng.below(period);
  for (std::size_t t = 0; t < frames; ++t) {
    s.values[band * frames + t] += 1.0f;
    if (t % period == phase) {
      for (std::size_t m = 0; m < mels; ++m) s.values[m * frames + t] += (m == band) ? 2.0f : 0.5f;
    }
  }
  return s;
}

std::vector<Sample> synthetic_samples(const ModelConfig& cfg, const Vocab& vocab, std::size_t per_class,
                                      std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> out;
  const std::size_t classes = cfg.classes();
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Sample s;
      s.track_id = "syn" + std::to_string(c) + "_" + std::to_string(i);
      s.label = static_cast<int>(c);
      s.spectrogram = synthetic_spectrogram(c, classes, cfg.cnn.input_mels, cfg.cnn.input_frames, rng);
      s.lyrics = encode_lyrics(synthetic_lyrics(c, rng), vocab, cfg.max_sentences, cfg.max_words);
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<TrackRecord> synthetic_manifest(std::size_t classes, std::size_t artists, std::uint64_t seed,
                                            const std::vector<std::string>& labels) {
  if (labels.size() < classes) throw ContractError("synthetic_manifest: fewer labels than classes");
  Rng rng(seed);
  std::vector<TrackRecord> out;
  for (std::size_t a = 0; a < artists; ++a) {
    const std::size_t main = a % classes;
    const std::size_t n = 1 + rng.below(12);
    const bool mixed = classes > 1 && rng.below(8) == 0;
    const std::size_t other = mixed ? (main + 1 + rng.below(classes - 1)) % classes : main;
    for (std::size_t i = 0; i < n; ++i) {
      TrackRecord t;
      t.track_id = "a" + std::to_string(a) + "t" + std::to_string(i);
      t.artist_id = "artist" + std::to_string(a);
      t.genre = labels[(mixed && i % 3 == 2) ? other : main];
      t.spectrogram_path = t.track_id + ".mspc";
      out.push_back(std::move(t));
    }
  }
  return out;
}

}  // namespace genre
