// SPDX-License-Identifier: Apache-2.0
#include "genre/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <set>

#include "genre/binary_io.hpp"
#include "genre/cnn.hpp"
#include "genre/error.hpp"

namespace genre {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true or false, got '" + std::string(text) + "'");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    out.emplace_back(trim(text.substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  Setter set;
  Getter get;
};

const std::map<std::string, Key, std::less<>>& keys() {
  static const std::map<std::string, Key, std::less<>> table = [] {
    std::map<std::string, Key, std::less<>> k;
    auto size_key = [&](const char* name, auto field) {
      k[name] = {[field](RunConfig& c, std::string_view key, std::string_view v) {
                   field(c) = parse_number<std::size_t>(key, v);
                 },
                 [field](const RunConfig& c) { return std::to_string(field(c)); }};
    };
    auto real_key = [&](const char* name, auto field) {
      k[name] = {[field](RunConfig& c, std::string_view key, std::string_view v) {
                   field(c) = parse_number<double>(key, v);
                 },
                 [field](const RunConfig& c) { return num(field(c)); }};
    };
    auto bool_key = [&](const char* name, auto field) {
      k[name] = {[field](RunConfig& c, std::string_view key, std::string_view v) { field(c) = parse_bool(key, v); },
                 [field](const RunConfig& c) { return std::string(field(c) ? "true" : "false"); }};
    };
    auto text_key = [&](const char* name, auto field) {
      k[name] = {[field](RunConfig& c, std::string_view, std::string_view v) { field(c) = std::string(v); },
                 [field](const RunConfig& c) { return field(c); }};
    };

    real_key("lr", [](auto& c) -> auto& { return c.train.lr; });
    real_key("momentum", [](auto& c) -> auto& { return c.train.momentum; });
    size_key("batch_size", [](auto& c) -> auto& { return c.train.batch_size; });
    size_key("epochs", [](auto& c) -> auto& { return c.train.epochs; });
    k["seed"] = {[](RunConfig& c, std::string_view key, std::string_view v) {
                   c.train.seed = parse_number<std::uint64_t>(key, v);
                 },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }};
    real_key("lr_decay", [](auto& c) -> auto& { return c.train.lr_decay; });
    size_key("plateau_patience", [](auto& c) -> auto& { return c.train.plateau_patience; });
    bool_key("class_weights", [](auto& c) -> auto& { return c.train.class_weights; });

    size_key("n_fft", [](auto& c) -> auto& { return c.audio.n_fft; });
    size_key("hop", [](auto& c) -> auto& { return c.audio.hop; });
    size_key("n_mels", [](auto& c) -> auto& { return c.audio.n_mels; });
    size_key("frames", [](auto& c) -> auto& { return c.audio.frames; });
    real_key("fmin", [](auto& c) -> auto& { return c.audio.fmin; });
    real_key("fmax", [](auto& c) -> auto& { return c.audio.fmax; });
    real_key("floor_db", [](auto& c) -> auto& { return c.audio.floor_db; });
    k["sample_rate"] = {[](RunConfig& c, std::string_view key, std::string_view v) {
                          c.audio.sample_rate = parse_number<std::uint32_t>(key, v);
                        },
                        [](const RunConfig& c) { return std::to_string(c.audio.sample_rate); }};
    k["window"] = {[](RunConfig& c, std::string_view key, std::string_view v) {
                     if (v == "hann") {
                       c.audio.window = WindowKind::hann;
                     } else if (v == "rectangular") {
                       c.audio.window = WindowKind::rectangular;
                     } else {
                       throw ConfigError("config key '" + std::string(key) + "': expected hann or rectangular");
                     }
                   },
                   [](const RunConfig& c) {
                     return std::string(c.audio.window == WindowKind::hann ? "hann" : "rectangular");
                   }};

    text_key("cnn_blocks", [](auto& c) -> auto& { return c.cnn_blocks; });
    real_key("cnn_dropout", [](auto& c) -> auto& { return c.cnn_dropout; });
    size_key("cnn_features", [](auto& c) -> auto& { return c.cnn_features; });
    size_key("embed_dim", [](auto& c) -> auto& { return c.han.embed_dim; });
    size_key("han_hidden", [](auto& c) -> auto& { return c.han.hidden; });
    size_key("attention_dim", [](auto& c) -> auto& { return c.han.attention_dim; });
    size_key("max_sentences", [](auto& c) -> auto& { return c.max_sentences; });
    size_key("max_words", [](auto& c) -> auto& { return c.max_words; });
    k["labels"] = {[](RunConfig& c, std::string_view, std::string_view v) { c.labels = split_list(v); },
                   [](const RunConfig& c) {
                     std::string out;
                     for (const auto& l : c.labels) out += (out.empty() ? "" : ",") + l;
                     return out;
                   }};
    bool_key("embeddings_trainable", [](auto& c) -> auto& { return c.embeddings_trainable; });
    size_key("vocab_min_count", [](auto& c) -> auto& { return c.vocab_min_count; });
    k["split_fractions"] = {[](RunConfig& c, std::string_view key, std::string_view v) {
                              const auto parts = split_list(v);
                              if (parts.size() != 3) {
                                throw ConfigError("config key '" + std::string(key) + "': expected train,val,test");
                              }
                              for (std::size_t i = 0; i < 3; ++i) c.split_fractions[i] = parse_number<double>(key, parts[i]);
                            },
                            [](const RunConfig& c) {
                              return num(c.split_fractions[0]) + "," + num(c.split_fractions[1]) + "," +
                                     num(c.split_fractions[2]);
                            }};
    k["split_seed"] = {[](RunConfig& c, std::string_view key, std::string_view v) {
                         if (v.empty()) {
                           c.split_seed.reset();  // follow the training seed
                         } else {
                           c.split_seed = parse_number<std::uint64_t>(key, v);
                         }
                       },
                       [](const RunConfig& c) {
                         return c.split_seed ? std::to_string(*c.split_seed) : std::string();
                       }};

    text_key("manifest", [](auto& c) -> auto& { return c.manifest; });
    text_key("embeddings", [](auto& c) -> auto& { return c.embeddings; });
    text_key("cache_dir", [](auto& c) -> auto& { return c.cache_dir; });
    text_key("out", [](auto& c) -> auto& { return c.out_dir; });
    return k;
  }();
  return table;
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.cnn.input_mels = audio.n_mels;
  m.cnn.input_frames = audio.frames;
  m.cnn.feature_dim = cnn_features;
  m.cnn.blocks = parse_block_stack(cnn_blocks, cnn_dropout);
  m.han = han;
  m.max_sentences = max_sentences;
  m.max_words = max_words;
  m.labels = labels;
  m.embeddings_trainable = embeddings_trainable;
  return m;
}

void RunConfig::validate() const {
  train.validate();
  genre::validate(audio);
  if (!(cnn_dropout >= 0.0 && cnn_dropout < 1.0)) throw ConfigError("cnn_dropout must lie in [0, 1)");
  if (cnn_features == 0) throw ConfigError("cnn_features must be positive");
  if (vocab_min_count == 0) throw ConfigError("vocab_min_count must be at least 1");
  double total = 0.0;
  for (double f : split_fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  model_config().validate();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, v] : keys()) out.push_back(k);
  return out;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  const auto it = keys().find(key);
  if (it == keys().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second.set(cfg, key, trim(value));
}

void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    if (!seen.insert(std::string(key)).second) throw ConfigError(where + "key '" + std::string(key) + "' repeated");
    try {
      apply_setting(cfg, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  const std::string text = read_file_text(path);
  try {
    apply_config_text(cfg, text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : keys()) out += k + " = " + v.get(cfg) + "\n";
  return out;
}

}  // namespace genre
