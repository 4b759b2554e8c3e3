// SPDX-License-Identifier: Apache-2.0
#include "genre/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <numeric>
#include <optional>
#include <set>
#include <ostream>

#include "genre/binary_io.hpp"
#include "genre/checkpoint.hpp"
#include "genre/config.hpp"
#include "genre/dataset.hpp"
#include "genre/embeddings.hpp"
#include "genre/error.hpp"
#include "genre/gradcheck_suite.hpp"
#include "genre/ops.hpp"
#include "genre/spectrogram.hpp"
#include "genre/trainer.hpp"

namespace genre::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) h = (h ^ b) * 0x100000001b3ULL;
  return h;
}

std::string cache_stem(const std::string& track_id) {
  std::string safe;
  for (char c : track_id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    safe += ok ? c : '_';
  }
  if (safe == track_id && !safe.empty() && safe.front() != '.') return safe;
  char buf[24];
  std::snprintf(buf, sizeof buf, "-%016llx",
                static_cast<unsigned long long>(fnv1a64({reinterpret_cast<const std::uint8_t*>(track_id.data()),
                                                         track_id.size()})));
  return safe + buf;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return kNumeric;
  if (dynamic_cast<const CheckpointError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const DimensionError*>(&e)) {
    return kValidation;
  }
  return kRuntime;
}

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

class Log {
 public:
  Log(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}
  void info(const std::string& msg) const {
    if (!quiet_) err_ << "genre: " << msg << '\n';
  }
  void warn(const std::string& msg) const { err_ << "genre: warning: " << msg << '\n'; }

 private:
  std::ostream& err_;
  bool quiet_;
};

// Options shared by the commands that read a RunConfig.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> settings;  // key=value
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;

  void attach(CLI::App& app, bool training) {
    app.add_option("--config", config_path, "key = value config file");
    app.add_option("--set", settings, "override one config key (key=value), repeatable");
    app.add_option("--seed", seed, "seed for every random choice");
    if (training) {
      app.add_option("--epochs", epochs, "number of epochs");
      app.add_option("--lr", lr, "initial learning rate");
      app.add_option("--batch-size", batch_size, "minibatch size");
    }
  }

  RunConfig load() const {
    RunConfig cfg;
    if (!config_path.empty()) {
      if (!fs::is_regular_file(config_path)) throw ConfigError("config file '" + config_path + "' does not exist");
      apply_config_file(cfg, config_path);
    }
    for (const auto& kv : settings) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.train.seed = *seed;
    if (epochs) cfg.train.epochs = *epochs;
    if (lr) cfg.train.lr = *lr;
    if (batch_size) cfg.train.batch_size = *batch_size;
    cfg.validate();
    return cfg;
  }
};

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " is required");
  if (!fs::is_regular_file(p)) throw ConfigError(what + " '" + p.string() + "' does not exist");
}

fs::path resolve_against(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Every file a manifest points to must exist before any work starts.
void check_manifest_files(const std::vector<TrackRecord>& tracks, const fs::path& base) {
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& t = tracks[i];
    for (const std::string* p : {&t.spectrogram_path, &t.lyrics_path}) {
      if (p->empty()) continue;
      const fs::path full = resolve_against(base, *p);
      if (!fs::is_regular_file(full)) {
        throw ConfigError("manifest row " + std::to_string(i + 2) + " (track '" + t.track_id + "'): missing file '" +
                          full.string() + "'");
      }
    }
  }
}

std::string audio_signature(const SpectrogramConfig& a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "n_fft=%zu hop=%zu window=%s n_mels=%zu fmin=%.17g fmax=%.17g floor_db=%.17g sr=%u frames=%zu",
                a.n_fft, a.hop, a.window == WindowKind::hann ? "hann" : "rectangular", a.n_mels, a.fmin, a.fmax,
                a.floor_db, static_cast<unsigned>(a.sample_rate), a.frames);
  return buf;
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareArgs {
  ConfigFlags flags;
  std::string manifest;
  std::string out_cache;
  bool quiet = false;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out, const Log& log) {
  RunConfig cfg = a.flags.load();
  const fs::path manifest_path = !a.manifest.empty() ? a.manifest : cfg.manifest;
  require_file(manifest_path, "--manifest");
  std::string cache = a.out_cache.empty() ? cfg.cache_dir : a.out_cache;
  if (cache.empty()) {
    if (const char* env = std::getenv("GENRE_CACHE_DIR")) cache = env;
  }
  if (cache.empty()) throw ConfigError("--out-cache is required (or set cache_dir / GENRE_CACHE_DIR)");
  const auto tracks = read_manifest(manifest_path);
  check_genres(tracks, cfg.labels);
  const fs::path base = fs::absolute(manifest_path).parent_path();
  check_manifest_files(tracks, base);

  const fs::path cache_dir(cache);
  fs::create_directories(cache_dir);
  const std::string signature = audio_signature(cfg.audio);
  std::vector<TrackRecord> prepared;
  std::size_t n_prepared = 0, n_skipped = 0, n_failed = 0;
  for (const auto& t : tracks) {
    TrackRecord p = t;
    if (!t.lyrics_path.empty()) p.lyrics_path = fs::absolute(resolve_against(base, t.lyrics_path)).string();
    const fs::path src = resolve_against(base, t.spectrogram_path);
    std::string status;
    try {
      if (src.extension() == ".wav") {
        const std::string stem = cache_stem(t.track_id);
        const fs::path target = cache_dir / (stem + ".mspc");
        const fs::path key_file = cache_dir / (stem + ".key");
        const auto bytes = read_file_bytes(src);
        char key[128];
        std::snprintf(key, sizeof key, "%016llx ",
                      static_cast<unsigned long long>(fnv1a64(bytes)));
        const std::string expected_key = key + signature + "\n";
        if (fs::is_regular_file(target) && fs::is_regular_file(key_file) && read_file_text(key_file) == expected_key) {
          status = "skipped";
        } else {
          const Spectrogram spec = spectrogram_from_wav(src, cfg.audio);
          save_spectrogram(spec, target);
          write_file_text(key_file, expected_key);
          status = "prepared";
        }
        p.spectrogram_path = fs::absolute(target).string();
      } else {
        // Already a cache file: check that it loads and fits the grid.
        const Spectrogram spec = load_spectrogram(src);
        if (spec.mels != cfg.audio.n_mels || spec.frames != cfg.audio.frames) {
          throw DimensionError("cache is " + std::to_string(spec.mels) + " x " + std::to_string(spec.frames) +
                               ", expected " + std::to_string(cfg.audio.n_mels) + " x " +
                               std::to_string(cfg.audio.frames));
        }
        p.spectrogram_path = fs::absolute(src).string();
        status = "skipped";
      }
    } catch (const Error& e) {
      ++n_failed;
      out << t.track_id << "\tFAILED\t" << e.what() << '\n';
      continue;
    }
    (status == "prepared" ? n_prepared : n_skipped) += 1;
    out << t.track_id << '\t' << status << '\n';
    prepared.push_back(std::move(p));
  }
  out << tracks.size() << " tracks: " << n_prepared << " prepared, " << n_skipped << " skipped, " << n_failed
      << " failed\n";
  if (n_failed > 0) {
    log.warn(std::to_string(n_failed) + " track(s) could not be prepared; no manifest written");
    return kRuntime;
  }
  const fs::path out_manifest = cache_dir / "manifest.csv";
  write_file_text(out_manifest, format_manifest(prepared));
  log.info("wrote " + out_manifest.string());
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  ConfigFlags flags;
  std::string manifest;
  std::string embeddings;
  std::string out_dir;
};

int cmd_train(const TrainArgs& a, std::ostream& out, const Log& log) {
  RunConfig cfg = a.flags.load();
  const fs::path manifest_path = !a.manifest.empty() ? a.manifest : cfg.manifest;
  const std::string emb_path = !a.embeddings.empty() ? a.embeddings : cfg.embeddings;
  const fs::path out_dir = !a.out_dir.empty() ? a.out_dir : cfg.out_dir;
  require_file(manifest_path, "--manifest");
  if (!emb_path.empty()) require_file(emb_path, "--embeddings");
  if (out_dir.empty()) throw ConfigError("--out is required");
  const ModelConfig model_cfg = cfg.model_config();
  const auto tracks = read_manifest(manifest_path);
  check_genres(tracks, model_cfg.labels);
  const fs::path base = fs::absolute(manifest_path).parent_path();
  check_manifest_files(tracks, base);

  const SplitResult split =
      stratified_artist_split(tracks, model_cfg.labels, cfg.split_fractions, cfg.split_seed.value_or(cfg.train.seed));
  for (const auto& c : split.flagged_classes) log.warn("genre '" + c + "' has a single artist; all of it is in train");
  const auto train_tracks = select_split(tracks, split.assignment, Split::train);
  const auto val_tracks = select_split(tracks, split.assignment, Split::val);
  if (cfg.train.epochs > 0 && train_tracks.size() < 2) throw ConfigError("the training split holds fewer than two tracks");

  fs::create_directories(out_dir);
  write_file_text(out_dir / "split.csv", format_split(split.assignment, tracks));
  RunConfig used = cfg;
  used.manifest = fs::absolute(manifest_path).string();
  used.embeddings = emb_path.empty() ? "" : fs::absolute(emb_path).string();
  used.out_dir = fs::absolute(out_dir).string();
  write_file_text(out_dir / "config.txt", format_config(used));
  log.info("split: " + std::to_string(train_tracks.size()) + " train, " + std::to_string(val_tracks.size()) + " val, " +
           std::to_string(tracks.size() - train_tracks.size() - val_tracks.size()) + " test");

  const Vocab vocab = Vocab::build(collect_sentences(train_tracks, base), cfg.vocab_min_count);
  // Initialization draws from its own stream so the trainer's shuffling
  // stream (seeded with the same seed) does not repeat it.
  Rng init(cfg.train.seed ^ 0x6a09e667f3bcc909ULL);
  EmbeddingMatrix emb;
  if (!emb_path.empty()) {
    emb = load_embeddings(emb_path, vocab, init, model_cfg.han.embed_dim, model_cfg.embeddings_trainable);
    log.info("embeddings: " + std::to_string(emb.found) + " of " + std::to_string(vocab.size() - 2) +
             " tokens found in " + emb_path);
  } else {
    emb = random_embeddings(vocab, model_cfg.han.embed_dim, init, model_cfg.embeddings_trainable);
    log.warn("no embedding file given; word vectors start random");
  }
  Model model(model_cfg, emb.table, init);

  SampleLoader loader{&model_cfg, &vocab, cfg.audio, base};
  ManifestSource train_src(train_tracks, loader), val_src(val_tracks, loader);
  Trainer trainer(model, cfg.train);
  auto snapshot = [&] {
    return make_checkpoint(model, vocab, cfg.train, trainer.state(), &trainer.optimizer(), cfg.audio);
  };
  save_checkpoint(snapshot(), out_dir / "best.gfck");
  trainer.fit(train_src, &val_src, [&](const EpochRecord& r, bool improved) {
    log.info("epoch " + std::to_string(r.epoch) + "/" + std::to_string(cfg.train.epochs) +
             " train_loss=" + fmt("%.6f", r.train_loss) + " val_loss=" + fmt("%.6f", r.val_loss) +
             " val_acc=" + fmt("%.4f", r.val_acc) + " val_f1=" + fmt("%.4f", r.val_f1) +
             " lr=" + fmt("%.6g", trainer.state().lr) + (improved ? " *" : ""));
    if (improved) save_checkpoint(snapshot(), out_dir / "best.gfck");
    return true;
  });
  save_checkpoint(snapshot(), out_dir / "final.gfck");
  write_file_text(out_dir / "history.csv", history_csv(trainer.state().history));

  const SampleSource& held_out = val_src.size() > 0 ? static_cast<const SampleSource&>(val_src) : train_src;
  if (held_out.size() == 0) {
    out << "{}\n";
    return kOk;
  }
  const EvalResult ev = evaluate(model, held_out, cfg.train.batch_size);
  log.info(std::string("final metrics on the ") + (val_src.size() > 0 ? "validation" : "training") + " split");
  out << report_json(ev.report) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string split_file;
  std::vector<std::string> label_order;
  std::size_t batch_size = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, const Log& log) {
  require_file(a.checkpoint, "--checkpoint");
  require_file(a.manifest, "--manifest");
  const bool all = a.split == "all";
  const Split which = all ? Split::train : parse_split(a.split);
  const fs::path split_path = !a.split_file.empty() ? fs::path(a.split_file)
                                                    : fs::absolute(a.checkpoint).parent_path() / "split.csv";
  if (!all) require_file(split_path, "--split-file");

  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const ModelConfig& mcfg = ckpt.model;
  const auto tracks = read_manifest(a.manifest);
  try {
    check_genres(tracks, mcfg.labels);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("manifest does not match the checkpoint labels: ") + e.what());
  }
  const fs::path base = fs::absolute(a.manifest).parent_path();
  std::vector<TrackRecord> chosen = tracks;
  if (!all) {
    const auto assignment = parse_split_file(read_file_text(split_path));
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      if (!assignment.count(tracks[i].track_id)) {
        throw ConfigError("manifest row " + std::to_string(i + 2) + " (track '" + tracks[i].track_id +
                          "') is not in split file " + split_path.string());
      }
    }
    chosen = select_split(tracks, assignment, which);
  }
  if (chosen.empty()) throw ConfigError("no tracks in split '" + a.split + "'");
  check_manifest_files(chosen, base);

  std::vector<std::size_t> perm(mcfg.classes());  // report position -> model class
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::string> labels = mcfg.labels;
  if (!a.label_order.empty()) {
    if (a.label_order.size() != mcfg.classes()) throw ConfigError("--label-order must list every checkpoint label once");
    for (std::size_t i = 0; i < a.label_order.size(); ++i) {
      const int id = mcfg.label_id(a.label_order[i]);
      if (id < 0) throw ConfigError("--label-order: unknown label '" + a.label_order[i] + "'");
      perm[i] = static_cast<std::size_t>(id);
    }
    if (std::set<std::size_t>(perm.begin(), perm.end()).size() != perm.size()) {
      throw ConfigError("--label-order repeats a label");
    }
    labels = a.label_order;
  }

  auto model = restore_model(ckpt);
  const Vocab vocab = checkpoint_vocab(ckpt);
  SampleLoader loader{&mcfg, &vocab, ckpt.audio, base};
  ManifestSource source(chosen, loader);
  const EvalResult ev = evaluate(*model, source, a.batch_size > 0 ? a.batch_size : ckpt.train.batch_size);
  log.info("evaluated " + std::to_string(chosen.size()) + " tracks from split '" + a.split + "'");

  const std::size_t g = mcfg.classes();
  std::vector<std::size_t> position(g);
  for (std::size_t i = 0; i < g; ++i) position[perm[i]] = i;
  std::vector<double> probs(ev.probs.size());
  std::vector<int> truth(ev.labels.size());
  for (std::size_t n = 0; n < truth.size(); ++n) {
    truth[n] = static_cast<int>(position[static_cast<std::size_t>(ev.labels[n])]);
    for (std::size_t i = 0; i < g; ++i) probs[n * g + i] = ev.probs[n * g + perm[i]];
  }
  const MetricsReport report = evaluate_predictions(probs, truth, labels);
  out << report_json(report) << "\n\n" << report_table(report);
  return kOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string checkpoint;
  std::string audio;
  std::string spectrogram;
  std::string lyrics;
  std::size_t top = 5;
  bool json = false;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, const Log& log) {
  require_file(a.checkpoint, "--checkpoint");
  if (a.audio.empty() && a.spectrogram.empty() && a.lyrics.empty()) {
    throw ConfigError("predict needs --audio or --spectrogram, and/or --lyrics");
  }
  if (!a.audio.empty() && !a.spectrogram.empty()) throw ConfigError("give either --audio or --spectrogram, not both");
  if (!a.audio.empty()) require_file(a.audio, "--audio");
  if (!a.spectrogram.empty()) require_file(a.spectrogram, "--spectrogram");
  if (!a.lyrics.empty()) require_file(a.lyrics, "--lyrics");

  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  auto model = restore_model(ckpt);
  const Vocab vocab = checkpoint_vocab(ckpt);
  const ModelConfig& mcfg = ckpt.model;

  Sample s;
  s.track_id = "input";
  s.has_audio = !a.audio.empty() || !a.spectrogram.empty();
  if (!a.audio.empty()) s.spectrogram = spectrogram_from_wav(a.audio, ckpt.audio);
  if (!a.spectrogram.empty()) s.spectrogram = load_spectrogram(a.spectrogram);
  if (!s.has_audio) log.info("no audio given; the audio branch contributes a zero vector");
  std::vector<Sentence> sentences;
  if (!a.lyrics.empty()) sentences = segment_sentences(read_file_text(a.lyrics));
  s.lyrics = encode_and_pad(sentences, vocab, mcfg.max_sentences, mcfg.max_words);
  if (s.lyrics.empty()) log.info("no lyrics; the lyrics branch contributes a zero vector");

  Rng unused(0);
  const Sample* batch[] = {&s};
  std::vector<real> probs;
  {
    NoGradGuard no_grad;
    const Tensor p = softmax(model->forward(batch, Mode::eval, unused).logits);
    probs.assign(p.data().begin(), p.data().end());
  }
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return probs[x] > probs[y]; });

  SongAttention att;
  if (!s.lyrics.empty()) {
    NoGradGuard no_grad;
    han_forward(s.lyrics, model->embeddings(), mcfg.han, model->han(), &att);
  }
  // Sentences ranked by weight, and within each the words ranked by weight.
  std::vector<std::size_t> sent_rank(att.sentences.size());
  std::iota(sent_rank.begin(), sent_rank.end(), 0);
  std::stable_sort(sent_rank.begin(), sent_rank.end(), [&](std::size_t x, std::size_t y) {
    return att.sentence_alpha[att.sentences[x]] > att.sentence_alpha[att.sentences[y]];
  });
  if (sent_rank.size() > a.top) sent_rank.resize(a.top);

  ojson j;
  j["probabilities"] = ojson::array();
  for (std::size_t c : order) j["probabilities"].push_back({{"label", mcfg.labels[c]}, {"probability", probs[c]}});
  j["sentence_attention"] = ojson::array();
  j["word_attention"] = ojson::array();
  for (std::size_t k : sent_rank) {
    const std::size_t row = att.sentences[k];
    const auto& tokens = sentences.at(row).tokens;
    std::string text;
    for (std::size_t w = 0; w < std::min(tokens.size(), mcfg.max_words); ++w) text += (w ? " " : "") + tokens[w];
    j["sentence_attention"].push_back({{"sentence", row}, {"weight", att.sentence_alpha[row]}, {"text", text}});
    const auto& alpha = att.word_alpha[k];
    std::vector<std::size_t> words;
    for (std::size_t w = 0; w < alpha.size(); ++w)
      if (s.lyrics.has_word(row, w)) words.push_back(w);
    std::stable_sort(words.begin(), words.end(), [&](std::size_t x, std::size_t y) { return alpha[x] > alpha[y]; });
    if (words.size() > a.top) words.resize(a.top);
    for (std::size_t w : words) {
      j["word_attention"].push_back({{"sentence", row}, {"word", w}, {"token", tokens.at(w)}, {"weight", alpha[w]}});
    }
  }
  if (a.json) {
    out << j.dump() << '\n';
    return kOk;
  }
  char buf[256];
  out << "genre probabilities:\n";
  for (std::size_t c : order) {
    std::snprintf(buf, sizeof buf, "  %-22s %.6f\n", mcfg.labels[c].c_str(), probs[c]);
    out << buf;
  }
  if (!j["sentence_attention"].empty()) {
    out << "top sentences:\n";
    for (const auto& e : j["sentence_attention"]) {
      std::snprintf(buf, sizeof buf, "  [%zu] %.4f  ", e["sentence"].get<std::size_t>(), e["weight"].get<double>());
      out << buf << e["text"].get<std::string>() << '\n';
    }
    out << "top words:\n";
    for (const auto& e : j["word_attention"]) {
      std::snprintf(buf, sizeof buf, "  [%zu:%zu] %.4f  ", e["sentence"].get<std::size_t>(), e["word"].get<std::size_t>(),
                    e["weight"].get<double>());
      out << buf << e["token"].get<std::string>() << '\n';
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::string scale = "tiny";
  std::vector<std::string> checks;
  std::string fault;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, const Log& log) {
  if (a.scale != "tiny") throw ConfigError("--scale: only 'tiny' is available");
  SuiteOptions opts;
  opts.seed = a.seed;
  const auto names = gradcheck_suite_names();
  for (const auto& c : a.checks) {
    if (std::find(names.begin(), names.end(), c) == names.end()) throw ConfigError("--check: unknown check '" + c + "'");
  }
  opts.only = a.checks;
  OpKind fault = OpKind::leaf;
  if (!a.fault.empty()) {
    bool found = false;
    for (int k = 1; k <= static_cast<int>(kNumOps); ++k) {
      if (op_name(static_cast<OpKind>(k)) == a.fault) {
        fault = static_cast<OpKind>(k);
        found = true;
      }
    }
    if (!found) throw ConfigError("--inject-fault: unknown op '" + a.fault + "'");
    log.warn("backward rule of '" + a.fault + "' is deliberately corrupted");
  }
  struct Reset {
    ~Reset() { genre::testing::set_backward_fault(OpKind::leaf); }
  } reset;
  genre::testing::set_backward_fault(fault);
  const SuiteReport report = run_gradcheck_suite(opts);
  out << format_suite_report(report, opts);
  return report.passed ? kOk : kNumeric;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal music genre classifier (audio CNN + lyrics attention network)", "genre"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress progress logs");
  app.fallthrough();

  PrepareArgs prep;
  auto* c_prep = app.add_subcommand("prepare", "turn manifest audio into spectrogram cache files");
  prep.flags.attach(*c_prep, false);
  c_prep->add_option("--manifest", prep.manifest, "input manifest CSV");
  c_prep->add_option("--out-cache", prep.out_cache, "cache directory (default: $GENRE_CACHE_DIR)");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "split, train and write checkpoints");
  train.flags.attach(*c_train, true);
  c_train->add_option("--manifest", train.manifest, "prepared manifest CSV");
  c_train->add_option("--embeddings", train.embeddings, "word vector text file");
  c_train->add_option("--out", train.out_dir, "output directory");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  c_eval->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  c_eval->add_option("--manifest", ev.manifest, "manifest CSV")->required();
  c_eval->add_option("--split", ev.split, "train, val, test or all")->check(CLI::IsMember({"train", "val", "test", "all"}));
  c_eval->add_option("--split-file", ev.split_file, "split CSV (default: split.csv next to the checkpoint)");
  c_eval->add_option("--label-order", ev.label_order, "report rows in this label order")->delimiter(',');
  c_eval->add_option("--batch-size", ev.batch_size, "evaluation batch size");

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "classify one track");
  c_pred->add_option("--checkpoint", pred.checkpoint, "checkpoint file")->required();
  c_pred->add_option("--audio", pred.audio, "WAV file");
  c_pred->add_option("--spectrogram", pred.spectrogram, "spectrogram cache file");
  c_pred->add_option("--lyrics", pred.lyrics, "lyrics text file, one line per sentence");
  c_pred->add_option("--top", pred.top, "attention entries to show");
  c_pred->add_flag("--json", pred.json, "print JSON instead of text");

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "finite-difference check of every backward rule");
  c_gc->add_option("--seed", gc.seed, "first seed");
  c_gc->add_option("--scale", gc.scale, "fixture scale (tiny)");
  c_gc->add_option("--check", gc.checks, "run only these checks");
  c_gc->add_option("--inject-fault", gc.fault, "corrupt one op's backward rule")->group("");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    // Help on a subcommand arrives as CallForHelp thrown from the subcommand.
    err << "genre: " << e.what() << '\n';
    return kValidation;
  }

  const Log log(err, quiet);
  try {
    if (c_prep->parsed()) return cmd_prepare(prep, out, log);
    if (c_train->parsed()) return cmd_train(train, out, log);
    if (c_eval->parsed()) return cmd_eval(ev, out, log);
    if (c_pred->parsed()) return cmd_predict(pred, out, log);
    if (c_gc->parsed()) return cmd_gradcheck(gc, out, log);
  } catch (const std::exception& e) {
    err << "genre: error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kValidation;
}

}  // namespace genre::cli
