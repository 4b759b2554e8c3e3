// SPDX-License-Identifier: Apache-2.0
#include "genre/checkpoint.hpp"

#include <cmath>
#include <json.hpp>
#include <set>

#include "genre/binary_io.hpp"
#include "genre/error.hpp"

namespace genre {

using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kMagic = "GFCK";
constexpr std::uint8_t kDtypeF32 = 1;
constexpr std::uint8_t kDtypeF64 = 2;

void require_keys(const json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw CheckpointError(std::string(what) + " must be a JSON object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw CheckpointError(std::string(what) + ": unknown key '" + k + "'");
  }
  for (const char* k : keys) {
    if (!j.contains(k)) throw CheckpointError(std::string(what) + ": missing key '" + k + "'");
  }
}

json model_to_json(const ModelConfig& c) {
  json blocks = json::array();
  for (const auto& b : c.cnn.blocks) {
    blocks.push_back({{"out_channels", b.out_channels},
                      {"kernel_len", b.kernel_len},
                      {"stride", b.stride},
                      {"pool_window", b.pool_window},
                      {"dropout_p", b.dropout_p}});
  }
  return {{"input_mels", c.cnn.input_mels},
          {"input_frames", c.cnn.input_frames},
          {"cnn_features", c.cnn.feature_dim},
          {"blocks", blocks},
          {"embed_dim", c.han.embed_dim},
          {"hidden", c.han.hidden},
          {"attention_dim", c.han.attention_dim},
          {"max_sentences", c.max_sentences},
          {"max_words", c.max_words},
          {"labels", c.labels},
          {"embeddings_trainable", c.embeddings_trainable}};
}

ModelConfig model_from_json(const json& j) {
  require_keys(j,
               {"input_mels", "input_frames", "cnn_features", "blocks", "embed_dim", "hidden", "attention_dim",
                "max_sentences", "max_words", "labels", "embeddings_trainable"},
               "model config");
  ModelConfig c;
  c.cnn.input_mels = j["input_mels"].get<std::size_t>();
  c.cnn.input_frames = j["input_frames"].get<std::size_t>();
  c.cnn.feature_dim = j["cnn_features"].get<std::size_t>();
  c.cnn.blocks.clear();
  for (const auto& b : j["blocks"]) {
    require_keys(b, {"out_channels", "kernel_len", "stride", "pool_window", "dropout_p"}, "cnn block");
    c.cnn.blocks.push_back({b["out_channels"].get<std::size_t>(), b["kernel_len"].get<std::size_t>(),
                            b["stride"].get<std::size_t>(), b["pool_window"].get<std::size_t>(),
                            b["dropout_p"].get<double>()});
  }
  c.han.embed_dim = j["embed_dim"].get<std::size_t>();
  c.han.hidden = j["hidden"].get<std::size_t>();
  c.han.attention_dim = j["attention_dim"].get<std::size_t>();
  c.max_sentences = j["max_sentences"].get<std::size_t>();
  c.max_words = j["max_words"].get<std::size_t>();
  c.labels = j["labels"].get<std::vector<std::string>>();
  c.embeddings_trainable = j["embeddings_trainable"].get<bool>();
  return c;
}

json train_to_json(const TrainConfig& t) {
  return {{"lr", t.lr},
          {"momentum", t.momentum},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"seed", t.seed},
          {"lr_decay", t.lr_decay},
          {"plateau_patience", t.plateau_patience},
          {"class_weights", t.class_weights}};
}

TrainConfig train_from_json(const json& j) {
  require_keys(j, {"lr", "momentum", "batch_size", "epochs", "seed", "lr_decay", "plateau_patience", "class_weights"},
               "train config");
  TrainConfig t;
  t.lr = j["lr"].get<double>();
  t.momentum = j["momentum"].get<double>();
  t.batch_size = j["batch_size"].get<std::size_t>();
  t.epochs = j["epochs"].get<std::size_t>();
  t.seed = j["seed"].get<std::uint64_t>();
  t.lr_decay = j["lr_decay"].get<double>();
  t.plateau_patience = j["plateau_patience"].get<std::size_t>();
  t.class_weights = j["class_weights"].get<bool>();
  return t;
}

json audio_to_json(const SpectrogramConfig& a) {
  return {{"n_fft", a.n_fft},
          {"hop", a.hop},
          {"window", a.window == WindowKind::hann ? "hann" : "rectangular"},
          {"n_mels", a.n_mels},
          {"fmin", a.fmin},
          {"fmax", a.fmax},
          {"floor_db", a.floor_db},
          {"sample_rate", a.sample_rate},
          {"frames", a.frames}};
}

SpectrogramConfig audio_from_json(const json& j) {
  require_keys(j, {"n_fft", "hop", "window", "n_mels", "fmin", "fmax", "floor_db", "sample_rate", "frames"},
               "audio config");
  SpectrogramConfig a;
  a.n_fft = j["n_fft"].get<std::size_t>();
  a.hop = j["hop"].get<std::size_t>();
  const auto window = j["window"].get<std::string>();
  if (window != "hann" && window != "rectangular") throw CheckpointError("audio config: unknown window '" + window + "'");
  a.window = window == "hann" ? WindowKind::hann : WindowKind::rectangular;
  a.n_mels = j["n_mels"].get<std::size_t>();
  a.fmin = j["fmin"].get<double>();
  a.fmax = j["fmax"].get<double>();
  a.floor_db = j["floor_db"].get<double>();
  a.sample_rate = j["sample_rate"].get<std::uint32_t>();
  a.frames = j["frames"].get<std::size_t>();
  return a;
}

// JSON has no infinity; the only non-finite field is the initial plateau best.
json finite_or_null(real v) { return std::isfinite(v) ? json(v) : json(nullptr); }
real from_finite_or_null(const json& j) {
  return j.is_null() ? std::numeric_limits<real>::infinity() : j.get<double>();
}

json state_to_json(const TrainerState& s) {
  json history = json::array();
  for (const auto& r : s.history) history.push_back({r.epoch, r.train_loss, r.val_loss, r.val_acc, r.val_f1});
  return {{"epoch", s.epoch},
          {"lr", s.lr},
          {"plateau_count", s.plateau_count},
          {"plateau_best", finite_or_null(s.plateau_best)},
          {"has_best", s.has_best},
          {"best_f1", s.best_f1},
          {"best_loss", s.best_loss},
          {"best_epoch", s.best_epoch},
          {"rng_state", s.rng_state},
          {"history", history}};
}

TrainerState state_from_json(const json& j) {
  require_keys(j,
               {"epoch", "lr", "plateau_count", "plateau_best", "has_best", "best_f1", "best_loss", "best_epoch",
                "rng_state", "history"},
               "trainer state");
  TrainerState s;
  s.epoch = j["epoch"].get<std::size_t>();
  s.lr = j["lr"].get<double>();
  s.plateau_count = j["plateau_count"].get<std::size_t>();
  s.plateau_best = from_finite_or_null(j["plateau_best"]);
  s.has_best = j["has_best"].get<bool>();
  s.best_f1 = j["best_f1"].get<double>();
  s.best_loss = j["best_loss"].get<double>();
  s.best_epoch = j["best_epoch"].get<std::size_t>();
  s.rng_state = j["rng_state"].get<std::string>();
  for (const auto& r : j["history"]) {
    if (!r.is_array() || r.size() != 5) throw CheckpointError("trainer state: malformed history row");
    s.history.push_back({r[0].get<std::size_t>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>(),
                         r[4].get<double>()});
  }
  return s;
}

}  // namespace

std::string model_config_json(const ModelConfig& cfg) { return model_to_json(cfg).dump(); }

ModelConfig parse_model_config_json(std::string_view text) {
  try {
    return model_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("model config: ") + e.what());
  }
}

Checkpoint make_checkpoint(Model& model, const Vocab& vocab, const TrainConfig& train, const TrainerState& state,
                           const NesterovSgd* optimizer, const SpectrogramConfig& audio) {
  Checkpoint c;
  c.model = model.config();
  c.train = train;
  c.audio = audio;
  c.vocab_tokens = vocab.real_tokens();
  c.state = state;
  for (const auto& t : model.state_tensors()) {
    c.blobs["param/" + t.name] = {t.tensor.shape(), {t.tensor.data().begin(), t.tensor.data().end()}};
  }
  const auto stats = model.running_stats();
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const std::string name = "stats/cnn.block" + std::to_string(i);
    c.blobs[name + ".mean"] = {{stats[i]->mean.size()}, stats[i]->mean};
    c.blobs[name + ".var"] = {{stats[i]->var.size()}, stats[i]->var};
  }
  if (optimizer) {
    for (const auto& [name, v] : optimizer->velocities()) c.blobs["velocity/" + name] = {{v.size()}, v};
  }
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const json meta = {{"model", model_to_json(ckpt.model)},
                     {"train", train_to_json(ckpt.train)},
                     {"audio", audio_to_json(ckpt.audio)},
                     {"vocab", ckpt.vocab_tokens},
                     {"state", state_to_json(ckpt.state)}};
  const std::string text = meta.dump();
  ByteWriter w;
  w.bytes(kMagic);
  w.u16(kCheckpointVersion);
  w.u64(text.size());
  w.bytes(text);
  w.u32(static_cast<std::uint32_t>(ckpt.blobs.size()));
  for (const auto& [name, blob] : ckpt.blobs) {
    if (name.size() > 0xffff || blob.shape.size() > 0xff) throw ContractError("checkpoint blob '" + name + "' too large");
    if (numel(blob.shape) != blob.values.size()) throw ContractError("checkpoint blob '" + name + "' shape mismatch");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(kDtypeF64);
    w.u8(static_cast<std::uint8_t>(blob.shape.size()));
    for (std::size_t d : blob.shape) w.u64(d);
    for (real v : blob.values) w.f64(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.bytes(4, "magic") != kMagic) throw FormatError("checkpoint: bad magic (expected GFCK)");
  const std::uint16_t version = r.u16("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t len = r.u64("metadata length");
  if (len > r.remaining()) throw FormatError("checkpoint: metadata length exceeds file size");
  const std::string text = r.bytes(static_cast<std::size_t>(len), "metadata");
  Checkpoint c;
  try {
    const json meta = json::parse(text);
    require_keys(meta, {"model", "train", "audio", "vocab", "state"}, "checkpoint metadata");
    c.model = model_from_json(meta["model"]);
    c.train = train_from_json(meta["train"]);
    c.audio = audio_from_json(meta["audio"]);
    c.vocab_tokens = meta["vocab"].get<std::vector<std::string>>();
    c.state = state_from_json(meta["state"]);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  const std::uint32_t count = r.u32("blob count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16("blob name length");
    std::string name = r.bytes(name_len, "blob name");
    const std::uint8_t dtype = r.u8("blob dtype");
    if (dtype != kDtypeF32 && dtype != kDtypeF64) {
      throw FormatError("checkpoint blob '" + name + "': unknown dtype " + std::to_string(dtype));
    }
    const std::uint8_t rank = r.u8("blob rank");
    CheckpointBlob blob;
    std::uint64_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = r.u64("blob dim");
      if (dim != 0 && n > (r.remaining() + 1) / dim) throw FormatError("checkpoint blob '" + name + "': dims overflow");
      n *= dim;
      blob.shape.push_back(static_cast<std::size_t>(dim));
    }
    const std::size_t width = dtype == kDtypeF64 ? 8 : 4;
    if (n > r.remaining() / width) throw FormatError("checkpoint blob '" + name + "': payload truncated");
    blob.values.resize(static_cast<std::size_t>(n));
    for (auto& v : blob.values) v = dtype == kDtypeF64 ? r.f64("blob value") : static_cast<real>(r.f32("blob value"));
    if (!c.blobs.emplace(std::move(name), std::move(blob)).second) throw FormatError("checkpoint: duplicate blob");
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

namespace {

const CheckpointBlob& blob_for(const Checkpoint& c, const std::string& name, const Shape& shape) {
  const auto it = c.blobs.find(name);
  if (it == c.blobs.end()) throw CheckpointError("checkpoint has no tensor '" + name + "'");
  if (it->second.shape != shape) {
    throw CheckpointError("checkpoint tensor '" + name + "' is " + shape_str(it->second.shape) + ", the model expects " +
                          shape_str(shape));
  }
  return it->second;
}

}  // namespace

Vocab checkpoint_vocab(const Checkpoint& ckpt) { return Vocab::from_tokens(ckpt.vocab_tokens); }

std::unique_ptr<Model> restore_model(const Checkpoint& ckpt) {
  const auto emb_it = ckpt.blobs.find("param/embeddings");
  if (emb_it == ckpt.blobs.end()) throw CheckpointError("checkpoint has no tensor 'param/embeddings'");
  const auto& eb = emb_it->second;
  Tensor table = ckpt.model.embeddings_trainable ? Tensor::parameter(eb.shape, eb.values)
                                                 : Tensor::constant(eb.shape, eb.values);
  if (table.rank() != 2 || table.dim(0) != ckpt.vocab_tokens.size() + 2) {
    throw CheckpointError("checkpoint embedding table does not match its vocabulary");
  }
  Rng scratch(0);
  auto model = std::make_unique<Model>(ckpt.model, table, scratch);
  for (auto& t : model->state_tensors()) {
    if (t.name == "embeddings") continue;
    const auto& b = blob_for(ckpt, "param/" + t.name, t.tensor.shape());
    std::copy(b.values.begin(), b.values.end(), t.tensor.mutable_data().begin());
  }
  const auto stats = model->running_stats();
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const std::string name = "stats/cnn.block" + std::to_string(i);
    stats[i]->mean = blob_for(ckpt, name + ".mean", {stats[i]->mean.size()}).values;
    stats[i]->var = blob_for(ckpt, name + ".var", {stats[i]->var.size()}).values;
  }
  return model;
}

void restore_trainer(const Checkpoint& ckpt, Trainer& trainer) {
  trainer.restore(ckpt.state);
  auto& vel = trainer.optimizer().velocities();
  vel.clear();
  for (const auto& [name, blob] : ckpt.blobs) {
    if (name.rfind("velocity/", 0) == 0) vel[name.substr(9)] = blob.values;
  }
}

}  // namespace genre
