// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "genre/dataset.hpp"
#include "genre/metrics.hpp"
#include "genre/model.hpp"
#include "genre/optimizer.hpp"

namespace genre {

struct TrainConfig {
  real lr = 0.01;
  real momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  std::uint64_t seed = 1;
  real lr_decay = 0.5;
  std::size_t plateau_patience = 10;
  bool class_weights = false;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  real train_loss = 0.0;
  real val_loss = 0.0;
  real val_acc = 0.0;
  real val_f1 = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

/// "epoch,train_loss,val_loss,val_acc,val_f1", values printed with 17
/// significant digits.
std::string history_csv(const std::vector<EpochRecord>& history);

struct TrainerState {
  std::size_t epoch = 0;
  real lr = 0.0;
  std::size_t plateau_count = 0;
  real plateau_best = std::numeric_limits<real>::infinity();
  bool has_best = false;
  real best_f1 = 0.0;
  real best_loss = 0.0;
  std::size_t best_epoch = 0;
  std::string rng_state;
  std::vector<EpochRecord> history;

  bool operator==(const TrainerState&) const = default;
};

struct EvalResult {
  std::vector<real> probs;  // N x G
  std::vector<int> labels;
  real loss = 0.0;          // mean cross-entropy
  MetricsReport report;
};

/// Eval-mode pass over a source in batches, without building a graph.
EvalResult evaluate(Model& model, const SampleSource& source, std::size_t batch_size);

/// Batch boundaries for n samples: full batches, and a trailing batch of a
/// single sample folded into the one before it.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size);

/// Inverse-frequency weights N / (K n_c) over the K classes present.
std::vector<real> inverse_frequency_weights(const SampleSource& source, std::size_t classes);

class Trainer {
 public:
  /// Called after every epoch with the new record and whether it is the best
  /// so far; returning false stops training.
  using EpochCallback = std::function<bool(const EpochRecord&, bool improved)>;

  Trainer(Model& model, TrainConfig cfg);

  /// One epoch: seeded shuffle, minibatch steps in train mode, then an
  /// evaluation on `val` (the training set itself when val is null or empty).
  EpochRecord run_epoch(const SampleSource& train, const SampleSource* val);

  /// Runs epochs until cfg.epochs have been completed in total.
  void fit(const SampleSource& train, const SampleSource* val, const EpochCallback& callback = {});

  /// Loss of one minibatch and the update it causes.
  real train_step(std::span<const Sample* const> batch, std::span<const real> class_weights = {});

  const TrainConfig& config() const { return cfg_; }
  TrainerState& state() { return state_; }
  const TrainerState& state() const { return state_; }
  NesterovSgd& optimizer() { return opt_; }
  Rng& rng() { return rng_; }
  /// Restores counters, learning rate and generator position.
  void restore(const TrainerState& state);

 private:
  Model& model_;
  TrainConfig cfg_;
  NesterovSgd opt_;
  Rng rng_;
  TrainerState state_;
};

}  // namespace genre
