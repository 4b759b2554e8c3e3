// SPDX-License-Identifier: Apache-2.0
#include "genre/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "genre/error.hpp"
#include "genre/ops.hpp"

namespace genre {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 (batchnorm needs two samples)");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (plateau_patience == 0) throw ConfigError("plateau_patience must be positive");
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss,val_acc,val_f1\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss, r.val_acc,
                  r.val_f1);
    out += buf;
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) out.emplace_back(start, std::min(n, start + batch_size));
  if (out.size() > 1 && out.back().second - out.back().first == 1) {
    out.pop_back();
    out.back().second = n;
  }
  return out;
}

std::vector<real> inverse_frequency_weights(const SampleSource& source, std::size_t classes) {
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < source.size(); ++i) ++counts.at(static_cast<std::size_t>(source.label(i)));
  const std::size_t present = static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
  std::vector<real> w(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] > 0) {
      w[c] = static_cast<real>(source.size()) / static_cast<real>(present * counts[c]);
    }
  }
  return w;
}

namespace {

std::vector<Sample> load_range(const SampleSource& source, std::span<const std::size_t> order, std::size_t begin,
                               std::size_t end) {
  std::vector<Sample> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(source.load(order[i]));
  return out;
}

std::vector<const Sample*> pointers(const std::vector<Sample>& samples) {
  std::vector<const Sample*> out;
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

}  // namespace

EvalResult evaluate(Model& model, const SampleSource& source, std::size_t batch_size) {
  EvalResult r;
  if (source.size() == 0) return r;
  NoGradGuard no_grad;
  Rng unused(0);
  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), 0);
  real total = 0.0;
  for (auto [begin, end] : batch_ranges(source.size(), std::max<std::size_t>(batch_size, 1))) {
    const auto samples = load_range(source, order, begin, end);
    const auto ptrs = pointers(samples);
    std::vector<int> labels;
    for (const auto& s : samples) labels.push_back(s.label);
    std::vector<real> probs;
    const Tensor logits = model.forward(ptrs, Mode::eval, unused).logits;
    total += softmax_cross_entropy(logits, labels, {}, &probs).item() * static_cast<real>(samples.size());
    r.probs.insert(r.probs.end(), probs.begin(), probs.end());
    r.labels.insert(r.labels.end(), labels.begin(), labels.end());
  }
  r.loss = total / static_cast<real>(source.size());
  r.report = evaluate_predictions(r.probs, r.labels, model.config().labels);
  return r;
}

Trainer::Trainer(Model& model, TrainConfig cfg)
    : model_(model), cfg_(std::move(cfg)), opt_(cfg_.lr, cfg_.momentum), rng_(cfg_.seed) {
  cfg_.validate();
  state_.lr = cfg_.lr;
  state_.rng_state = rng_.state();
}

void Trainer::restore(const TrainerState& state) {
  state_ = state;
  opt_.set_lr(state.lr);
  rng_.set_state(state.rng_state);
}

real Trainer::train_step(std::span<const Sample* const> batch, std::span<const real> class_weights) {
  auto params = model_.parameters();
  for (auto& p : params) p.tensor.zero_grad();
  std::vector<int> labels;
  std::vector<real> weights;
  for (const Sample* s : batch) {
    labels.push_back(s->label);
    if (!class_weights.empty()) weights.push_back(class_weights[static_cast<std::size_t>(s->label)]);
  }
  const Tensor logits = model_.forward(batch, Mode::train, rng_).logits;
  const Tensor loss = softmax_cross_entropy(logits, labels, weights);
  backward(loss);
  opt_.step(params);
  return loss.item();
}

EpochRecord Trainer::run_epoch(const SampleSource& train, const SampleSource* val) {
  if (train.size() < 2) throw ConfigError("training needs at least two samples");
  const std::vector<real> weights =
      cfg_.class_weights ? inverse_frequency_weights(train, model_.config().classes()) : std::vector<real>{};
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  rng_.shuffle(std::span<std::size_t>(order));
  real total = 0.0;
  for (auto [begin, end] : batch_ranges(order.size(), cfg_.batch_size)) {
    const auto samples = load_range(train, order, begin, end);
    total += train_step(pointers(samples), weights) * static_cast<real>(end - begin);
  }

  const SampleSource& held_out = (val != nullptr && val->size() > 0) ? *val : train;
  const EvalResult ev = evaluate(model_, held_out, cfg_.batch_size);
  EpochRecord rec;
  rec.epoch = ++state_.epoch;
  rec.train_loss = total / static_cast<real>(train.size());
  rec.val_loss = ev.loss;
  rec.val_acc = ev.report.accuracy;
  rec.val_f1 = ev.report.macro_f1;
  state_.history.push_back(rec);

  if (rec.val_loss < state_.plateau_best) {
    state_.plateau_best = rec.val_loss;
    state_.plateau_count = 0;
  } else if (++state_.plateau_count >= cfg_.plateau_patience) {
    state_.lr *= cfg_.lr_decay;
    opt_.set_lr(state_.lr);
    state_.plateau_count = 0;
  }
  state_.rng_state = rng_.state();
  return rec;
}

void Trainer::fit(const SampleSource& train, const SampleSource* val, const EpochCallback& callback) {
  while (state_.epoch < cfg_.epochs) {
    const EpochRecord rec = run_epoch(train, val);
    const bool improved = !state_.has_best || rec.val_f1 > state_.best_f1 ||
                          (rec.val_f1 == state_.best_f1 && rec.val_loss < state_.best_loss);
    if (improved) {
      state_.has_best = true;
      state_.best_f1 = rec.val_f1;
      state_.best_loss = rec.val_loss;
      state_.best_epoch = rec.epoch;
    }
    if (callback && !callback(rec, improved)) break;
  }
}

}  // namespace genre
