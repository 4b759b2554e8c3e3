// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "genre/embeddings.hpp"
#include "genre/error.hpp"
#include "genre/ops.hpp"
#include "genre/synthetic.hpp"
#include "genre/trainer.hpp"
#include "support.hpp"

using namespace genre;
using oracle::Vec;

namespace {

struct Fixture {
  ModelConfig cfg = tiny_model_config({"a", "b", "c", "d"});
  Vocab vocab = synthetic_vocab(4);
  MemorySource data{synthetic_samples(cfg, vocab, 8, 42)};

  Model make(std::uint64_t seed) const {
    Rng rng(seed);
    Tensor table = random_embeddings(vocab, cfg.han.embed_dim, rng).table;
    return Model(cfg, table, rng);
  }
};

std::vector<Vec> snapshot(Model& m) {
  std::vector<Vec> out;
  for (const auto& t : m.state_tensors()) out.push_back(oracle::to_vec(t.tensor));
  return out;
}

}  // namespace

TEST(BatchRanges, FoldsTrailingSingleton) {
  using R = std::vector<std::pair<std::size_t, std::size_t>>;
  EXPECT_EQ(batch_ranges(10, 4), (R{{0, 4}, {4, 8}, {8, 10}}));
  EXPECT_EQ(batch_ranges(9, 4), (R{{0, 4}, {4, 9}}));
  EXPECT_EQ(batch_ranges(1, 4), (R{{0, 1}}));
  EXPECT_TRUE(batch_ranges(0, 4).empty());
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ClassWeights, InverseFrequency) {
  std::vector<Sample> s(6);
  for (std::size_t i = 0; i < 6; ++i) s[i].label = i < 4 ? 0 : 2;
  MemorySource src(std::move(s));
  // N / (K n_c) with N = 6 and K = 2 classes present.
  EXPECT_EQ(inverse_frequency_weights(src, 3), (Vec{6.0 / 8.0, 0.0, 6.0 / 4.0}));
}

TEST(Trainer, ZeroLearningRateFreezesParameters) {
  Fixture f;
  Model m = f.make(1);
  const auto before = snapshot(m);
  TrainConfig tc;
  tc.lr = 0.0;
  tc.batch_size = 8;
  tc.epochs = 2;
  Trainer tr(m, tc);
  tr.fit(f.data, nullptr);
  const auto after = snapshot(m);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(before[i], after[i]) << m.state_tensors()[i].name;
}

TEST(Trainer, LossDecreasesOnFixedBatch) {
  Fixture f;
  Model m = f.make(2);
  TrainConfig tc;
  tc.lr = 1e-3;
  Trainer tr(m, tc);
  std::vector<const Sample*> batch;
  for (const auto& s : f.data.samples()) batch.push_back(&s);
  // The tiny configuration has no dropout, so the train-mode loss of a fixed
  // batch is a deterministic function of the parameters.
  auto eval_loss = [&] {
    NoGradGuard g;
    Rng unused(0);
    std::vector<int> labels;
    for (const Sample* s : batch) labels.push_back(s->label);
    return softmax_cross_entropy(m.forward(batch, Mode::train, unused).logits, labels).item();
  };
  real prev = eval_loss();
  for (int step = 0; step < 5; ++step) {
    tr.train_step(batch);
    const real now = eval_loss();
    EXPECT_LT(now, prev) << "step " << step;
    prev = now;
  }
}

TEST(Trainer, OverfitsSmallFixture) {
  Fixture f;
  Model m = f.make(1);
  TrainConfig tc;
  tc.lr = 0.05;
  tc.batch_size = 32;
  tc.epochs = 300;
  tc.seed = 3;
  Trainer tr(m, tc);
  tr.fit(f.data, nullptr, [](const EpochRecord& r, bool) { return r.val_acc < 1.0; });
  const EvalResult ev = evaluate(m, f.data, 32);
  EXPECT_GE(ev.report.accuracy, 0.95);
  // Predicting a training sample returns its label.
  const Sample& s = f.data.samples()[5];
  const Sample* one[] = {&s};
  Rng unused(0);
  const Vec logits = oracle::to_vec(m.forward(one, Mode::eval, unused).logits);
  EXPECT_EQ(static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin()), s.label);
}

TEST(Trainer, DeterministicHistory) {
  Fixture f;
  auto run = [&] {
    Model m = f.make(4);
    TrainConfig tc;
    tc.batch_size = 6;
    tc.epochs = 4;
    tc.seed = 17;
    Trainer tr(m, tc);
    tr.fit(f.data, nullptr);
    return std::pair{history_csv(tr.state().history), snapshot(m)};
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Trainer, PlateauHalvesLearningRate) {
  Fixture f;
  Model m = f.make(5);
  TrainConfig tc;
  tc.lr = 0.0;  // loss never improves after the first epoch
  tc.batch_size = 32;
  tc.epochs = 4;
  tc.plateau_patience = 2;
  tc.lr_decay = 0.5;
  Trainer tr(m, tc);
  tr.fit(f.data, nullptr);
  EXPECT_EQ(tr.state().epoch, 4u);
  EXPECT_EQ(tr.state().history.size(), 4u);
  EXPECT_EQ(tr.state().lr, 0.0);
  EXPECT_EQ(tr.state().best_epoch, 1u);
}

TEST(Trainer, ValidationSourceUsedWhenGiven) {
  Fixture f;
  Model m = f.make(6);
  TrainConfig tc;
  tc.batch_size = 8;
  tc.epochs = 1;
  Trainer tr(m, tc);
  std::vector<Sample> held(f.data.samples().begin(), f.data.samples().begin() + 3);
  MemorySource val(held);
  const EpochRecord r = tr.run_epoch(f.data, &val);
  const EvalResult ev = evaluate(m, val, 8);
  EXPECT_EQ(r.val_loss, ev.loss);
  EXPECT_EQ(r.val_acc, ev.report.accuracy);
}

TEST(Trainer, HistoryCsvFormat) {
  const std::vector<EpochRecord> h{{1, 0.5, 0.25, 1.0, 0.1}};
  EXPECT_EQ(history_csv(h), "epoch,train_loss,val_loss,val_acc,val_f1\n1,0.5,0.25,1,0.10000000000000001\n");
}
