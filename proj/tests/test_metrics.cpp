// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>
#include <numeric>

#include "genre/error.hpp"
#include "genre/metrics.hpp"
#include "support.hpp"

using namespace genre;

namespace {

std::vector<int> random_labels(std::size_t n, std::size_t g, std::mt19937_64& gen) {
  std::vector<int> out(n);
  for (int& v : out) v = static_cast<int>(oracle::random_size(gen, 0, g - 1));
  return out;
}

// Precision/recall/F1 straight from the definitions, by counting.
struct Counted {
  double p, r, f1;
};

Counted counted_scores(const std::vector<int>& preds, const std::vector<int>& truth, int c) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == c && truth[i] == c) ++tp;
    if (preds[i] == c && truth[i] != c) ++fp;
    if (preds[i] != c && truth[i] == c) ++fn;
  }
  const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  return {p, r, p + r > 0 ? 2 * p * r / (p + r) : 0.0};
}

}  // namespace

TEST(Confusion, PerfectPredictorIsDiagonal) {
  const std::vector<int> y{0, 1, 1, 2, 2, 2};
  const auto cm = confusion_matrix(y, y, 3);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(cm.at(t, p), t == p ? t + 1 : 0u);
}

TEST(Confusion, EmptyIsZero) {
  const auto cm = confusion_matrix({}, {}, 4);
  EXPECT_EQ(cm.counts, std::vector<std::size_t>(16, 0));
  EXPECT_EQ(cm.total(), 0u);
}

TEST(Confusion, MatchesCountingOracle) {
  auto gen = oracle::make_gen(3);
  const auto preds = random_labels(1000, 7, gen), truth = random_labels(1000, 7, gen);
  const auto cm = confusion_matrix(preds, truth, 7);
  for (int t = 0; t < 7; ++t)
    for (int p = 0; p < 7; ++p) {
      std::size_t n = 0;
      for (std::size_t i = 0; i < 1000; ++i) n += truth[i] == t && preds[i] == p;
      EXPECT_EQ(cm.at(t, p), n);
    }
}

TEST(Confusion, Errors) {
  const std::vector<int> a{0, 1}, b{0};
  EXPECT_THROW(confusion_matrix(a, b, 2), DimensionError);
  const std::vector<int> bad{0, 5};
  EXPECT_THROW(confusion_matrix(bad, a, 2), ParameterError);
}

TEST(F1, PerfectIsOne) {
  const std::vector<int> y{0, 1, 2, 3, 0};
  const auto cm = confusion_matrix(y, y, 4);
  for (const auto& s : class_scores(cm)) EXPECT_EQ(s.f1, 1.0);
  EXPECT_EQ(macro_f1(cm), 1.0);
}

TEST(F1, BinaryHandExample) {
  const std::vector<int> preds{1, 1, 0, 0}, truth{1, 0, 0, 0};
  const auto s = class_scores(confusion_matrix(preds, truth, 2));
  EXPECT_EQ(s[1].precision, 0.5);
  EXPECT_EQ(s[1].recall, 1.0);
  EXPECT_EQ(s[1].f1, 2.0 / 3.0);
}

TEST(F1, AbsentClassScoresZero) {
  const std::vector<int> y{0, 1, 0};
  const auto s = class_scores(confusion_matrix(y, y, 3));
  EXPECT_EQ(s[2].f1, 0.0);
  EXPECT_EQ(s[2].precision, 0.0);
  EXPECT_EQ(s[2].recall, 0.0);
}

TEST(F1, MatchesDefinitionOnRandomData) {
  auto gen = oracle::make_gen(4);
  const auto preds = random_labels(500, 5, gen), truth = random_labels(500, 5, gen);
  const auto s = class_scores(confusion_matrix(preds, truth, 5));
  double macro = 0;
  for (int c = 0; c < 5; ++c) {
    const Counted o = counted_scores(preds, truth, c);
    EXPECT_DOUBLE_EQ(s[c].precision, o.p);
    EXPECT_DOUBLE_EQ(s[c].recall, o.r);
    EXPECT_NEAR(s[c].f1, o.f1, 1e-15);
    macro += o.f1;
  }
  EXPECT_NEAR(macro_f1(confusion_matrix(preds, truth, 5)), macro / 5, 1e-15);
}

TEST(F1, MacroInvariantUnderRelabeling) {
  auto gen = oracle::make_gen(5);
  const auto preds = random_labels(300, 6, gen), truth = random_labels(300, 6, gen);
  std::vector<int> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  std::vector<int> p2, t2;
  for (int v : preds) p2.push_back(perm[v]);
  for (int v : truth) t2.push_back(perm[v]);
  // Same multiset of per-class F1 values; the sum order differs, hence NEAR.
  EXPECT_NEAR(macro_f1(confusion_matrix(preds, truth, 6)), macro_f1(confusion_matrix(p2, t2, 6)), 1e-15);
}

TEST(Accuracy, AllNoneRandom) {
  const std::vector<int> a{0, 1, 2}, b{1, 2, 0};
  EXPECT_EQ(accuracy(a, a), 1.0);
  EXPECT_EQ(accuracy(a, b), 0.0);
  auto gen = oracle::make_gen(6);
  const auto p = random_labels(777, 4, gen), t = random_labels(777, 4, gen);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hits += p[i] == t[i];
  EXPECT_EQ(accuracy(p, t), static_cast<double>(hits) / 777.0);
  const auto cm = confusion_matrix(p, t, 4);
  EXPECT_EQ(accuracy(p, t), static_cast<double>(cm.trace()) / static_cast<double>(cm.total()));
}

TEST(Accuracy, EmptyRejected) { EXPECT_THROW(accuracy({}, {}), ContractError); }

TEST(Logloss, OneHotIsZero) {
  const std::vector<double> probs{1, 0, 0, 0, 1, 0};
  const std::vector<int> truth{0, 1};
  EXPECT_EQ(logloss(probs, truth, 3), 0.0);
}

TEST(Logloss, UniformIsLogG) {
  const std::vector<double> probs(5 * 16, 1.0 / 16.0);
  const std::vector<int> truth{0, 3, 7, 15, 9};
  EXPECT_NEAR(logloss(probs, truth, 16), std::log(16.0), 1e-9);
}

TEST(Logloss, MatchesSummationOracle) {
  auto gen = oracle::make_gen(7);
  const std::size_t n = 50, g = 5;
  std::vector<double> probs = oracle::random_vec(n * g, gen, 0.01, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t c = 0; c < g; ++c) s += probs[i * g + c];
    for (std::size_t c = 0; c < g; ++c) probs[i * g + c] /= s;
  }
  const auto truth = random_labels(n, g, gen);
  long double expected = 0;
  for (std::size_t i = 0; i < n; ++i) expected -= std::log(static_cast<long double>(probs[i * g + truth[i]]));
  EXPECT_NEAR(logloss(probs, truth, g), static_cast<double>(expected / n), 1e-12);
}

TEST(Logloss, ClampsZeroProbability) {
  const std::vector<double> probs{0, 1};
  const std::vector<int> truth{0};
  EXPECT_NEAR(logloss(probs, truth, 2), -std::log(1e-15), 1e-9);
}

TEST(Logloss, LengthMismatch) {
  const std::vector<double> probs{0.5, 0.5};
  const std::vector<int> truth{0, 1};
  EXPECT_THROW(logloss(probs, truth, 2), DimensionError);
}

TEST(Report, JsonFieldsInRange) {
  const std::vector<double> probs{0.7, 0.3, 0.2, 0.8, 0.6, 0.4};
  const std::vector<int> truth{0, 1, 1};
  const auto rep = evaluate_predictions(probs, truth, {"Rock", "Jazz"});
  EXPECT_EQ(rep.samples, 3u);
  EXPECT_DOUBLE_EQ(rep.accuracy, 2.0 / 3.0);
  const auto j = nlohmann::json::parse(report_json(rep));
  EXPECT_EQ(j["samples"], 3);
  for (const char* k : {"accuracy", "macro_f1"}) {
    EXPECT_GE(j[k].get<double>(), 0.0);
    EXPECT_LE(j[k].get<double>(), 1.0);
  }
  EXPECT_GE(j["logloss"].get<double>(), 0.0);
  ASSERT_EQ(j["per_class"].size(), 2u);
  EXPECT_EQ(j["per_class"][1]["label"], "Jazz");
  EXPECT_EQ(j["confusion"].size(), 2u);
  const std::string table = report_table(rep);
  EXPECT_NE(table.find("Rock"), std::string::npos);
  EXPECT_NE(table.find("Jazz"), std::string::npos);
}
