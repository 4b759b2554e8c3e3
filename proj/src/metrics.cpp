// SPDX-License-Identifier: Apache-2.0
#include "genre/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numeric>

#include "genre/error.hpp"

namespace genre {

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t c = 0; c < classes; ++c) t += at(c, c);
  return t;
}

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> truth, std::size_t classes) {
  if (preds.size() != truth.size()) {
    throw DimensionError("confusion matrix: " + std::to_string(preds.size()) + " predictions for " +
                         std::to_string(truth.size()) + " labels");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || truth[i] < 0 || static_cast<std::size_t>(preds[i]) >= classes ||
        static_cast<std::size_t>(truth[i]) >= classes) {
      throw ParameterError("confusion matrix: label out of range at index " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(truth[i]) * classes + static_cast<std::size_t>(preds[i])];
  }
  return cm;
}

namespace {
double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

std::vector<ClassScores> class_scores(const ConfusionMatrix& cm) {
  std::vector<ClassScores> out(cm.classes);
  for (std::size_t c = 0; c < cm.classes; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < cm.classes; ++k) {
      predicted += cm.at(k, c);
      actual += cm.at(c, k);
    }
    const std::size_t tp = cm.at(c, c);
    ClassScores& s = out[c];
    s.precision = ratio(tp, predicted);
    s.recall = ratio(tp, actual);
    // 2PR / (P + R) written in counts: 2tp / (predicted + actual)
    s.f1 = ratio(2 * tp, predicted + actual);
    s.support = actual;
  }
  return out;
}

double macro_f1(const ConfusionMatrix& cm) {
  if (cm.classes == 0) return 0.0;
  // Summed in sorted order so relabeling the classes cannot change the bits.
  std::vector<double> f1;
  for (const auto& s : class_scores(cm)) f1.push_back(s.f1);
  std::sort(f1.begin(), f1.end());
  return std::accumulate(f1.begin(), f1.end(), 0.0) / static_cast<double>(cm.classes);
}

double accuracy(std::span<const int> preds, std::span<const int> truth) {
  if (preds.size() != truth.size()) throw DimensionError("accuracy: length mismatch");
  if (preds.empty()) throw ContractError("accuracy: no samples");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double logloss(std::span<const double> probs, std::span<const int> truth, std::size_t classes) {
  if (classes == 0 || probs.size() != truth.size() * classes) {
    throw DimensionError("logloss: " + std::to_string(probs.size()) + " probabilities for " +
                         std::to_string(truth.size()) + " labels and " + std::to_string(classes) + " classes");
  }
  if (truth.empty()) throw ContractError("logloss: no samples");
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || static_cast<std::size_t>(truth[i]) >= classes) {
      throw ParameterError("logloss: label out of range at index " + std::to_string(i));
    }
    const double* row = probs.data() + i * classes;
    std::vector<double> sorted(row, row + classes);
    std::sort(sorted.begin(), sorted.end());
    const double z = std::accumulate(sorted.begin(), sorted.end(), 0.0);
    if (!(z > 0.0)) throw NumericError("logloss: row " + std::to_string(i) + " does not sum to a positive value");
    const double p = std::max(row[truth[i]] / z, 1e-15);
    total -= std::log(p);
  }
  return total / static_cast<double>(truth.size());
}

std::vector<int> argmax_rows(std::span<const double> probs, std::size_t classes) {
  std::vector<int> out(probs.size() / classes);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* row = probs.data() + i * classes;
    out[i] = static_cast<int>(std::max_element(row, row + classes) - row);
  }
  return out;
}

MetricsReport evaluate_predictions(std::span<const double> probs, std::span<const int> truth,
                                   const std::vector<std::string>& labels) {
  MetricsReport r;
  r.labels = labels;
  const std::vector<int> preds = argmax_rows(probs, labels.size());
  r.confusion = confusion_matrix(preds, truth, labels.size());
  r.per_class = class_scores(r.confusion);
  r.macro_f1 = macro_f1(r.confusion);
  r.samples = truth.size();
  if (!truth.empty()) {
    r.accuracy = accuracy(preds, truth);
    r.logloss = logloss(probs, truth, labels.size());
  }
  return r;
}

std::string report_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["samples"] = report.samples;
  j["accuracy"] = report.accuracy;
  j["macro_f1"] = report.macro_f1;
  j["logloss"] = report.logloss;
  auto& classes = j["per_class"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < report.labels.size(); ++c) {
    const auto& s = report.per_class[c];
    classes.push_back({{"label", report.labels[c]},
                       {"precision", s.precision},
                       {"recall", s.recall},
                       {"f1", s.f1},
                       {"support", s.support}});
  }
  auto& cm = j["confusion"] = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < report.confusion.classes; ++t) {
    std::vector<std::size_t> row(report.confusion.counts.begin() + static_cast<std::ptrdiff_t>(t * report.confusion.classes),
                                 report.confusion.counts.begin() + static_cast<std::ptrdiff_t>((t + 1) * report.confusion.classes));
    cm.push_back(row);
  }
  return j.dump(2);
}

std::string report_table(const MetricsReport& report) {
  std::size_t width = 5;
  for (const auto& l : report.labels) width = std::max(width, l.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %s\n", static_cast<int>(width), "Genre", "F1");
  out += buf;
  for (std::size_t c = 0; c < report.labels.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%-*s  %.4f\n", static_cast<int>(width), report.labels[c].c_str(), report.per_class[c].f1);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "\nmacro F1 %.4f  logloss %.4f  accuracy %.2f%%  (n = %zu)\n", report.macro_f1,
                report.logloss, 100.0 * report.accuracy, report.samples);
  out += buf;
  return out;
}

}  // namespace genre
