// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace genre {

/// G x G counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;

  explicit ConfusionMatrix(std::size_t g = 0) : classes(g), counts(g * g, 0) {}
  std::size_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
  std::size_t total() const;
  std::size_t trace() const;
};

/// DimensionError on a length mismatch, ParameterError on a label outside [0, G).
ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> truth, std::size_t classes);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// Per-class precision, recall and F1; any 0/0 is taken as 0.
std::vector<ClassScores> class_scores(const ConfusionMatrix& cm);
/// Unweighted mean of the per-class F1 values.
double macro_f1(const ConfusionMatrix& cm);

/// ContractError when N = 0.
double accuracy(std::span<const int> preds, std::span<const int> truth);

/// -(1/N) sum log p[truth]; each row is renormalized to sum 1 and the true
/// class probability is clamped at 1e-15. probs is row-major N x G.
double logloss(std::span<const double> probs, std::span<const int> truth, std::size_t classes);

/// First index of the row maximum for every row of an N x G matrix.
std::vector<int> argmax_rows(std::span<const double> probs, std::size_t classes);

struct MetricsReport {
  std::vector<std::string> labels;
  std::vector<ClassScores> per_class;
  ConfusionMatrix confusion;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  double logloss = 0.0;
  std::size_t samples = 0;
};

MetricsReport evaluate_predictions(std::span<const double> probs, std::span<const int> truth,
                                   const std::vector<std::string>& labels);

/// JSON object with labels, per-class scores, confusion matrix and summary values.
std::string report_json(const MetricsReport& report);
/// Two-column "genre  F1" table followed by the summary values.
std::string report_table(const MetricsReport& report);

}  // namespace genre
