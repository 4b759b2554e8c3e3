// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genre/gradcheck.hpp"
#include "genre/tensor.hpp"

namespace genre {

struct SuiteOptions {
  std::uint64_t seed = 0;
  std::size_t primitive_seeds = 100;  // per primitive op and per HAN piece
  std::size_t encoder_seeds = 10;     // cnn, han
  std::size_t model_seeds = 3;        // full fused model with loss
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::vector<std::string> only;  // check names to run; empty runs all
};

struct SuiteEntry {
  std::string name;
  std::size_t seeds = 0;
  GradCheckResult worst;      // worst coordinate over all seeds
  std::uint64_t worst_seed = 0;
  std::vector<OpKind> ops;    // op kinds present in the checked graphs
  bool passed = true;
};

struct SuiteReport {
  std::vector<SuiteEntry> entries;
  std::vector<OpKind> covered;  // distinct op kinds reached by some check
  double max_rel_error = 0.0;
  std::string worst_check;
  /// Ops under suspicion when checks fail: kinds present in every failing
  /// check whose own primitive check also failed.
  std::vector<OpKind> suspects;
  bool passed = true;
};

/// Names of the registered checks: one per primitive op kind, then
/// gru_cell, bigru, attention, cnn, han and model.
std::vector<std::string> gradcheck_suite_names();

/// Runs every registered check. Seeds are opts.seed, opts.seed + 1, ...
SuiteReport run_gradcheck_suite(const SuiteOptions& opts = {});

/// Human-readable report: one line per check, coverage, worst offender.
std::string format_suite_report(const SuiteReport& report, const SuiteOptions& opts);

}  // namespace genre
