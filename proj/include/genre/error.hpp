// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace genre {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// exit codes (validation = 1, runtime = 2, numeric = 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not compose (matmul inner dims, kernel longer than input...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range hyperparameter or degenerate argument (p >= 1, batch of 1).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// API misuse: non-scalar loss, backward twice, empty softmax support.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced from finite inputs, or a failed gradient check.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (WAV, spectrogram cache, embeddings, checkpoint).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Unsupported checkpoint version or a checkpoint that does not match the
/// configuration it is used with.
class CheckpointError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Invalid configuration or manifest content detected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace genre
