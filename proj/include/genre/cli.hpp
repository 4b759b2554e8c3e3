// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <exception>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace genre::cli {

enum ExitCode : int {
  kOk = 0,
  kValidation = 1,  // bad flags, config, manifest or checkpoint mismatch
  kRuntime = 2,     // I/O and decoding failures during the work itself
  kNumeric = 3,     // NaN/Inf during training, failed gradient check
};

/// Runs one command line (argv[0] is the program name). Results go to `out`,
/// logs and error messages to `err`. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// 64-bit FNV-1a, used to key spectrogram caches on their source bytes.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Cache file stem for a track id: the id itself when it is a safe file
/// name, otherwise a sanitized form with a hash suffix.
std::string cache_stem(const std::string& track_id);

}  // namespace genre::cli
