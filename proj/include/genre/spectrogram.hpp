// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "genre/wav.hpp"

namespace genre {

/// Dense row-major matrix of doubles used by the feature pipeline.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

enum class WindowKind { hann, rectangular };

struct SpectrogramConfig {
  std::size_t n_fft = 2048;
  std::size_t hop = 441;
  WindowKind window = WindowKind::hann;
  std::size_t n_mels = 500;
  double fmin = 20.0;
  double fmax = 11025.0;
  double floor_db = -80.0;
  /// Expected input rate; 0 accepts whatever the signal declares.
  std::uint32_t sample_rate = 22050;
  /// Time length of the fitted grid.
  std::size_t frames = 1500;

  bool operator==(const SpectrogramConfig&) const = default;
};

/// Throws ConfigError unless 0 < hop <= n_fft, n_mels >= 2, 0 <= fmin < fmax
/// and frames > 0.
void validate(const SpectrogramConfig& cfg);

/// Mel scale used for filter placement: 2595 * log10(1 + f / 700).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Periodic window of length n.
std::vector<double> make_window(WindowKind kind, std::size_t n);

/// |DFT| of windowed frames: [(n_fft/2 + 1) x frames] with
/// frames = 1 + floor((len - n_fft) / hop). No centering or padding.
Matrix stft_magnitude(const PcmSignal& signal, const SpectrogramConfig& cfg);

/// Triangular filters [n_mels x (n_fft/2 + 1)] whose edges and centres are
/// n_mels + 2 points evenly spaced in mel between fmin and fmax. Peak weight 1.
Matrix mel_filterbank(const SpectrogramConfig& cfg, std::uint32_t sample_rate);

/// Centre frequencies (Hz) of the filters built by mel_filterbank.
std::vector<double> mel_center_frequencies(const SpectrogramConfig& cfg);

/// 10 * log10(filterbank . |X|^2 + 1e-10), clamped below at floor_db.
/// Result is [n_mels x frames].
Matrix log_mel_spectrogram(const PcmSignal& signal, const SpectrogramConfig& cfg);

/// Fixed-size log-mel image, stored in single precision.
struct Spectrogram {
  std::size_t mels = 0;
  std::size_t frames = 0;
  std::vector<float> values;  // mels x frames, row-major

  float at(std::size_t m, std::size_t t) const { return values[m * frames + t]; }
};

/// Centre-crops (frames 50..1549 out of 1600) or right-pads with floor_db to
/// exactly cfg.frames columns. The mel axis must already equal cfg.n_mels.
Spectrogram fit_to_grid(const Matrix& log_mel, const SpectrogramConfig& cfg);

/// Decode + log-mel + fit, in one call.
Spectrogram spectrogram_from_wav(const std::filesystem::path& wav, const SpectrogramConfig& cfg);

/// Cache file: "MSPC", u16 version (1), u32 mels, u32 frames, then
/// little-endian f32 values row-major.
std::vector<std::uint8_t> encode_spectrogram(const Spectrogram& spec);
Spectrogram decode_spectrogram(std::span<const std::uint8_t> bytes);
void save_spectrogram(const Spectrogram& spec, const std::filesystem::path& path);
Spectrogram load_spectrogram(const std::filesystem::path& path);

}  // namespace genre
