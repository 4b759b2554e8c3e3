// SPDX-License-Identifier: Apache-2.0
#include "genre/spectrogram.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "genre/binary_io.hpp"
#include "genre/error.hpp"

namespace genre {

void validate(const SpectrogramConfig& cfg) {
  if (cfg.n_fft == 0) throw ConfigError("spectrogram: n_fft must be positive");
  if (cfg.hop == 0 || cfg.hop > cfg.n_fft) {
    throw ConfigError("spectrogram: hop must satisfy 0 < hop <= n_fft (hop " +
                      std::to_string(cfg.hop) + ", n_fft " + std::to_string(cfg.n_fft) + ")");
  }
  if (cfg.n_mels < 2) throw ConfigError("spectrogram: n_mels must be at least 2");
  if (!(cfg.fmin >= 0.0) || !(cfg.fmin < cfg.fmax)) {
    throw ConfigError("spectrogram: need 0 <= fmin < fmax");
  }
  if (cfg.frames == 0) throw ConfigError("spectrogram: grid frame count must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> make_window(WindowKind kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (kind == WindowKind::hann) {
    for (std::size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

namespace {

// FFTW's planner is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

Matrix stft_magnitude(const PcmSignal& signal, const SpectrogramConfig& cfg) {
  validate(cfg);
  const std::size_t n = cfg.n_fft;
  const std::size_t len = signal.samples.size();
  if (len < n) {
    throw ParameterError("stft: signal of " + std::to_string(len) +
                         " samples is shorter than one frame of " + std::to_string(n));
  }
  const std::size_t frames = 1 + (len - n) / cfg.hop;
  const std::size_t bins = n / 2 + 1;
  const auto window = make_window(cfg.window, n);

  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(bins));
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
  }
  Matrix mag(bins, frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = signal.samples.data() + f * cfg.hop;
    for (std::size_t i = 0; i < n; ++i) in.get()[i] = src[i] * window[i];
    fftw_execute_dft_r2c(plan, in.get(), out.get());
    for (std::size_t k = 0; k < bins; ++k) {
      mag.at(k, f) = std::hypot(out.get()[k][0], out.get()[k][1]);
    }
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return mag;
}

std::vector<double> mel_center_frequencies(const SpectrogramConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  std::vector<double> centers(cfg.n_mels);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    centers[m] = mel_to_hz(lo + (hi - lo) * static_cast<double>(m + 1) / static_cast<double>(cfg.n_mels + 1));
  }
  return centers;
}

Matrix mel_filterbank(const SpectrogramConfig& cfg, std::uint32_t sample_rate) {
  if (cfg.n_mels < 2) throw ParameterError("mel filterbank needs at least 2 filters");
  if (sample_rate == 0) throw ParameterError("mel filterbank: sample rate must be positive");
  const double nyquist = sample_rate / 2.0;
  if (cfg.fmax > nyquist) {
    throw ParameterError("mel filterbank: fmax " + std::to_string(cfg.fmax) +
                         " Hz exceeds the Nyquist frequency " + std::to_string(nyquist) + " Hz");
  }
  if (!(cfg.fmin < cfg.fmax) || cfg.fmin < 0.0) throw ParameterError("mel filterbank: need 0 <= fmin < fmax");
  const std::size_t bins = cfg.n_fft / 2 + 1;
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  }
  Matrix fb(cfg.n_mels, bins);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(cfg.n_fft);
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      fb.at(m, k) = std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

Matrix log_mel_spectrogram(const PcmSignal& signal, const SpectrogramConfig& cfg) {
  validate(cfg);
  if (cfg.sample_rate != 0 && signal.sample_rate != cfg.sample_rate) {
    throw ConfigError("signal sample rate " + std::to_string(signal.sample_rate) +
                      " Hz differs from the configured " + std::to_string(cfg.sample_rate) +
                      " Hz (resampling is not supported)");
  }
  const Matrix fb = mel_filterbank(cfg, signal.sample_rate);
  const Matrix mag = stft_magnitude(signal, cfg);
  Matrix out(cfg.n_mels, mag.cols);
  std::vector<double> power(mag.rows);
  for (std::size_t f = 0; f < mag.cols; ++f) {
    for (std::size_t k = 0; k < mag.rows; ++k) power[k] = mag.at(k, f) * mag.at(k, f);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      const double* row = fb.values.data() + m * fb.cols;
      for (std::size_t k = 0; k < mag.rows; ++k) acc += row[k] * power[k];
      out.at(m, f) = std::max(10.0 * std::log10(acc + 1e-10), cfg.floor_db);
    }
  }
  return out;
}

Spectrogram fit_to_grid(const Matrix& log_mel, const SpectrogramConfig& cfg) {
  if (log_mel.rows != cfg.n_mels) {
    throw ConfigError("fit_to_grid: spectrogram has " + std::to_string(log_mel.rows) +
                      " mel bands, grid expects " + std::to_string(cfg.n_mels));
  }
  Spectrogram out;
  out.mels = cfg.n_mels;
  out.frames = cfg.frames;
  out.values.assign(out.mels * out.frames, static_cast<float>(cfg.floor_db));
  const std::size_t start = log_mel.cols > cfg.frames ? (log_mel.cols - cfg.frames) / 2 : 0;
  const std::size_t keep = std::min(log_mel.cols, cfg.frames);
  for (std::size_t m = 0; m < out.mels; ++m)
    for (std::size_t t = 0; t < keep; ++t)
      out.values[m * out.frames + t] = static_cast<float>(log_mel.at(m, start + t));
  return out;
}

Spectrogram spectrogram_from_wav(const std::filesystem::path& wav, const SpectrogramConfig& cfg) {
  return fit_to_grid(log_mel_spectrogram(read_wav(wav), cfg), cfg);
}

// ---------------------------------------------------------------------------
// Cache format

namespace {
constexpr std::uint16_t kSpectrogramVersion = 1;
}

std::vector<std::uint8_t> encode_spectrogram(const Spectrogram& spec) {
  if (spec.values.size() != spec.mels * spec.frames) {
    throw DimensionError("spectrogram payload does not match its dimensions");
  }
  if (spec.mels > std::numeric_limits<std::uint32_t>::max() ||
      spec.frames > std::numeric_limits<std::uint32_t>::max()) {
    throw DimensionError("spectrogram dimensions exceed the cache format");
  }
  ByteWriter w;
  w.bytes("MSPC");
  w.u16(kSpectrogramVersion);
  w.u32(static_cast<std::uint32_t>(spec.mels));
  w.u32(static_cast<std::uint32_t>(spec.frames));
  for (float v : spec.values) w.f32(v);
  return w.take();
}

Spectrogram decode_spectrogram(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "spectrogram cache");
  if (r.bytes(4, "magic") != "MSPC") r.fail("bad magic (expected MSPC)");
  const std::uint16_t version = r.u16("version");
  if (version != kSpectrogramVersion) r.fail("unsupported version " + std::to_string(version));
  Spectrogram spec;
  spec.mels = r.u32("mel count");
  spec.frames = r.u32("frame count");
  const std::uint64_t count = static_cast<std::uint64_t>(spec.mels) * spec.frames;
  if (count == 0) r.fail("zero-sized spectrogram");
  if (count * 4 != r.remaining()) {
    r.fail("header declares " + std::to_string(spec.mels) + "x" + std::to_string(spec.frames) +
           " values but payload holds " + std::to_string(r.remaining()) + " bytes");
  }
  spec.values.resize(static_cast<std::size_t>(count));
  for (float& v : spec.values) v = r.f32("value");
  return spec;
}

void save_spectrogram(const Spectrogram& spec, const std::filesystem::path& path) {
  write_file_bytes(path, encode_spectrogram(spec));
}

Spectrogram load_spectrogram(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_spectrogram(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace genre
