// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace genre {

/// Mono audio with samples normalized to [-1, 1].
struct PcmSignal {
  std::vector<double> samples;
  std::uint32_t sample_rate = 0;
};

/// Decodes a RIFF/WAVE byte stream holding 16-bit integer PCM or 32-bit IEEE
/// float samples (plain or WAVE_FORMAT_EXTENSIBLE), mono or stereo. Stereo is
/// averaged to mono. 16-bit samples map to s / 32768.
///
/// Throws FormatError with the byte offset on compressed codecs, unsupported
/// sample widths, truncated chunks and empty data.
PcmSignal decode_wav(std::span<const std::uint8_t> bytes);
PcmSignal read_wav(const std::filesystem::path& path);

enum class WavEncoding { pcm16, float32 };

/// Mono WAV encoder. pcm16 rounds x * 32768 and clamps to the int16 range, so
/// decode(encode(x)) is within one quantization step (1 / 32768) of x.
std::vector<std::uint8_t> encode_wav(const PcmSignal& signal, WavEncoding encoding = WavEncoding::pcm16);
void write_wav(const std::filesystem::path& path, const PcmSignal& signal,
               WavEncoding encoding = WavEncoding::pcm16);

}  // namespace genre
