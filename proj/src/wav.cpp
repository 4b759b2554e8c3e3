// SPDX-License-Identifier: Apache-2.0
#include "genre/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>

#include "genre/binary_io.hpp"

namespace genre {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

FmtChunk parse_fmt(ByteReader& r, std::uint32_t size) {
  if (size < 16) r.fail("fmt chunk too short (" + std::to_string(size) + " bytes)");
  const std::size_t start = r.offset();
  FmtChunk fmt;
  fmt.format = r.u16("format tag");
  fmt.channels = r.u16("channel count");
  fmt.sample_rate = r.u32("sample rate");
  r.u32("byte rate");
  fmt.block_align = r.u16("block align");
  fmt.bits = r.u16("bits per sample");
  if (fmt.format == kFormatExtensible) {
    if (size < 40) r.fail("extensible fmt chunk too short");
    r.u16("extension size");
    r.u16("valid bits");
    r.u32("channel mask");
    // The sub-format GUID starts with the plain format tag.
    fmt.format = r.u16("sub-format tag");
    r.skip(14, "sub-format GUID");
  }
  r.skip(size - (r.offset() - start), "fmt chunk tail");
  return fmt;
}

}  // namespace

PcmSignal decode_wav(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "WAV");
  if (r.bytes(4, "RIFF tag") != "RIFF") r.fail("missing RIFF tag");
  r.u32("RIFF size");
  if (r.bytes(4, "WAVE tag") != "WAVE") r.fail("missing WAVE tag");

  std::optional<FmtChunk> fmt;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  std::size_t data_offset = 0;
  while (r.remaining() >= 8 && !have_data) {
    const std::string id = r.bytes(4, "chunk id");
    const std::uint32_t size = r.u32("chunk size");
    if (id == "fmt ") {
      fmt = parse_fmt(r, size);
    } else if (id == "data") {
      if (!fmt) r.fail("data chunk before fmt chunk");
      data_offset = r.offset();
      data = r.span(size, "sample data");
      have_data = true;
    } else {
      r.skip(size, "chunk body");
    }
    if (!have_data && (size & 1u) && r.remaining() > 0) r.skip(1, "chunk padding");
  }
  if (!fmt) r.fail("no fmt chunk");
  if (!have_data) r.fail("no data chunk");
  if (fmt->format != kFormatPcm && fmt->format != kFormatFloat) {
    r.fail("unsupported codec tag 0x" + [&] {
      char buf[8];
      std::snprintf(buf, sizeof buf, "%04x", fmt->format);
      return std::string(buf);
    }() + " (only PCM and IEEE float are decoded)");
  }
  if (fmt->format == kFormatPcm && fmt->bits != 16) {
    r.fail("unsupported PCM width of " + std::to_string(fmt->bits) + " bits");
  }
  if (fmt->format == kFormatFloat && fmt->bits != 32) {
    r.fail("unsupported float width of " + std::to_string(fmt->bits) + " bits");
  }
  if (fmt->channels != 1 && fmt->channels != 2) {
    r.fail("unsupported channel count " + std::to_string(fmt->channels));
  }
  if (fmt->sample_rate == 0) r.fail("sample rate is zero");
  const std::size_t width = fmt->bits / 8u;
  const std::size_t frame_bytes = width * fmt->channels;
  if (data.empty()) {
    throw FormatError("WAV: zero-length data chunk at offset " + std::to_string(data_offset));
  }
  if (data.size() % frame_bytes != 0) {
    throw FormatError("WAV: data chunk of " + std::to_string(data.size()) +
                      " bytes is not a whole number of frames at offset " +
                      std::to_string(data_offset));
  }

  PcmSignal out;
  out.sample_rate = fmt->sample_rate;
  const std::size_t frames = data.size() / frame_bytes;
  out.samples.resize(frames);
  ByteReader samples(data, "WAV data");
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt->channels; ++c) {
      if (fmt->format == kFormatPcm) {
        acc += static_cast<std::int16_t>(samples.u16("sample")) / 32768.0;
      } else {
        const float v = samples.f32("sample");
        if (!std::isfinite(v)) {
          throw FormatError("WAV: non-finite float sample at offset " +
                            std::to_string(data_offset + samples.offset() - 4));
        }
        acc += std::clamp(static_cast<double>(v), -1.0, 1.0);
      }
    }
    out.samples[i] = acc / fmt->channels;
  }
  return out;
}

PcmSignal read_wav(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const PcmSignal& signal, WavEncoding encoding) {
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint32_t width = bits / 8u;
  const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * width);
  ByteWriter w;
  w.bytes("RIFF");
  w.u32(36 + data_bytes);
  w.bytes("WAVE");
  w.bytes("fmt ");
  w.u32(16);
  w.u16(encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat);
  w.u16(1);
  w.u32(signal.sample_rate);
  w.u32(signal.sample_rate * width);
  w.u16(static_cast<std::uint16_t>(width));
  w.u16(bits);
  w.bytes("data");
  w.u32(data_bytes);
  for (double s : signal.samples) {
    if (encoding == WavEncoding::pcm16) {
      const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      w.f32(static_cast<float>(s));
    }
  }
  return w.take();
}

void write_wav(const std::filesystem::path& path, const PcmSignal& signal, WavEncoding encoding) {
  write_file_bytes(path, encode_wav(signal, encoding));
}

}  // namespace genre
