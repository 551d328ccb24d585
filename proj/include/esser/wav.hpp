// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "esser/error.hpp"
#include "esser/sigcore.hpp"

namespace esser {

enum class SampleFormat { Pcm16, Float32 };

namespace wav_detail {

inline constexpr std::uint16_t kFormatPcm = 1;
inline constexpr std::uint16_t kFormatFloat = 3;
inline constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}
inline void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace wav_detail

// Decodes a mono RIFF/WAVE image: 16-bit PCM or 32-bit IEEE float,
// optionally wrapped in WAVE_FORMAT_EXTENSIBLE. Nothing is returned unless
// the whole data chunk is present.
inline Waveform decode_wav(const std::vector<unsigned char>& bytes) {
  using namespace wav_detail;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("wav: missing RIFF/WAVE header");
  }
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw FormatError("wav: truncated fmt chunk");
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = le32(bytes.data() + body + 4);
      bits = le16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw FormatError("wav: truncated extensible fmt chunk");
        format = le16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      if (channels != 1) throw FormatError("wav: only mono audio is supported");
      if (rate == 0 || rate > 0x7fffffff) throw FormatError("wav: bad sample rate");
      if (body + size > bytes.size()) throw FormatError("wav: truncated data chunk");
      const unsigned char* data = bytes.data() + body;
      std::vector<double> samples;
      if (format == kFormatPcm && bits == 16) {
        if (size % 2 != 0) throw FormatError("wav: odd PCM16 data size");
        samples.resize(size / 2);
        for (std::size_t i = 0; i < samples.size(); ++i) {
          const auto v = static_cast<std::int16_t>(le16(data + 2 * i));
          samples[i] = static_cast<double>(v) / 32768.0;
        }
      } else if (format == kFormatFloat && bits == 32) {
        if (size % 4 != 0) throw FormatError("wav: ragged float32 data size");
        samples.resize(size / 4);
        for (std::size_t i = 0; i < samples.size(); ++i) {
          samples[i] = static_cast<double>(std::bit_cast<float>(le32(data + 4 * i)));
        }
      } else {
        throw FormatError("wav: unsupported encoding (format " + std::to_string(format) + ", " +
                          std::to_string(bits) + " bits)");
      }
      Waveform w(std::move(samples), static_cast<int>(rate));
      for (double v : w.samples) {
        if (!std::isfinite(v)) throw FormatError("wav: non-finite sample");
      }
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError("wav: no data chunk");
}

inline std::vector<unsigned char> encode_wav(const Waveform& w, SampleFormat fmt) {
  using namespace wav_detail;
  const bool is_float = fmt == SampleFormat::Float32;
  const std::uint16_t bits = is_float ? 32 : 16;
  const std::uint32_t data_size = static_cast<std::uint32_t>(w.size() * (bits / 8));
  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, is_float ? kFormatFloat : kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(w.sample_rate));
  put32(out, static_cast<std::uint32_t>(w.sample_rate) * (bits / 8));
  put16(out, bits / 8);
  put16(out, bits);
  put_tag(out, "data");
  put32(out, data_size);
  for (double v : w.samples) {
    if (is_float) {
      put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      const double q = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
  }
  return out;
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Waveform read_wav(const std::filesystem::path& path) {
  try {
    return decode_wav(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w,
                      SampleFormat fmt = SampleFormat::Float32) {
  validate(w, "write_wav");
  const auto bytes = encode_wav(w, fmt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace esser
