// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "esser/error.hpp"
#include "esser/fft.hpp"

namespace esser {

// Complex spectrogram stored frame-major: data[frame * bins + bin].
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<fft::Complex> data;

  fft::Complex& at(std::size_t f, std::size_t k) { return data[f * bins + k]; }
  const fft::Complex& at(std::size_t f, std::size_t k) const { return data[f * bins + k]; }
};

// Short-time Fourier transform with a square-root periodic Hann window at
// 50% overlap. The squared window sums to one across overlapping frames, so
// synthesize(analyze(x)) == x up to rounding. The signal is padded by one
// hop on the left and enough on the right that every sample lies under two
// frames.
class Stft {
 public:
  explicit Stft(std::size_t frame = 256) : frame_(checked(frame)), hop_(frame / 2), window_(frame), plan_(frame) {
    for (std::size_t n = 0; n < frame; ++n) {
      window_[n] = std::sin(std::numbers::pi * static_cast<double>(n) / static_cast<double>(frame));
    }
  }

  std::size_t frame() const { return frame_; }
  std::size_t hop() const { return hop_; }
  std::size_t bins() const { return frame_ / 2 + 1; }

  std::size_t frames_for(std::size_t length) const { return (length + hop_ - 1) / hop_ + 1; }

  Spectrogram analyze(std::span<const double> signal) const {
    Spectrogram s;
    s.frames = frames_for(signal.size());
    s.bins = bins();
    s.data.resize(s.frames * s.bins);
    std::vector<double> buf(frame_);
    for (std::size_t f = 0; f < s.frames; ++f) {
      for (std::size_t n = 0; n < frame_; ++n) {
        const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(f * hop_ + n) - static_cast<std::ptrdiff_t>(hop_);
        const bool inside = t >= 0 && static_cast<std::size_t>(t) < signal.size();
        buf[n] = inside ? window_[n] * signal[static_cast<std::size_t>(t)] : 0.0;
      }
      const auto spec = plan_.rfft(buf);
      std::copy(spec.begin(), spec.end(), s.data.begin() + static_cast<std::ptrdiff_t>(f * s.bins));
    }
    return s;
  }

  std::vector<double> synthesize(const Spectrogram& s, std::size_t length) const {
    if (s.bins != bins() || s.frames != frames_for(length)) {
      throw DimensionError("stft: spectrogram shape does not match length");
    }
    std::vector<double> out(length, 0.0);
    for (std::size_t f = 0; f < s.frames; ++f) {
      const auto frame = plan_.irfft(std::span<const fft::Complex>(s.data).subspan(f * s.bins, s.bins));
      for (std::size_t n = 0; n < frame_; ++n) {
        const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(f * hop_ + n) - static_cast<std::ptrdiff_t>(hop_);
        if (t >= 0 && static_cast<std::size_t>(t) < length) out[static_cast<std::size_t>(t)] += window_[n] * frame[n];
      }
    }
    return out;
  }

  // Weight of bin k in the real inverse transform: bins other than DC and
  // Nyquist stand for a conjugate pair.
  double bin_weight(std::size_t k) const {
    return (k == 0 || k == frame_ / 2 ? 1.0 : 2.0) / static_cast<double>(frame_);
  }

 private:
  static std::size_t checked(std::size_t frame) {
    if (!fft::is_power_of_two(frame) || frame < 4) {
      throw DimensionError("stft: frame length must be a power of two >= 4");
    }
    return frame;
  }

  std::size_t frame_;
  std::size_t hop_;
  std::vector<double> window_;
  fft::Plan plan_;
};

}  // namespace esser
