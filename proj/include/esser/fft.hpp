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

namespace esser::fft {

using Complex = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Precomputed radix-2 transform of one size. Forward uses exp(-i...), no
// scaling in either direction.
class Plan {
 public:
  explicit Plan(std::size_t n) : n_(n), twiddle_(n / 2), swap_(n) {
    if (!is_power_of_two(n)) throw DimensionError("fft size must be a power of two");
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = Complex(std::cos(angle), std::sin(angle));
    }
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      swap_[i] = j;
    }
  }

  std::size_t size() const { return n_; }

  void transform(std::span<Complex> data, bool inverse) const {
    if (data.size() != n_) throw DimensionError("fft: buffer size differs from plan");
    for (std::size_t i = 1; i < n_; ++i) {
      if (i < swap_[i]) std::swap(data[i], data[swap_[i]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n_ / len;
      for (std::size_t k = 0; k < half; ++k) {
        const Complex tw = twiddle_[k * stride];
        const Complex w = inverse ? std::conj(tw) : tw;
        for (std::size_t start = 0; start < n_; start += len) {
          const Complex u = data[start + k];
          const Complex v = data[start + k + half] * w;
          data[start + k] = u + v;
          data[start + k + half] = u - v;
        }
      }
    }
  }

  // Half spectrum (n/2 + 1 bins) of a real frame.
  std::vector<Complex> rfft(std::span<const double> frame) const {
    std::vector<Complex> buf(frame.begin(), frame.end());
    transform(buf, false);
    buf.resize(n_ / 2 + 1);
    return buf;
  }

  // Inverse of rfft, including the 1/n factor.
  std::vector<double> irfft(std::span<const Complex> half) const {
    if (half.size() != n_ / 2 + 1) throw DimensionError("irfft: half spectrum size mismatch");
    std::vector<Complex> buf(n_);
    buf[0] = Complex(half[0].real(), 0.0);
    for (std::size_t k = 1; k < n_ / 2; ++k) {
      buf[k] = half[k];
      buf[n_ - k] = std::conj(half[k]);
    }
    buf[n_ / 2] = Complex(half[n_ / 2].real(), 0.0);
    transform(buf, true);
    std::vector<double> out(n_);
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = buf[i].real() * scale;
    return out;
  }

 private:
  std::size_t n_;
  std::vector<Complex> twiddle_;
  std::vector<std::size_t> swap_;
};

inline void transform(std::span<Complex> data, bool inverse) { Plan(data.size()).transform(data, inverse); }

inline std::vector<Complex> rfft(std::span<const double> frame) { return Plan(frame.size()).rfft(frame); }

inline std::vector<double> irfft(std::span<const Complex> half, std::size_t n) { return Plan(n).irfft(half); }

// One real sinusoid of a length-T signal: cos_weight*cos(2*pi*bin*t/T) +
// sin_weight*sin(2*pi*bin*t/T). Distinct (bin, cos|sin) pairs with
// 0 <= bin <= T/2 are mutually orthogonal over t = 0..T-1.
struct Partial {
  std::size_t bin = 0;
  double cos_weight = 0.0;
  double sin_weight = 0.0;
};

// Sums partials sample by sample. Phases are reduced exactly on the integer
// grid (bin*t mod T) so every partial is evaluated from the same table.
inline std::vector<double> synthesize(std::span<const Partial> partials, std::size_t length) {
  if (is_power_of_two(length) && length >= 4 && partials.size() > 64) {
    // Dense spectra: one inverse transform instead of per-partial sums.
    std::vector<Complex> half(length / 2 + 1);
    const double n = static_cast<double>(length);
    for (const Partial& p : partials) {
      if (p.bin > length / 2) throw DimensionError("synthesize: bin above Nyquist");
      const bool edge = p.bin == 0 || p.bin == length / 2;
      half[p.bin] += edge ? Complex(p.cos_weight * n, 0.0)
                          : Complex(p.cos_weight * n / 2.0, -p.sin_weight * n / 2.0);
    }
    return irfft(half, length);
  }
  std::vector<double> cos_table(length), sin_table(length);
  for (std::size_t j = 0; j < length; ++j) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) /
                         static_cast<double>(length);
    cos_table[j] = std::cos(angle);
    sin_table[j] = std::sin(angle);
  }
  std::vector<double> out(length, 0.0);
  for (const Partial& p : partials) {
    if (p.bin > length / 2) throw DimensionError("synthesize: bin above Nyquist");
    const std::size_t step = p.bin % length;
    std::size_t phase = 0;
    for (std::size_t t = 0; t < length; ++t) {
      out[t] += p.cos_weight * cos_table[phase] + p.sin_weight * sin_table[phase];
      phase += step;
      if (phase >= length) phase -= length;
    }
  }
  return out;
}

}  // namespace esser::fft
