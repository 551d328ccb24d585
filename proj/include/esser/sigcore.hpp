// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "esser/error.hpp"
#include "esser/fft.hpp"
#include "esser/rng.hpp"

namespace esser {

inline constexpr int kDefaultSampleRate = 16000;

// A mono signal. All loss and metric math runs on these 64-bit samples
// whatever the on-disk encoding was.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  Waveform() = default;
  explicit Waveform(std::vector<double> s, int rate = kDefaultSampleRate)
      : samples(std::move(s)), sample_rate(rate) {}

  static Waveform zeros(std::size_t length, int rate = kDefaultSampleRate) {
    return Waveform(std::vector<double>(length, 0.0), rate);
  }

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::span<const double> view() const { return samples; }
  double operator[](std::size_t i) const { return samples[i]; }

  friend bool operator==(const Waveform&, const Waveform&) = default;
};

// Throws unless the waveform is non-empty and every sample is finite.
inline void validate(const Waveform& w, const char* what = "waveform") {
  if (w.empty()) throw DimensionError(std::string(what) + ": empty waveform");
  if (w.sample_rate <= 0) throw DomainError(std::string(what) + ": sample rate must be positive");
  for (double v : w.samples) {
    if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite sample");
  }
}

inline void require_compatible(const Waveform& a, const Waveform& b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": length mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
  if (a.sample_rate != b.sample_rate) {
    throw DimensionError(std::string(op) + ": sample rate mismatch");
  }
}

// --- raw span kernels -------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double energy(std::span<const double> a) { return dot(a, a); }

// --- waveform arithmetic ----------------------------------------------------

inline Waveform operator+(const Waveform& a, const Waveform& b) {
  require_compatible(a, b, "add");
  Waveform out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += b.samples[i];
  return out;
}

inline Waveform operator-(const Waveform& a, const Waveform& b) {
  require_compatible(a, b, "subtract");
  Waveform out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] -= b.samples[i];
  return out;
}

inline Waveform operator*(double c, const Waveform& a) {
  Waveform out = a;
  for (double& v : out.samples) v *= c;
  return out;
}

// Sums in ascending index order, starting from the first element. Every
// mixture in the toolkit is formed through this function.
inline Waveform sum(std::span<const Waveform> parts) {
  if (parts.empty()) throw ArgumentError("sum: no waveforms");
  Waveform acc = parts.front();
  for (std::size_t k = 1; k < parts.size(); ++k) acc = acc + parts[k];
  return acc;
}

// --- core operations --------------------------------------------------------

inline double dot(const Waveform& a, const Waveform& b) {
  require_compatible(a, b, "dot");
  return dot(a.view(), b.view());
}

inline double energy(const Waveform& a) { return energy(a.view()); }

// Orthogonal projection of `target` onto the line spanned by `onto`.
inline Waveform project(const Waveform& target, const Waveform& onto) {
  require_compatible(target, onto, "project");
  const double denom = energy(onto);
  if (!(denom > 0.0)) throw DegenerateError("project: zero-energy direction");
  return (dot(target, onto) / denom) * onto;
}

// 10*log10(num / max(den, floor)).
inline double db_ratio(double numerator_energy, double denominator_energy, double floor) {
  if (numerator_energy < 0.0 || denominator_energy < 0.0) {
    throw DomainError("db_ratio: negative energy");
  }
  if (!(floor > 0.0)) throw DomainError("db_ratio: floor must be positive");
  return 10.0 * std::log10(numerator_energy / std::max(denominator_energy, floor));
}

// |<a,b>| / (|a| |b|), in [0, 1].
inline double normalized_correlation(const Waveform& a, const Waveform& b) {
  require_compatible(a, b, "normalized_correlation");
  const double ea = energy(a);
  const double eb = energy(b);
  if (!(ea > 0.0) || !(eb > 0.0)) throw DegenerateError("normalized_correlation: zero-energy operand");
  return std::min(1.0, std::abs(dot(a, b)) / std::sqrt(ea * eb));
}

// The independent components of one mixture: K clean sources and the K
// noises paired with them.
struct ComponentSet {
  std::vector<Waveform> clean_sources;
  std::vector<Waveform> noises;

  std::size_t speakers() const { return clean_sources.size(); }

  // s_noisy_k = s_clean_k + n_k.
  Waveform noisy_source(std::size_t k) const { return clean_sources.at(k) + noises.at(k); }

  // x = sum_k (s_clean_k + n_k), accumulated pairwise in ascending k.
  Waveform mixture() const {
    std::vector<Waveform> noisy;
    noisy.reserve(speakers());
    for (std::size_t k = 0; k < speakers(); ++k) noisy.push_back(noisy_source(k));
    return sum(noisy);
  }

  // Every member in the order s_1, n_1, s_2, n_2, ...
  std::vector<Waveform> members() const {
    std::vector<Waveform> out;
    for (std::size_t k = 0; k < speakers(); ++k) {
      out.push_back(clean_sources[k]);
      out.push_back(noises[k]);
    }
    return out;
  }
};

// Builds K sources and K noises that are exactly orthogonal: the T real DFT
// basis functions are shuffled by `seed` and dealt out so that no two
// components share one; each component gets Gaussian weights on its own
// functions and is normalized to unit energy.
inline ComponentSet make_orthogonal_fixture(std::uint64_t seed, std::size_t speakers,
                                            std::size_t length,
                                            int sample_rate = kDefaultSampleRate) {
  if (speakers == 0 || 2 * speakers > length) {
    throw DimensionError("make_orthogonal_fixture: need 1 <= K and 2K <= T");
  }
  struct Slot {
    std::size_t bin;
    bool sine;
  };
  std::vector<Slot> slots;
  slots.reserve(length);
  for (std::size_t k = 0; k <= length / 2; ++k) {
    slots.push_back({k, false});
    const bool has_sine = k != 0 && !(length % 2 == 0 && k == length / 2);
    if (has_sine) slots.push_back({k, true});
  }
  Rng rng(seed);
  rng.shuffle(slots.begin(), slots.end());

  const std::size_t components = 2 * speakers;
  const std::size_t per_component = std::min<std::size_t>(slots.size() / components, 32);
  std::vector<Waveform> built;
  for (std::size_t c = 0; c < components; ++c) {
    std::vector<fft::Partial> partials;
    for (std::size_t j = 0; j < per_component; ++j) {
      const Slot& s = slots[c + j * components];
      const double w = rng.normal();
      partials.push_back(s.sine ? fft::Partial{s.bin, 0.0, w} : fft::Partial{s.bin, w, 0.0});
    }
    Waveform w(fft::synthesize(partials, length), sample_rate);
    const double e = energy(w);
    if (!(e > 0.0)) throw DegenerateError("make_orthogonal_fixture: zero-energy component");
    built.push_back((1.0 / std::sqrt(e)) * w);
  }
  ComponentSet set;
  for (std::size_t k = 0; k < speakers; ++k) {
    set.clean_sources.push_back(std::move(built[2 * k]));
    set.noises.push_back(std::move(built[2 * k + 1]));
  }
  return set;
}

// Independent unit-variance Gaussian signal.
inline Waveform random_waveform(Rng& rng, std::size_t length, int sample_rate = kDefaultSampleRate) {
  std::vector<double> s(length);
  for (double& v : s) v = rng.normal();
  return Waveform(std::move(s), sample_rate);
}

}  // namespace esser
