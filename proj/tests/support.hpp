// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "esser/sigcore.hpp"

namespace esser::testing {

inline Waveform wave(std::initializer_list<double> v) { return Waveform(std::vector<double>(v)); }

inline double max_abs_diff(const Waveform& a, const Waveform& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(const Waveform& a) {
  double m = 0.0;
  for (double v : a.samples) m = std::max(m, std::abs(v));
  return m;
}

// Central differences, one coordinate at a time.
inline Waveform numeric_gradient(const std::function<double(const Waveform&)>& f, Waveform x, double h = 1e-6) {
  Waveform g = Waveform::zeros(x.size(), x.sample_rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x.samples[i];
    x.samples[i] = keep + h;
    const double up = f(x);
    x.samples[i] = keep - h;
    const double down = f(x);
    x.samples[i] = keep;
    g.samples[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max |analytic - numeric| / max |numeric|.
inline double relative_error(const Waveform& analytic, const Waveform& numeric) {
  const double scale = max_abs(numeric);
  const double diff = max_abs_diff(analytic, numeric);
  return scale > 0.0 ? diff / scale : diff;
}

// Independent Gaussian test vectors from the standard library generator, so
// the oracles do not share the library's own sampling code.
inline Waveform gaussian(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(gen);
  return Waveform(std::move(v));
}

// Every permutation of 0..k-1 with its mean score, scored by `pair(i, j)` =
// value of estimate i against reference j.
struct Assignment {
  std::vector<std::size_t> perm;
  double mean = 0.0;
};

inline std::vector<Assignment> enumerate_assignments(std::size_t k,
                                                     const std::function<double(std::size_t, std::size_t)>& pair) {
  std::vector<std::size_t> p(k);
  std::iota(p.begin(), p.end(), 0);
  std::vector<Assignment> out;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) total += pair(i, p[i]);
    out.push_back({p, total / static_cast<double>(k)});
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("esser-test-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace esser::testing
