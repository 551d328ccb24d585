// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "esser/fft.hpp"
#include "esser/rng.hpp"
#include "esser/sigcore.hpp"
#include "support.hpp"

namespace esser {
namespace {

using testing::wave;

TEST(Dot, SmallVectors) {
  EXPECT_EQ(dot(wave({1, 0}), wave({0, 1})), 0.0);
  EXPECT_EQ(dot(wave({1, 2}), wave({3, 4})), 11.0);
  EXPECT_EQ(dot(wave({2, 2}), wave({2, 2})), 8.0);
}

TEST(Dot, LengthMismatchThrows) { EXPECT_THROW(dot(wave({1, 2}), wave({1, 2, 3})), DimensionError); }

TEST(Dot, SampleRateMismatchThrows) {
  Waveform a = wave({1, 2});
  Waveform b = wave({1, 2});
  b.sample_rate = 8000;
  EXPECT_THROW(dot(a, b), DimensionError);
}

TEST(Dot, SymmetricAndBilinear) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Waveform a = testing::gaussian(gen, 37);
    const Waveform b = testing::gaussian(gen, 37);
    const Waveform c = testing::gaussian(gen, 37);
    const double alpha = std::normal_distribution<double>{}(gen);
    EXPECT_EQ(dot(a, b), dot(b, a));
    const double lhs = dot(alpha * a + b, c);
    const double rhs = alpha * dot(a, c) + dot(b, c);
    const double scale = std::abs(alpha) * std::sqrt(energy(a) * energy(c)) + std::sqrt(energy(b) * energy(c));
    EXPECT_LE(std::abs(lhs - rhs), 1e-12 * scale);
  }
}

TEST(Energy, SmallVectors) {
  EXPECT_EQ(energy(wave({0, 0, 0})), 0.0);
  EXPECT_EQ(energy(wave({3, 4})), 25.0);
  EXPECT_EQ(energy(wave({1, 1, 1, 1})), 4.0);
}

TEST(Project, SmallVectors) {
  EXPECT_EQ(project(wave({1, 1}), wave({1, 0})), wave({1, 0}));
  EXPECT_EQ(project(wave({1, 0}), wave({1, 1})), wave({0.5, 0.5}));
  EXPECT_EQ(project(wave({1, 0, 1}), wave({1, 1, 0})), wave({0.5, 0.5, 0}));
}

TEST(Project, ZeroDirectionThrows) { EXPECT_THROW(project(wave({1, 2}), wave({0, 0})), DegenerateError); }

TEST(Project, IdempotentAndResidualOrthogonal) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Waveform a = testing::gaussian(gen, 64);
    const Waveform b = testing::gaussian(gen, 64);
    const Waveform p = project(a, b);
    const Waveform pp = project(p, b);
    EXPECT_LE(testing::max_abs_diff(p, pp), 1e-12 * testing::max_abs(p));
    const double scale = std::sqrt(energy(a) * energy(b));
    EXPECT_LE(std::abs(dot(a - p, b)), 1e-9 * scale);
  }
}

TEST(Project, ExactOnOrthogonalFixtures) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const ComponentSet set = make_orthogonal_fixture(seed, 2, 512);
    const Waveform& a = set.clean_sources[0];
    const Waveform& b = set.noises[0];
    const Waveform& c = set.clean_sources[1];
    EXPECT_LE(testing::max_abs_diff(project(a + b, a), a), 1e-12 * testing::max_abs(a));
    const Waveform expected = (energy(a) / energy(a + b)) * (a + b);
    EXPECT_LE(testing::max_abs_diff(project(a + c, a + b), expected), 1e-12 * testing::max_abs(expected));
  }
}

TEST(DbRatio, Values) {
  EXPECT_DOUBLE_EQ(db_ratio(1, 1, 1e-12), 0.0);
  EXPECT_NEAR(db_ratio(2, 1, 1e-12), 3.0103, 1e-4);
  EXPECT_NEAR(db_ratio(1, 0, 1e-12), 120.0, 1e-9);
}

TEST(DbRatio, RejectsBadInputs) {
  EXPECT_THROW(db_ratio(-1, 1, 1e-12), DomainError);
  EXPECT_THROW(db_ratio(1, -1, 1e-12), DomainError);
  EXPECT_THROW(db_ratio(1, 1, 0), DomainError);
}

TEST(DbRatio, DecreasingInDenominator) {
  double last = db_ratio(1, 1e-3, 1e-12);
  for (double d = 2e-3; d < 100; d *= 1.7) {
    const double v = db_ratio(1, d, 1e-12);
    EXPECT_LT(v, last);
    last = v;
  }
}

TEST(NormalizedCorrelation, Values) {
  EXPECT_EQ(normalized_correlation(wave({1, 0}), wave({0, 1})), 0.0);
  EXPECT_DOUBLE_EQ(normalized_correlation(wave({1, 1}), wave({1, 1})), 1.0);
  EXPECT_DOUBLE_EQ(normalized_correlation(wave({1, 1}), wave({-2, -2})), 1.0);
  EXPECT_THROW(normalized_correlation(wave({0, 0}), wave({1, 1})), DegenerateError);
}

TEST(NormalizedCorrelation, IndependentSignalsBelowBound) {
  const std::size_t t = 16000;
  Rng rng(2024);
  double total = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    const Waveform a = random_waveform(rng, t);
    const Waveform b = random_waveform(rng, t);
    total += normalized_correlation(a, b);
  }
  EXPECT_LT(total / 100.0, 3.0 / std::sqrt(static_cast<double>(t)));
}

TEST(Fixture, TinyIsOrthonormal) {
  const ComponentSet set = make_orthogonal_fixture(1, 2, 8);
  const auto members = set.members();
  ASSERT_EQ(members.size(), 4u);
  for (std::size_t i = 0; i < members.size(); ++i) {
    EXPECT_NEAR(energy(members[i]), 1.0, 1e-12);
    for (std::size_t j = i + 1; j < members.size(); ++j) EXPECT_NEAR(dot(members[i], members[j]), 0.0, 1e-12);
  }
}

TEST(Fixture, Deterministic) {
  const ComponentSet a = make_orthogonal_fixture(1, 3, 100);
  const ComponentSet b = make_orthogonal_fixture(1, 3, 100);
  EXPECT_EQ(a.clean_sources, b.clean_sources);
  EXPECT_EQ(a.noises, b.noises);
  const ComponentSet c = make_orthogonal_fixture(2, 3, 100);
  EXPECT_NE(a.clean_sources, c.clean_sources);
}

TEST(Fixture, LongSignalsOrthogonal) {
  const ComponentSet set = make_orthogonal_fixture(2, 2, 16000);
  const auto members = set.members();
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (std::size_t j = i + 1; j < members.size(); ++j) EXPECT_LT(std::abs(dot(members[i], members[j])), 1e-9);
  }
}

TEST(Fixture, OddLengthsAndInfeasibleSizes) {
  const ComponentSet set = make_orthogonal_fixture(4, 2, 9);
  const auto members = set.members();
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (std::size_t j = i + 1; j < members.size(); ++j) EXPECT_NEAR(dot(members[i], members[j]), 0.0, 1e-12);
  }
  EXPECT_THROW(make_orthogonal_fixture(1, 3, 5), DimensionError);
  EXPECT_THROW(make_orthogonal_fixture(1, 0, 8), DimensionError);
}

TEST(ComponentSet, MixtureIsOrderedSum) {
  const ComponentSet set = make_orthogonal_fixture(9, 3, 64);
  Waveform expected = set.noisy_source(0);
  expected = expected + set.noisy_source(1);
  expected = expected + set.noisy_source(2);
  EXPECT_EQ(set.mixture(), expected);
}

TEST(Fft, MatchesDirectDft) {
  std::mt19937_64 gen(3);
  const Waveform x = testing::gaussian(gen, 32);
  const auto half = fft::rfft(x.samples);
  ASSERT_EQ(half.size(), 17u);
  for (std::size_t k = 0; k < half.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < 32; ++n) {
      acc += x[n] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * n) / 32.0);
    }
    EXPECT_NEAR(std::abs(acc - half[k]), 0.0, 1e-12);
  }
  const auto back = fft::irfft(half, 32);
  for (std::size_t n = 0; n < 32; ++n) EXPECT_NEAR(back[n], x[n], 1e-12);
}

TEST(Fft, SynthesisPathsAgree) {
  std::vector<fft::Partial> parts;
  Rng rng(8);
  for (std::size_t bin = 1; bin < 100; ++bin) parts.push_back({bin, rng.normal(), rng.normal()});
  const auto fast = fft::synthesize(parts, 256);
  for (std::size_t n = 0; n < 256; ++n) {
    double direct = 0.0;
    for (const auto& p : parts) {
      const double arg = 2.0 * std::numbers::pi * static_cast<double>(p.bin * n) / 256.0;
      direct += p.cos_weight * std::cos(arg) + p.sin_weight * std::sin(arg);
    }
    EXPECT_NEAR(fast[n], direct, 1e-10);
  }
}

TEST(Rng, ReproducibleStream) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.uniform(), b.uniform());
    EXPECT_EQ(a.normal(), b.normal());
    EXPECT_EQ(a.below(17), b.below(17));
  }
}

TEST(Rng, DrawsInRange) {
  Rng r(1);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(r.below(5), 5u);
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Waveform, ValidateRejectsEmptyAndNonFinite) {
  EXPECT_THROW(validate(Waveform{}), DimensionError);
  EXPECT_THROW(validate(wave({1.0, std::nan("")})), DomainError);
  EXPECT_NO_THROW(validate(wave({1.0, 2.0})));
}

}  // namespace
}  // namespace esser
