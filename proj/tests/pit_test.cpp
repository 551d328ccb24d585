// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "esser/loss.hpp"
#include "esser/pit.hpp"
#include "support.hpp"

namespace esser {
namespace {

LossConfig family(LossFamily f, double lambda = 0.0) {
  LossConfig c;
  c.family = f;
  c.lambda = lambda;
  return c;
}

std::vector<Waveform> gaussians(std::mt19937_64& gen, std::size_t k, std::size_t n) {
  std::vector<Waveform> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(testing::gaussian(gen, n));
  return out;
}

// Reference value computed straight from the loss functions.
double direct(const Waveform& ref, const Waveform& est, const Waveform& noise, const LossConfig& cfg) {
  switch (cfg.family) {
    case LossFamily::SdrNoisy: return sdr_noisy(ref, est);
    case LossFamily::SiSdr: return si_sdr(ref, est);
    case LossFamily::Esser: return esser(est, noise, ref, cfg).value;
  }
  return 0.0;
}

TEST(Pit, SingleSpeakerIsIdentity) {
  std::mt19937_64 gen(1);
  const auto refs = gaussians(gen, 1, 32);
  const auto ests = gaussians(gen, 1, 32);
  const PitResult r = pit_apply(refs, ests, std::nullopt, family(LossFamily::SiSdr));
  EXPECT_EQ(r.best_permutation, std::vector<std::size_t>{0});
  EXPECT_DOUBLE_EQ(r.mean_value, si_sdr(refs[0], ests[0]));
}

TEST(Pit, SwappedPerfectEstimates) {
  std::mt19937_64 gen(2);
  const auto refs = gaussians(gen, 2, 32);
  const std::vector<Waveform> ests{refs[1], refs[0]};
  const PitResult r = pit_apply(refs, ests, std::nullopt, family(LossFamily::SiSdr));
  EXPECT_EQ(r.best_permutation, (std::vector<std::size_t>{1, 0}));
  EXPECT_NEAR(r.mean_value, 120.0, 1e-9);
}

TEST(Pit, MatchesExhaustiveEnumeration) {
  std::mt19937_64 gen(3);
  for (std::size_t k : {2u, 3u, 4u}) {
    for (LossFamily f : {LossFamily::SiSdr, LossFamily::SdrNoisy, LossFamily::Esser}) {
      for (int trial = 0; trial < 25; ++trial) {
        const LossConfig cfg = family(f, 0.3);
        const auto refs = gaussians(gen, k, 24);
        auto ests = gaussians(gen, k, 24);
        for (std::size_t i = 0; i < k; ++i) ests[i] = ests[i] + 1.5 * refs[(i + trial) % k];
        const Waveform noise = testing::gaussian(gen, 24);
        const auto all = testing::enumerate_assignments(
            k, [&](std::size_t i, std::size_t j) { return direct(refs[j], ests[i], noise, cfg); });
        const auto best = std::max_element(all.begin(), all.end(),
                                           [](const auto& a, const auto& b) { return a.mean < b.mean; });
        const PitResult r =
            pit_apply(refs, ests, f == LossFamily::Esser ? std::optional<Waveform>(noise) : std::nullopt, cfg);
        EXPECT_EQ(r.best_permutation, best->perm);
        EXPECT_NEAR(r.mean_value, best->mean, 1e-12);
        for (const auto& a : all) EXPECT_GE(r.mean_value, a.mean - 1e-12);
        double total = 0.0;
        for (double v : r.per_source_values) total += v;
        EXPECT_NEAR(r.mean_value, total / static_cast<double>(k), 1e-12);
      }
    }
  }
}

TEST(Pit, RelabelingInvariance) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto refs = gaussians(gen, 3, 32);
    const auto ests = gaussians(gen, 3, 32);
    const PitResult base = pit_apply(refs, ests, std::nullopt, family(LossFamily::SiSdr));
    std::vector<std::size_t> p{0, 1, 2};
    do {
      std::vector<Waveform> shuffled;
      for (std::size_t i : p) shuffled.push_back(ests[i]);
      const PitResult r = pit_apply(refs, shuffled, std::nullopt, family(LossFamily::SiSdr));
      EXPECT_EQ(r.mean_value, base.mean_value);
      for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.best_permutation[i], base.best_permutation[p[i]]);
    } while (std::next_permutation(p.begin(), p.end()));
  }
}

TEST(Pit, TiesGoToFirstPermutation) {
  const Waveform a = testing::wave({1, 1, 0, 0});
  const std::vector<Waveform> refs{a, a};
  const std::vector<Waveform> ests{testing::wave({1, 0.5, 0, 0}), testing::wave({0.5, 1, 0, 0})};
  const PitResult r = pit_apply(refs, ests, std::nullopt, family(LossFamily::SiSdr));
  EXPECT_EQ(r.best_permutation, (std::vector<std::size_t>{0, 1}));
}

TEST(Pit, InputErrors) {
  std::mt19937_64 gen(5);
  const auto five = gaussians(gen, 5, 8);
  EXPECT_THROW(pit_apply(five, five, std::nullopt, family(LossFamily::SiSdr)), CapacityError);
  const auto two = gaussians(gen, 2, 8);
  EXPECT_THROW(pit_apply(two, two, std::nullopt, family(LossFamily::Esser)), ConfigError);
  const auto three = gaussians(gen, 3, 8);
  EXPECT_THROW(pit_apply(two, three, std::nullopt, family(LossFamily::SiSdr)), ArgumentError);
  const auto shorter = gaussians(gen, 2, 7);
  EXPECT_THROW(pit_apply(two, shorter, std::nullopt, family(LossFamily::SiSdr)), DimensionError);
}

TEST(PitGrad, MatchesFiniteDifferencesOfMean) {
  std::mt19937_64 gen(6);
  for (LossFamily f : {LossFamily::SiSdr, LossFamily::Esser}) {
    for (int trial = 0; trial < 10; ++trial) {
      const LossConfig cfg = family(f, 0.3);
      const auto refs = gaussians(gen, 2, 32);
      std::vector<Waveform> ests{refs[1] + 0.5 * testing::gaussian(gen, 32),
                                 refs[0] + 0.5 * testing::gaussian(gen, 32)};
      const std::optional<Waveform> noise =
          f == LossFamily::Esser ? std::optional<Waveform>(testing::gaussian(gen, 32)) : std::nullopt;
      const PitGradient g = pit_grad(refs, ests, noise, cfg);
      for (std::size_t i = 0; i < 2; ++i) {
        const Waveform fd = testing::numeric_gradient(
            [&](const Waveform& x) {
              auto moved = ests;
              moved[i] = x;
              return pit_apply(refs, moved, noise, cfg).mean_value;
            },
            ests[i]);
        EXPECT_LT(testing::relative_error(g.estimates[i], fd), 1e-6);
      }
      if (noise) {
        const Waveform fd = testing::numeric_gradient(
            [&](const Waveform& x) { return pit_apply(refs, ests, x, cfg).mean_value; }, *noise);
        EXPECT_LT(testing::relative_error(*g.noise_estimate, fd), 1e-6);
      }
    }
  }
}

TEST(PitGrad, PermutingEstimatesPermutesGradients) {
  std::mt19937_64 gen(7);
  const auto refs = gaussians(gen, 3, 32);
  const auto ests = gaussians(gen, 3, 32);
  const Waveform noise = testing::gaussian(gen, 32);
  const LossConfig cfg = family(LossFamily::Esser, 0.5);
  const PitGradient base = pit_grad(refs, ests, noise, cfg);
  const std::vector<std::size_t> p{2, 0, 1};
  std::vector<Waveform> shuffled;
  for (std::size_t i : p) shuffled.push_back(ests[i]);
  const PitGradient moved = pit_grad(refs, shuffled, noise, cfg);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(moved.estimates[i], base.estimates[p[i]]);
  EXPECT_EQ(*moved.noise_estimate, *base.noise_estimate);
}

TEST(PitGrad, TieUsesFirstPermutation) {
  const Waveform a = testing::wave({1, 1, 0, 0});
  const std::vector<Waveform> refs{a, a};
  const std::vector<Waveform> ests{testing::wave({1, 0.5, 0.1, 0}), testing::wave({0.5, 1, 0, 0.1})};
  PitResult used;
  const PitGradient g = pit_grad(refs, ests, std::nullopt, family(LossFamily::SiSdr), &used);
  EXPECT_EQ(used.best_permutation, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(g.estimates[0], 0.5 * si_sdr_grad(refs[0], ests[0]));
  EXPECT_EQ(g.estimates[1], 0.5 * si_sdr_grad(refs[1], ests[1]));
}

}  // namespace
}  // namespace esser
