// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "esser/error.hpp"
#include "esser/loss.hpp"
#include "esser/sigcore.hpp"

namespace esser {

inline constexpr std::size_t kMaxPitSpeakers = 4;

struct PitResult {
  // best_permutation[i] is the reference index assigned to estimate i.
  std::vector<std::size_t> best_permutation;
  // Loss of each estimate against its assigned reference, in estimate order.
  std::vector<double> per_source_values;
  double mean_value = 0.0;
};

struct PitGradient {
  std::vector<Waveform> estimates;
  std::optional<Waveform> noise_estimate;
};

namespace detail {

inline void check_pit_inputs(std::span<const Waveform> references,
                             std::span<const Waveform> estimates,
                             const std::optional<Waveform>& noise_estimate,
                             const LossConfig& cfg) {
  cfg.validate();
  if (references.empty()) throw ArgumentError("pit: no references");
  if (references.size() != estimates.size()) {
    throw ArgumentError("pit: reference and estimate counts differ");
  }
  if (references.size() > kMaxPitSpeakers) {
    throw CapacityError("pit: at most 4 speakers are enumerated");
  }
  if (cfg.family == LossFamily::Esser && !noise_estimate) {
    throw ConfigError("pit: ESSER requires a noise estimate");
  }
  for (std::size_t k = 0; k < references.size(); ++k) {
    require_compatible(references[0], references[k], "pit");
    require_compatible(references[0], estimates[k], "pit");
  }
  if (noise_estimate) require_compatible(references[0], *noise_estimate, "pit");
}

// Loss of one (reference, estimate) pairing under the configured family.
inline double pair_value(const Waveform& reference, const Waveform& estimate,
                         const std::optional<Waveform>& noise_estimate, const LossConfig& cfg) {
  switch (cfg.family) {
    case LossFamily::SdrNoisy: return sdr_noisy(reference, estimate, cfg.epsilon);
    case LossFamily::SiSdr: return si_sdr(reference, estimate, cfg.epsilon);
    case LossFamily::Esser: return esser(estimate, *noise_estimate, reference, cfg).value;
  }
  return 0.0;
}

// Best assignment for a score table with table[i][j] = score of estimate i
// against reference j. Permutations are visited in lexicographic order and
// only a strictly larger mean replaces the incumbent, so ties resolve to the
// lexicographically first permutation.
inline PitResult best_assignment(const std::vector<std::vector<double>>& table) {
  const std::size_t k = table.size();
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  PitResult best;
  bool have = false;
  std::vector<std::size_t> owner(k);
  do {
    // Summed in reference order so relabeling the estimates cannot change
    // the rounding.
    for (std::size_t i = 0; i < k; ++i) owner[perm[i]] = i;
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += table[owner[j]][j];
    const double mean = total / static_cast<double>(k);
    if (!have || mean > best.mean_value) {
      have = true;
      best.best_permutation = perm;
      best.mean_value = mean;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.per_source_values.resize(k);
  for (std::size_t i = 0; i < k; ++i) best.per_source_values[i] = table[i][best.best_permutation[i]];
  return best;
}

}  // namespace detail

// Evaluates every assignment of estimates to references and keeps the one
// with the largest mean loss; ties go to the lexicographically first
// permutation. The noise estimate is shared by every ESSER term and never
// permuted.
inline PitResult pit_apply(std::span<const Waveform> references, std::span<const Waveform> estimates,
                           const std::optional<Waveform>& noise_estimate, const LossConfig& cfg) {
  detail::check_pit_inputs(references, estimates, noise_estimate, cfg);
  const std::size_t k = references.size();

  // Pairwise table: value[i][j] = loss of estimate i against reference j.
  std::vector<std::vector<double>> table(k, std::vector<double>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      table[i][j] = detail::pair_value(references[j], estimates[i], noise_estimate, cfg);
    }
  }

  return detail::best_assignment(table);
}

// Gradient of pit_apply's mean_value, holding the best permutation fixed.
inline PitGradient pit_grad(std::span<const Waveform> references, std::span<const Waveform> estimates,
                            const std::optional<Waveform>& noise_estimate, const LossConfig& cfg,
                            PitResult* result = nullptr) {
  PitResult best = pit_apply(references, estimates, noise_estimate, cfg);
  const std::size_t k = references.size();
  const double w = 1.0 / static_cast<double>(k);

  PitGradient g;
  g.estimates.resize(k);
  if (noise_estimate) g.noise_estimate = Waveform::zeros(noise_estimate->size(), noise_estimate->sample_rate);
  std::vector<std::size_t> owner(k);
  for (std::size_t i = 0; i < k; ++i) owner[best.best_permutation[i]] = i;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t i = owner[j];
    const Waveform& ref = references[j];
    switch (cfg.family) {
      case LossFamily::SdrNoisy:
        g.estimates[i] = w * sdr_noisy_grad(ref, estimates[i], cfg.epsilon);
        break;
      case LossFamily::SiSdr:
        g.estimates[i] = w * si_sdr_grad(ref, estimates[i], cfg.epsilon);
        break;
      case LossFamily::Esser: {
        const EsserGradient eg = esser_grad(estimates[i], *noise_estimate, ref, cfg);
        g.estimates[i] = w * eg.s_hat;
        *g.noise_estimate = *g.noise_estimate + w * eg.n_hat;
        break;
      }
    }
  }
  if (result) *result = std::move(best);
  return g;
}

}  // namespace esser
