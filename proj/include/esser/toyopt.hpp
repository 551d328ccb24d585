// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esser/error.hpp"
#include "esser/eval.hpp"
#include "esser/fft.hpp"
#include "esser/loss.hpp"
#include "esser/mixer.hpp"
#include "esser/pit.hpp"
#include "esser/rng.hpp"
#include "esser/sigcore.hpp"
#include "esser/stft.hpp"
#include "esser/tuner.hpp"

namespace esser {

// --- synthetic scenarios ----------------------------------------------------

enum class Separability {
  SeparableSpeech,   // two band-disjoint tonal surrogates, no noise
  InseparableNoise,  // the same surrogates plus a noise pair no mask can split
};

inline std::string_view to_string(Separability s) {
  return s == Separability::SeparableSpeech ? "separable" : "inseparable";
}

inline Separability parse_separability(std::string_view s) {
  if (s == "separable") return Separability::SeparableSpeech;
  if (s == "inseparable") return Separability::InseparableNoise;
  throw ArgumentError("unknown scenario: " + std::string(s));
}

struct ScenarioLayout {
  std::size_t tones_per_speaker = 3;
  std::size_t bursts = 4;         // envelope periods over the whole signal
  std::size_t envelope_power = 4;  // envelope is sin^(2p)
  // Bands as fractions of Nyquist. Speaker bands are disjoint with a guard
  // gap wide enough that a 256-point frame sees no shared bins.
  double speaker_bands[2][2] = {{8.0 / 128, 48.0 / 128}, {72.0 / 128, 112.0 / 128}};
  double noise_band[2] = {4.0 / 128, 124.0 / 128};
};

struct ScenarioComponents {
  std::vector<Waveform> speech;  // unit energy each
  std::vector<Waveform> noise;   // unit energy each
};

// Two "speech" surrogates made of sparse tone bursts in disjoint bands, and
// two broadband noises. The second noise is the Hilbert transform of the
// first: identical magnitude spectrum, a quarter-cycle phase offset in every
// bin, so a real-valued time-frequency mask cannot tell them apart. All four
// components live on disjoint sets of whole-signal DFT bins (the two noises
// share bins but use the cosine/sine quadrature of each), so they are
// orthogonal up to rounding.
inline ScenarioComponents synth_components(std::uint64_t seed, std::size_t length, int sample_rate = kDefaultSampleRate,
                                           const ScenarioLayout& layout = {}) {
  const std::size_t nyquist = length / 2;
  const std::size_t sideband = layout.bursts * layout.envelope_power;
  if (length < 2048 || layout.bursts == 0) {
    throw DimensionError("synth_scenario: need at least 2048 samples");
  }
  Rng rng(seed);
  auto to_bin = [&](double fraction) { return static_cast<std::size_t>(std::llround(fraction * nyquist)); };

  std::set<std::size_t> occupied;
  ScenarioComponents out;
  for (std::size_t spk = 0; spk < 2; ++spk) {
    const std::size_t lo = to_bin(layout.speaker_bands[spk][0]) + sideband;
    const std::size_t hi = to_bin(layout.speaker_bands[spk][1]) - sideband;
    if (hi <= lo + layout.tones_per_speaker) throw DimensionError("synth_scenario: speaker band too narrow");
    std::vector<fft::Partial> tones;
    for (std::size_t i = 0; i < layout.tones_per_speaker; ++i) {
      const std::size_t bin = lo + rng.below(hi - lo);
      const double amp = 0.5 + 0.5 * rng.uniform();
      const double phase = 2.0 * std::numbers::pi * rng.uniform();
      tones.push_back({bin, amp * std::cos(phase), -amp * std::sin(phase)});
      for (std::size_t j = 0; j <= 2 * sideband; ++j) occupied.insert(bin + j - sideband);
    }
    std::vector<double> carrier = fft::synthesize(tones, length);
    const double env_phase = std::numbers::pi * rng.uniform();
    for (std::size_t t = 0; t < length; ++t) {
      const double arg = std::numbers::pi * static_cast<double>(layout.bursts * t) / static_cast<double>(length) + env_phase;
      carrier[t] *= std::pow(std::sin(arg), 2.0 * static_cast<double>(layout.envelope_power));
    }
    Waveform w(std::move(carrier), sample_rate);
    out.speech.push_back((1.0 / std::sqrt(energy(w))) * w);
  }

  std::vector<fft::Partial> first, second;
  for (std::size_t bin = to_bin(layout.noise_band[0]); bin < to_bin(layout.noise_band[1]); ++bin) {
    if (occupied.count(bin)) continue;
    const double a = rng.normal();
    const double b = rng.normal();
    first.push_back({bin, a, b});
    second.push_back({bin, -b, a});  // Hilbert transform of the first
  }
  for (const auto* partials : {&first, &second}) {
    Waveform w(fft::synthesize(*partials, length), sample_rate);
    out.noise.push_back((1.0 / std::sqrt(energy(w))) * w);
  }
  return out;
}

// A trial over the synthetic components. SeparableSpeech always builds the
// noise-free condition; InseparableNoise honours `snr` including clean and
// pure-noise.
inline Trial synth_scenario(std::uint64_t seed, std::size_t length, SnrSpec snr, Separability separability,
                            OracleMode mode = OracleMode::Noisy, int sample_rate = kDefaultSampleRate) {
  const ScenarioComponents c = synth_components(seed, length, sample_rate);
  DatasetConfig cfg;
  cfg.snr = separability == Separability::SeparableSpeech ? SnrSpec::clean() : snr;
  cfg.oracle_mode = mode;
  cfg.sample_rate = sample_rate;
  return build_trial(c.speech, c.noise, cfg, "synth-" + std::to_string(seed));
}

// --- mask model -------------------------------------------------------------

// Time-frequency masks over `outputs` signals (K sources, then the noise).
// Each (frame, bin) holds one unconstrained logit per output; a softmax
// across outputs keeps the masks on the simplex, so the outputs always sum
// back to the mixture.
class MaskModel {
 public:
  MaskModel(std::size_t length, std::size_t outputs, std::size_t frame = 256)
      : stft_(frame), length_(length), outputs_(outputs),
        frames_(stft_.frames_for(length)), bins_(stft_.bins()),
        logits_(outputs * frames_ * bins_, 0.0) {
    if (outputs < 2) throw ArgumentError("mask model: need at least two outputs");
  }

  void randomize(Rng& rng, double scale) {
    for (double& v : logits_) v = scale * rng.normal();
  }

  const Stft& stft() const { return stft_; }
  std::size_t outputs() const { return outputs_; }
  std::size_t cells() const { return frames_ * bins_; }
  std::span<double> logits() { return logits_; }
  std::span<const double> logits() const { return logits_; }

  // masks[o * cells + c].
  std::vector<double> masks() const {
    const std::size_t n = cells();
    std::vector<double> m(logits_.size());
    for (std::size_t c = 0; c < n; ++c) {
      double top = logits_[c];
      for (std::size_t o = 1; o < outputs_; ++o) top = std::max(top, logits_[o * n + c]);
      double total = 0.0;
      for (std::size_t o = 0; o < outputs_; ++o) {
        m[o * n + c] = std::exp(logits_[o * n + c] - top);
        total += m[o * n + c];
      }
      for (std::size_t o = 0; o < outputs_; ++o) m[o * n + c] /= total;
    }
    return m;
  }

  std::vector<Waveform> separate(const Spectrogram& mixture_spec, std::span<const double> masks, int sample_rate) const {
    std::vector<Waveform> out;
    const std::size_t n = cells();
    for (std::size_t o = 0; o < outputs_; ++o) {
      Spectrogram s = mixture_spec;
      for (std::size_t c = 0; c < n; ++c) s.data[c] *= masks[o * n + c];
      out.emplace_back(stft_.synthesize(s, length_), sample_rate);
    }
    return out;
  }

  // Pulls per-output signal gradients back to the logits.
  std::vector<double> backward(const Spectrogram& mixture_spec, std::span<const double> masks,
                               std::span<const Waveform> output_grads) const {
    const std::size_t n = cells();
    std::vector<double> mask_grad(logits_.size());
    for (std::size_t o = 0; o < outputs_; ++o) {
      const Spectrogram g = stft_.analyze(output_grads[o].view());
      for (std::size_t f = 0; f < frames_; ++f) {
        for (std::size_t k = 0; k < bins_; ++k) {
          const std::size_t c = f * bins_ + k;
          mask_grad[o * n + c] = stft_.bin_weight(k) * std::real(mixture_spec.data[c] * std::conj(g.data[c]));
        }
      }
    }
    std::vector<double> logit_grad(logits_.size());
    for (std::size_t c = 0; c < n; ++c) {
      double inner = 0.0;
      for (std::size_t o = 0; o < outputs_; ++o) inner += masks[o * n + c] * mask_grad[o * n + c];
      for (std::size_t o = 0; o < outputs_; ++o) {
        logit_grad[o * n + c] = masks[o * n + c] * (mask_grad[o * n + c] - inner);
      }
    }
    return logit_grad;
  }

 private:
  Stft stft_;
  std::size_t length_;
  std::size_t outputs_;
  std::size_t frames_;
  std::size_t bins_;
  std::vector<double> logits_;
};

// --- optimization -------------------------------------------------------------

inline constexpr std::size_t kDefaultToySteps = 1000;
inline constexpr double kDefaultToyStepSize = 32.0;
inline constexpr std::size_t kDefaultToyLength = 4096;

struct ToyRunConfig {
  LossConfig loss;
  std::size_t steps = kDefaultToySteps;
  double step_size = kDefaultToyStepSize;
  std::uint64_t seed = 0;
  SnrSpec snr = SnrSpec::finite(0.0);
  OracleMode oracle_mode = OracleMode::Noisy;
  std::size_t frame = 256;
  double init_scale = 0.01;

  void validate() const {
    loss.validate();
    if (steps < 1) throw ConfigError("toy run: steps must be >= 1");
    if (!(step_size > 0.0)) throw ConfigError("toy run: step_size must be positive");
  }
};

struct ToyRunResult {
  std::vector<Waveform> estimates;  // raw mask outputs, one per speaker
  Waveform noise_estimate;          // raw output of the noise mask
  std::vector<double> loss_trace;   // negated PIT loss before each step, then the final value
};

class ToyDiverged : public Error {
 public:
  ToyDiverged(const std::string& what, std::vector<double> trace) : Error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

namespace detail {

struct ToyObjective {
  double loss = 0.0;                  // negated PIT mean value
  std::vector<Waveform> output_grads;  // d loss / d raw output, per output
};

// Negated PIT loss of the raw mask outputs against the trial's oracles.
// ESSER sees every output mixture-scaled first; SI-SDR is scale invariant
// and scores raw outputs.
inline ToyObjective toy_objective(const Trial& trial, std::span<const Waveform> outputs, const LossConfig& cfg,
                                  bool want_grad) {
  const std::size_t k = trial.speakers();
  const auto refs = trial.speaker_oracles();
  ToyObjective obj;
  if (cfg.family == LossFamily::Esser) {
    std::vector<Waveform> scaled;
    for (const Waveform& o : outputs) scaled.push_back(mixture_scale(trial.mixture, o));
    const std::vector<Waveform> sources(scaled.begin(), scaled.begin() + static_cast<std::ptrdiff_t>(k));
    const std::optional<Waveform> noise = scaled[k];
    if (!want_grad) {
      obj.loss = -pit_apply(refs, sources, noise, cfg).mean_value;
      return obj;
    }
    PitResult best;
    const PitGradient g = pit_grad(refs, sources, noise, cfg, &best);
    obj.loss = -best.mean_value;
    for (std::size_t o = 0; o <= k; ++o) {
      const Waveform& cot = o < k ? g.estimates[o] : *g.noise_estimate;
      obj.output_grads.push_back(-1.0 * mixture_scale_vjp(trial.mixture, outputs[o], cot));
    }
    return obj;
  }
  const std::vector<Waveform> sources(outputs.begin(), outputs.begin() + static_cast<std::ptrdiff_t>(k));
  if (!want_grad) {
    obj.loss = -pit_apply(refs, sources, std::nullopt, cfg).mean_value;
    return obj;
  }
  PitResult best;
  const PitGradient g = pit_grad(refs, sources, std::nullopt, cfg, &best);
  obj.loss = -best.mean_value;
  for (std::size_t o = 0; o < k; ++o) obj.output_grads.push_back(-1.0 * g.estimates[o]);
  for (std::size_t o = k; o < outputs.size(); ++o) {
    obj.output_grads.push_back(Waveform::zeros(trial.mixture.size(), trial.mixture.sample_rate));
  }
  return obj;
}

}  // namespace detail

// Optimizer state exposed for inspection (tests check the mask invariants
// and first-order behaviour step by step).
class ToyOptimizer {
 public:
  ToyOptimizer(const Trial& trial, const ToyRunConfig& cfg)
      : trial_(trial), cfg_(cfg), model_(trial.mixture.size(), trial.speakers() + 1, cfg.frame) {
    cfg_.validate();
    if (cfg_.oracle_mode != trial.oracle_mode) {
      throw ConfigError("toy run: oracle mode differs from the trial's");
    }
    Rng rng(cfg_.seed);
    model_.randomize(rng, cfg_.init_scale);
    spec_ = model_.stft().analyze(trial_.mixture.view());
  }

  const MaskModel& model() const { return model_; }
  std::vector<double> masks() const { return model_.masks(); }
  std::vector<Waveform> outputs() const { return model_.separate(spec_, model_.masks(), trial_.mixture.sample_rate); }

  double loss() const { return detail::toy_objective(trial_, outputs(), cfg_.loss, false).loss; }

  // Loss and logit gradient at the current parameters.
  std::pair<double, std::vector<double>> loss_and_grad() const {
    const auto m = model_.masks();
    const auto outs = model_.separate(spec_, m, trial_.mixture.sample_rate);
    const auto obj = detail::toy_objective(trial_, outs, cfg_.loss, true);
    return {obj.loss, model_.backward(spec_, m, obj.output_grads)};
  }

  // One fixed-size descent step; returns the loss before the step.
  double step() {
    auto [value, grad] = loss_and_grad();
    auto logits = model_.logits();
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] -= cfg_.step_size * grad[i];
    return value;
  }

  ToyRunResult result() const {
    auto outs = outputs();
    ToyRunResult r;
    r.noise_estimate = outs.back();
    outs.pop_back();
    r.estimates = std::move(outs);
    return r;
  }

 private:
  const Trial& trial_;
  ToyRunConfig cfg_;
  MaskModel model_;
  Spectrogram spec_;
};

// Fixed-step gradient descent on the mask logits against the negated,
// permutation-invariant configured loss.
inline ToyRunResult optimize(const Trial& trial, const ToyRunConfig& cfg) {
  ToyOptimizer opt(trial, cfg);
  std::vector<double> trace;
  trace.reserve(cfg.steps + 1);
  for (std::size_t i = 0; i < cfg.steps; ++i) {
    double value;
    try {
      value = opt.step();
    } catch (const GradientUndefined& e) {
      throw ToyDiverged(std::string("toy run stopped at step ") + std::to_string(i) + ": " + e.what(), trace);
    }
    trace.push_back(value);
    if (!std::isfinite(value)) throw ToyDiverged("toy run diverged at step " + std::to_string(i), trace);
  }
  ToyRunResult r = opt.result();
  const double final_loss = opt.loss();
  trace.push_back(final_loss);
  if (!std::isfinite(final_loss)) throw ToyDiverged("toy run diverged at the final step", trace);
  r.loss_trace = std::move(trace);
  return r;
}

// Permutation-invariant SI-SDR improvement of estimates over the mixture,
// against arbitrary references (used where clean references are silent,
// e.g. pure-noise trials scored against their noises).
inline double si_sdr_improvement(std::span<const Waveform> references, std::span<const Waveform> estimates,
                                 const Waveform& mixture) {
  LossConfig cfg;
  cfg.family = LossFamily::SiSdr;
  const PitResult best = pit_apply(references, estimates, std::nullopt, cfg);
  double baseline = 0.0;
  for (const Waveform& r : references) baseline += si_sdr(r, mixture);
  return best.mean_value - baseline / static_cast<double>(references.size());
}

// --- paradigm comparison ------------------------------------------------------

struct ParadigmOptions {
  std::size_t length = kDefaultToyLength;
  std::size_t steps = kDefaultToySteps;
  double step_size = kDefaultToyStepSize;
  // When set, skips the sweep and uses this lambda for the ESSER arm.
  std::optional<double> lambda;
  SweepOptions sweep;
  // Seed of the validation scenario the sweep runs on.
  std::uint64_t validation_seed = 0x5eed;
};

struct ParadigmRecord {
  std::uint64_t seed = 0;
  SnrSpec snr;
  double lambda = 0.0;
  std::optional<SweepRecord> sweep;
  double noisy_oracle_sisdr_db = 0.0;  // floor
  double clean_oracle_sisdr_db = 0.0;  // ceiling
  double esser_db = 0.0;
  std::optional<double> esser_noise_si_sdri_db;
};

// Proxy for lambda tuning: mean noisy-oracle SI-SDR of an ESSER run on the
// validation scenario.
inline double esser_validation_proxy(const Trial& validation, double lambda, const ParadigmOptions& opt,
                                     std::uint64_t seed) {
  ToyRunConfig cfg;
  cfg.loss = {lambda, kDefaultEpsilon, LossFamily::Esser};
  cfg.steps = opt.steps;
  cfg.step_size = opt.step_size;
  cfg.seed = seed;
  cfg.oracle_mode = OracleMode::Noisy;
  cfg.snr = validation.snr;
  const ToyRunResult r = optimize(validation, cfg);
  LossConfig sisdr;
  sisdr.family = LossFamily::SiSdr;
  return pit_apply(validation.speaker_oracles(), r.estimates, std::nullopt, sisdr).mean_value;
}

inline SweepRecord tune_lambda(SnrSpec snr, const ParadigmOptions& opt) {
  const Trial validation = synth_scenario(opt.validation_seed, opt.length, snr, Separability::InseparableNoise,
                                          OracleMode::Noisy);
  return run_sweep(
      [&](double lambda) { return esser_validation_proxy(validation, lambda, opt, opt.validation_seed); },
      opt.sweep);
}

// Trains the three configurations on matched trials (bit-identical mixture)
// and scores each against the clean references.
inline ParadigmRecord paradigm_experiment(std::uint64_t seed, SnrSpec snr, const ParadigmOptions& opt = {}) {
  ParadigmRecord rec;
  rec.seed = seed;
  rec.snr = snr;
  if (opt.lambda) {
    rec.lambda = *opt.lambda;
  } else {
    rec.sweep = tune_lambda(snr, opt);
    rec.lambda = rec.sweep->selected_lambda;
  }
  const Trial noisy = synth_scenario(seed, opt.length, snr, Separability::InseparableNoise, OracleMode::Noisy);
  const Trial clean = synth_scenario(seed, opt.length, snr, Separability::InseparableNoise, OracleMode::Clean);

  auto run = [&](const Trial& t, LossFamily family, double lambda) {
    ToyRunConfig cfg;
    cfg.loss = {lambda, kDefaultEpsilon, family};
    cfg.steps = opt.steps;
    cfg.step_size = opt.step_size;
    cfg.seed = seed;
    cfg.snr = snr;
    cfg.oracle_mode = t.oracle_mode;
    return optimize(t, cfg);
  };
  const ToyRunResult floor_run = run(noisy, LossFamily::SiSdr, 0.0);
  const ToyRunResult ceiling_run = run(clean, LossFamily::SiSdr, 0.0);
  const ToyRunResult esser_run = run(noisy, LossFamily::Esser, rec.lambda);
  rec.noisy_oracle_sisdr_db = eval_separation(noisy, floor_run.estimates).mean_db;
  rec.clean_oracle_sisdr_db = eval_separation(noisy, ceiling_run.estimates).mean_db;
  rec.esser_db = eval_separation(noisy, esser_run.estimates).mean_db;
  rec.esser_noise_si_sdri_db = eval_noise_estimate(noisy, esser_run.noise_estimate);
  return rec;
}

}  // namespace esser
