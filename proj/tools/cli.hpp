// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "esser/esser.hpp"
#include "json.hpp"

namespace esser::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// Bad flag values found after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Globals {
  std::uint64_t seed = 0;
  bool quiet = false;
  std::string out;
};

struct MixArgs {
  std::string manifest;
  std::string snr;
  std::string oracle = "noisy";
  std::string format = "float32";
  int sample_rate = kDefaultSampleRate;
};

struct EvalArgs {
  std::string dataset;
  std::string estimates;
};

struct TuneArgs {
  std::string dataset;
  std::string snr = "0";
  double threshold = kDefaultDropThreshold;
  double step = kDefaultLambdaStep;
  double max_lambda = kDefaultMaxLambda;
  std::string drop_reference = "previous";
  std::size_t steps = kDefaultToySteps;
  double step_size = kDefaultToyStepSize;
  std::size_t length = kDefaultToyLength;
};

struct ToyrunArgs {
  std::string scenario = "inseparable";
  std::string snr = "0";
  std::string loss = "esser";
  std::string oracle = "noisy";
  double lambda = 0.0;
  std::size_t steps = kDefaultToySteps;
  double step_size = kDefaultToyStepSize;
  std::size_t length = kDefaultToyLength;
};

struct GradcheckArgs {
  std::string loss = "esser";
  double lambda = 0.3;
  std::size_t trials = 100;
  std::size_t length = 64;
};

struct OrthostatArgs {
  std::string corpus;
};

inline SnrSpec parse_snr_flag(const std::string& s) {
  try {
    return SnrSpec::parse(s);
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
}

inline void emit(std::ostream& out, const json& j) { out << j.dump() << '\n'; }

// --- mix --------------------------------------------------------------------

inline int cmd_mix(const Globals& g, const MixArgs& a, std::ostream& out, std::ostream& err) {
  if (g.out.empty()) throw UsageError("mix: --out DIR is required");
  DatasetConfig cfg;
  cfg.snr = parse_snr_flag(a.snr);
  cfg.oracle_mode = parse_oracle_mode(a.oracle);
  cfg.sample_rate = a.sample_rate;
  const SampleFormat fmt = a.format == "pcm16" ? SampleFormat::Pcm16 : SampleFormat::Float32;
  const DatasetSummary s = build_dataset(a.manifest, cfg, g.out, fmt);
  if (!s.ok()) {
    for (const TrialError& e : s.errors) emit(err, {{"trial_id", e.trial_id}, {"error", e.message}});
    emit(err, {{"command", "mix"}, {"status", "failed"}, {"failed_trials", s.errors.size()}});
    return kExitDomain;
  }
  emit(out, {{"command", "mix"},
             {"status", "ok"},
             {"trials_written", s.trials_written},
             {"snr_db", to_json_value(cfg.snr)},
             {"oracle_mode", to_string(cfg.oracle_mode)},
             {"out", g.out},
             {"seed", g.seed}});
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

// Estimates live at ESTIMATES/<trial_id>/estimate_<k>.wav, with an optional
// noise_estimate.wav next to them.
inline int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out, std::ostream&) {
  if (g.out.empty()) throw UsageError("eval: --out report.csv|report.jsonl is required");
  const ReportFormat format = [&] {
    try {
      return report_format_for(g.out);
    } catch (const ArgumentError& e) {
      throw UsageError(e.what());
    }
  }();
  const std::vector<Trial> trials = load_dataset(a.dataset, true);
  std::vector<EvalRow> rows;
  for (const Trial& t : trials) {
    const fs::path dir = fs::path(a.estimates) / t.trial_id;
    std::vector<Waveform> ests;
    for (std::size_t k = 0; k < t.speakers(); ++k) {
      ests.push_back(read_wav(dir / ("estimate_" + std::to_string(k) + ".wav")));
    }
    std::optional<Waveform> noise;
    if (fs::exists(dir / "noise_estimate.wav")) noise = read_wav(dir / "noise_estimate.wav");
    rows.push_back(evaluate_trial(t, ests, noise));
  }
  const EvalReport report = make_report(std::move(rows), {{"dataset", a.dataset}, {"estimates", a.estimates}});
  write_report(report, g.out, format);
  const MetricSummary& m = report.aggregates.at("si_sdr_db");
  emit(out, {{"command", "eval"},
             {"status", "ok"},
             {"trials", report.per_trial.size()},
             {"si_sdr_db_mean", m.mean},
             {"si_sdr_db_median", m.median},
             {"out", g.out}});
  return kExitOk;
}

// --- tune -------------------------------------------------------------------

inline int cmd_tune(const Globals& g, const TuneArgs& a, std::ostream& out, std::ostream&) {
  ParadigmOptions opt;
  opt.steps = a.steps;
  opt.step_size = a.step_size;
  opt.length = a.length;
  opt.sweep.threshold = a.threshold;
  opt.sweep.step = a.step;
  opt.sweep.max_lambda = a.max_lambda;
  opt.sweep.reference = a.drop_reference == "initial" ? DropReference::Initial : DropReference::Previous;
  if (!(a.step > 0.0) || !(a.max_lambda >= 0.0) || a.max_lambda > kMaxLambda) {
    throw UsageError("tune: need --step > 0 and 0 <= --max-lambda <= 2");
  }

  std::vector<Trial> validation;
  std::string source;
  if (!a.dataset.empty()) {
    validation = load_dataset(a.dataset, true);
    if (validation.empty()) throw FormatError("tune: dataset has no trials");
    source = a.dataset;
  } else {
    opt.validation_seed = g.seed;
    validation.push_back(synth_scenario(g.seed, a.length, parse_snr_flag(a.snr), Separability::InseparableNoise,
                                        OracleMode::Noisy));
    source = "synthetic";
  }
  auto proxy = [&](double lambda) {
    double total = 0.0;
    for (const Trial& t : validation) total += esser_validation_proxy(t, lambda, opt, g.seed);
    return total / static_cast<double>(validation.size());
  };
  SweepRecord rec;
  try {
    rec = run_sweep(proxy, opt.sweep);
  } catch (const SweepAborted& e) {
    json j = to_json(e.partial());
    j["command"] = "tune";
    j["status"] = "aborted";
    j["error"] = e.what();
    emit(out, j);
    return kExitDomain;
  }
  json j = to_json(rec);
  if (!g.out.empty()) {
    std::ofstream f(g.out);
    if (!f) throw IoError("cannot write " + g.out);
    f << j.dump() << '\n';
  }
  j["command"] = "tune";
  j["status"] = "ok";
  j["validation"] = source;
  emit(out, j);
  return kExitOk;
}

// --- toyrun -----------------------------------------------------------------

inline int cmd_toyrun(const Globals& g, const ToyrunArgs& a, std::ostream& out, std::ostream&) {
  const Separability sep = parse_separability(a.scenario);
  const OracleMode mode = parse_oracle_mode(a.oracle);
  const SnrSpec snr = parse_snr_flag(a.snr);
  if (a.length < 2048) throw UsageError("toyrun: --length must be at least 2048");
  const Trial trial = synth_scenario(g.seed, a.length, snr, sep, mode);

  ToyRunConfig cfg;
  cfg.loss.family = parse_loss_family(a.loss);
  cfg.loss.lambda = a.lambda;
  cfg.steps = a.steps;
  cfg.step_size = a.step_size;
  cfg.seed = g.seed;
  cfg.snr = trial.snr;
  cfg.oracle_mode = mode;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  const ToyRunResult r = optimize(trial, cfg);
  const SeparationScore score = eval_separation(trial, r.estimates);
  const std::optional<double> noise_sdri = eval_noise_estimate(trial, r.noise_estimate);
  std::size_t increases = 0;
  for (std::size_t i = 1; i < r.loss_trace.size(); ++i) increases += r.loss_trace[i] > r.loss_trace[i - 1];

  json config = {{"scenario", to_string(sep)},  {"snr_db", to_json_value(trial.snr)},
                 {"loss", to_string(cfg.loss.family)}, {"lambda", cfg.loss.lambda},
                 {"steps", cfg.steps},          {"step_size", cfg.step_size},
                 {"oracle_mode", to_string(mode)}, {"length", a.length},
                 {"seed", g.seed}};
  json result = {{"final_loss", r.loss_trace.back()},
                 {"clean_ref_si_sdr_db", score.si_sdr_db},
                 {"clean_ref_si_sdr_db_mean", score.mean_db},
                 {"permutation", score.permutation},
                 {"capped", score.capped},
                 {"trace_increases", increases}};
  result["noise_si_sdri_db"] = noise_sdri ? json(*noise_sdri) : json(nullptr);
  if (!g.out.empty()) {
    std::ofstream f(g.out);
    if (!f) throw IoError("cannot write " + g.out);
    f << json{{"record", "config"}, {"config", config}}.dump() << '\n';
    for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
      f << json{{"record", "step"}, {"step", i}, {"loss", r.loss_trace[i]}}.dump() << '\n';
    }
    f << json{{"record", "result"}, {"result", result}}.dump() << '\n';
  }
  json summary = result;
  summary["command"] = "toyrun";
  summary["status"] = "ok";
  summary["config"] = config;
  emit(out, summary);
  return kExitOk;
}

// --- gradcheck --------------------------------------------------------------

namespace detail {

// max |g - fd| / max |fd| with central differences of step h.
template <class F>
double fd_relative_error(F&& f, Waveform x, const Waveform& analytic, double h = 1e-6) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x.samples[i];
    x.samples[i] = keep + h;
    const double up = f(x);
    x.samples[i] = keep - h;
    const double down = f(x);
    x.samples[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    num = std::max(num, std::abs(analytic.samples[i] - fd));
    den = std::max(den, std::abs(fd));
  }
  return den > 0.0 ? num / den : num;
}

}  // namespace detail

inline int cmd_gradcheck(const Globals& g, const GradcheckArgs& a, std::ostream& out, std::ostream&) {
  LossConfig cfg;
  cfg.family = parse_loss_family(a.loss);
  cfg.lambda = a.lambda;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (a.trials == 0 || a.length < 2) throw UsageError("gradcheck: need --trials >= 1 and --length >= 2");

  Rng rng(g.seed);
  double worst = 0.0;
  std::size_t skipped = 0;
  for (std::size_t t = 0; t < a.trials; ++t) {
    const Waveform s_hat = random_waveform(rng, a.length);
    const Waveform n_hat = random_waveform(rng, a.length);
    const Waveform target = random_waveform(rng, a.length);
    try {
      switch (cfg.family) {
        case LossFamily::SdrNoisy: {
          const Waveform grad = sdr_noisy_grad(target, s_hat, cfg.epsilon);
          worst = std::max(worst, detail::fd_relative_error(
                                      [&](const Waveform& x) { return sdr_noisy(target, x, cfg.epsilon); }, s_hat, grad));
          break;
        }
        case LossFamily::SiSdr: {
          const Waveform grad = si_sdr_grad(target, s_hat, cfg.epsilon);
          worst = std::max(worst, detail::fd_relative_error(
                                      [&](const Waveform& x) { return si_sdr(target, x, cfg.epsilon); }, s_hat, grad));
          break;
        }
        case LossFamily::Esser: {
          const EsserGradient grad = esser_grad(s_hat, n_hat, target, cfg);
          worst = std::max(worst, detail::fd_relative_error(
                                      [&](const Waveform& x) { return esser(x, n_hat, target, cfg).value; }, s_hat,
                                      grad.s_hat));
          worst = std::max(worst, detail::fd_relative_error(
                                      [&](const Waveform& x) { return esser(s_hat, x, target, cfg).value; }, n_hat,
                                      grad.n_hat));
          break;
        }
      }
    } catch (const GradientUndefined&) {
      ++skipped;
    }
  }
  const bool pass = worst < 1e-6 && skipped < a.trials;
  emit(out, {{"command", "gradcheck"},
             {"status", pass ? "ok" : "failed"},
             {"loss", to_string(cfg.family)},
             {"lambda", cfg.lambda},
             {"trials", a.trials},
             {"skipped", skipped},
             {"max_rel_error", worst},
             {"seed", g.seed}});
  return pass ? kExitOk : kExitDomain;
}

// --- orthostat --------------------------------------------------------------

inline int cmd_orthostat(const Globals& g, const OrthostatArgs& a, std::ostream& out, std::ostream&) {
  if (!fs::is_directory(a.corpus)) throw IoError("orthostat: not a directory: " + a.corpus);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.corpus)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.size() < 2) throw FormatError("orthostat: need at least two .wav files");
  std::vector<Waveform> signals;
  for (const auto& f : files) signals.push_back(read_wav(f));

  std::vector<double> values;
  std::size_t shortest = signals.front().size();
  for (std::size_t i = 0; i < signals.size(); ++i) {
    for (std::size_t j = i + 1; j < signals.size(); ++j) {
      const std::vector<Waveform> pair = min_truncate(std::vector<Waveform>{signals[i], signals[j]});
      const double c = normalized_correlation(pair[0], pair[1]);
      shortest = std::min(shortest, pair[0].size());
      values.push_back(c);
      if (!g.quiet) {
        emit(out, {{"a", files[i].filename().string()},
                   {"b", files[j].filename().string()},
                   {"length", pair[0].size()},
                   {"normalized_correlation", c}});
      }
    }
  }
  const MetricSummary m = summarize(values);
  emit(out, {{"command", "orthostat"},
             {"status", "ok"},
             {"files", files.size()},
             {"pairs", m.count},
             {"mean", m.mean},
             {"median", m.median},
             {"max", *std::max_element(values.begin(), values.end())},
             {"bound_3_over_sqrt_t", 3.0 / std::sqrt(static_cast<double>(shortest))}});
  return kExitOk;
}

// --- entry point ------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Noisy-source separation losses, datasets and toy experiments", "esser"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file whose keys mirror the flags (flags win)");

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random draw");
  app.add_flag("--quiet", g.quiet, "Print only the summary line");
  app.add_option("--out", g.out, "Output path (file or directory, per command)");

  MixArgs mix;
  auto* c_mix = app.add_subcommand("mix", "Build a mixture dataset from a source manifest");
  c_mix->add_option("--manifest", mix.manifest, "JSON-lines source manifest")->required()->check(CLI::ExistingFile);
  c_mix->add_option("--snr", mix.snr, "Per-source SNR in dB, clean or pure-noise")->required();
  c_mix->add_option("--oracle", mix.oracle, "Training target kind")->check(CLI::IsMember({"clean", "noisy"}));
  c_mix->add_option("--format", mix.format, "Output sample format")->check(CLI::IsMember({"float32", "pcm16"}));
  c_mix->add_option("--sample-rate", mix.sample_rate, "Required input sample rate")->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score estimates against a dataset's clean references");
  c_eval->add_option("--dataset", ev.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--estimates", ev.estimates, "Estimates directory")->required()->check(CLI::ExistingDirectory);

  TuneArgs tune;
  auto* c_tune = app.add_subcommand("tune", "Sweep lambda on a validation set");
  c_tune->add_option("--dataset", tune.dataset, "Validation dataset (default: synthetic scenario)")
      ->check(CLI::ExistingDirectory);
  c_tune->add_option("--snr", tune.snr, "SNR of the synthetic validation scenario");
  c_tune->add_option("--threshold", tune.threshold, "Drop that stops the sweep (dB)")->check(CLI::NonNegativeNumber);
  c_tune->add_option("--step", tune.step, "Lambda grid step");
  c_tune->add_option("--max-lambda", tune.max_lambda, "Largest lambda tried");
  c_tune->add_option("--drop-reference", tune.drop_reference, "Score the drop is measured against")
      ->check(CLI::IsMember({"previous", "initial"}));
  c_tune->add_option("--steps", tune.steps, "Descent steps per run")->check(CLI::PositiveNumber);
  c_tune->add_option("--step-size", tune.step_size, "Descent step size")->check(CLI::PositiveNumber);
  c_tune->add_option("--length", tune.length, "Synthetic scenario length")->check(CLI::Range(2048, 1 << 20));

  ToyrunArgs toy;
  auto* c_toy = app.add_subcommand("toyrun", "Optimize a mask separator on a synthetic scenario");
  c_toy->add_option("--scenario", toy.scenario, "Scenario kind")->check(CLI::IsMember({"separable", "inseparable"}));
  c_toy->add_option("--snr", toy.snr, "Per-source SNR in dB, clean or pure-noise");
  c_toy->add_option("--loss", toy.loss, "Training loss")->check(CLI::IsMember({"sisdr", "esser", "sdr"}));
  c_toy->add_option("--lambda", toy.lambda, "ESSER noise discount")->check(CLI::Range(0.0, kMaxLambda));
  c_toy->add_option("--oracle", toy.oracle, "Training target kind")->check(CLI::IsMember({"clean", "noisy"}));
  c_toy->add_option("--steps", toy.steps, "Descent steps")->check(CLI::PositiveNumber);
  c_toy->add_option("--step-size", toy.step_size, "Descent step size")->check(CLI::PositiveNumber);
  c_toy->add_option("--length", toy.length, "Scenario length in samples");

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  c_gc->add_option("--loss", gc.loss, "Loss to check")->check(CLI::IsMember({"sisdr", "esser", "sdr"}));
  c_gc->add_option("--lambda", gc.lambda, "ESSER noise discount")->check(CLI::Range(0.0, kMaxLambda));
  c_gc->add_option("--trials", gc.trials, "Random cases")->check(CLI::PositiveNumber);
  c_gc->add_option("--length", gc.length, "Signal length")->check(CLI::Range(2, 4096));

  OrthostatArgs os;
  auto* c_os = app.add_subcommand("orthostat", "Pairwise normalized correlation over a corpus");
  c_os->add_option("--corpus", os.corpus, "Directory of .wav files")->required();

  if (argc <= 1) {
    err << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (c_mix->parsed()) return cmd_mix(g, mix, out, err);
    if (c_eval->parsed()) return cmd_eval(g, ev, out, err);
    if (c_tune->parsed()) return cmd_tune(g, tune, out, err);
    if (c_toy->parsed()) return cmd_toyrun(g, toy, out, err);
    if (c_gc->parsed()) return cmd_gradcheck(g, gc, out, err);
    if (c_os->parsed()) return cmd_orthostat(g, os, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace esser::cli
