// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esser/digest.hpp"
#include "esser/error.hpp"
#include "esser/sigcore.hpp"
#include "esser/wav.hpp"
#include "json.hpp"

namespace esser {

// Which ground truth a dataset exposes for training.
//   Clean: s_clean_k for every speaker plus the summed noise.
//   Noisy: s_noisy_k = s_clean_k + n_k for every speaker.
enum class OracleMode { Clean, Noisy };

inline std::string_view to_string(OracleMode m) { return m == OracleMode::Clean ? "clean" : "noisy"; }

inline OracleMode parse_oracle_mode(std::string_view s) {
  if (s == "clean") return OracleMode::Clean;
  if (s == "noisy") return OracleMode::Noisy;
  throw ArgumentError("unknown oracle mode: " + std::string(s));
}

// Per-source SNR of a dataset: a finite dB value, or one of the two
// degenerate conditions (no noise at all, no speech at all).
struct SnrSpec {
  enum class Kind { Finite, Clean, PureNoise };
  Kind kind = Kind::Finite;
  double db = 0.0;

  static SnrSpec finite(double db) { return {Kind::Finite, db}; }
  static SnrSpec clean() { return {Kind::Clean, 0.0}; }
  static SnrSpec pure_noise() { return {Kind::PureNoise, 0.0}; }

  bool is_finite() const { return kind == Kind::Finite; }

  static SnrSpec parse(std::string_view s) {
    if (s == "clean" || s == "inf") return clean();
    if (s == "pure-noise") return pure_noise();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      throw ArgumentError("bad SNR '" + std::string(s) + "' (dB value, clean or pure-noise)");
    }
    return finite(v);
  }

  friend bool operator==(const SnrSpec&, const SnrSpec&) = default;
};

inline nlohmann::json to_json_value(const SnrSpec& s) {
  switch (s.kind) {
    case SnrSpec::Kind::Clean: return "clean";
    case SnrSpec::Kind::PureNoise: return "pure-noise";
    case SnrSpec::Kind::Finite: break;
  }
  return s.db;
}

inline SnrSpec snr_from_json(const nlohmann::json& j) {
  if (j.is_number()) return SnrSpec::finite(j.get<double>());
  if (j.is_string()) return SnrSpec::parse(j.get<std::string>());
  throw FormatError("snr_db must be a number or string");
}

enum class Truncation { Min };

struct DatasetConfig {
  SnrSpec snr;
  OracleMode oracle_mode = OracleMode::Noisy;
  int sample_rate = kDefaultSampleRate;
  Truncation truncation = Truncation::Min;
};

// One training/evaluation unit. clean_refs and noises are kept for
// evaluation only; training sees `oracles`.
struct Trial {
  std::string trial_id;
  Waveform mixture;
  std::vector<Waveform> oracles;
  std::vector<Waveform> clean_refs;
  std::vector<Waveform> noises;
  SnrSpec snr;
  OracleMode oracle_mode = OracleMode::Noisy;

  std::size_t speakers() const { return clean_refs.size(); }

  Waveform summed_noise() const { return sum(noises); }

  Waveform noisy_source(std::size_t k) const { return clean_refs.at(k) + noises.at(k); }

  // The first K oracles, i.e. the per-speaker training targets.
  std::span<const Waveform> speaker_oracles() const {
    return std::span<const Waveform>(oracles).first(speakers());
  }
};

// g * noise with g chosen so that 10 log10(|source|^2 / |g noise|^2) == snr_db.
inline Waveform scale_noise_to_snr(const Waveform& source, const Waveform& noise, double snr_db) {
  require_compatible(source, noise, "scale_noise_to_snr");
  const double es = energy(source);
  const double en = energy(noise);
  if (!(es > 0.0) || !(en > 0.0)) throw DomainError("scale_noise_to_snr: zero-energy operand");
  if (!std::isfinite(snr_db)) throw DomainError("scale_noise_to_snr: non-finite target");
  const double g = std::sqrt(es / (en * std::pow(10.0, snr_db / 10.0)));
  return g * noise;
}

// "min" configuration: cut every signal to the shortest length, from sample 0.
inline std::vector<Waveform> min_truncate(std::span<const Waveform> signals) {
  if (signals.empty()) throw ArgumentError("min_truncate: empty list");
  std::size_t shortest = signals.front().size();
  for (const Waveform& w : signals) shortest = std::min(shortest, w.size());
  std::vector<Waveform> out;
  out.reserve(signals.size());
  for (const Waveform& w : signals) {
    out.emplace_back(std::vector<double>(w.samples.begin(), w.samples.begin() + shortest),
                     w.sample_rate);
  }
  return out;
}

inline Trial build_trial(std::span<const Waveform> clean_sources, std::span<const Waveform> noises,
                         const DatasetConfig& cfg, std::string trial_id = {}) {
  const std::size_t k = clean_sources.size();
  if (k == 0) throw ArgumentError("build_trial: no sources");
  if (noises.size() != k) throw ArgumentError("build_trial: need one noise per source");

  std::vector<Waveform> all(clean_sources.begin(), clean_sources.end());
  all.insert(all.end(), noises.begin(), noises.end());
  for (const Waveform& w : all) {
    validate(w, "build_trial");
    if (w.sample_rate != all.front().sample_rate) {
      throw DimensionError("build_trial: sample rate mismatch");
    }
  }
  all = min_truncate(all);
  const std::size_t length = all.front().size();
  const int rate = all.front().sample_rate;

  Trial t;
  t.trial_id = std::move(trial_id);
  t.snr = cfg.snr;
  t.oracle_mode = cfg.oracle_mode;
  for (std::size_t i = 0; i < k; ++i) {
    const Waveform& s = all[i];
    const Waveform& n = all[k + i];
    switch (cfg.snr.kind) {
      case SnrSpec::Kind::Clean:
        t.clean_refs.push_back(s);
        t.noises.push_back(Waveform::zeros(length, rate));
        break;
      case SnrSpec::Kind::PureNoise:
        t.clean_refs.push_back(Waveform::zeros(length, rate));
        t.noises.push_back(n);
        break;
      case SnrSpec::Kind::Finite:
        t.clean_refs.push_back(s);
        t.noises.push_back(scale_noise_to_snr(s, n, cfg.snr.db));
        break;
    }
  }
  std::vector<Waveform> noisy;
  for (std::size_t i = 0; i < k; ++i) noisy.push_back(t.noisy_source(i));
  t.mixture = sum(noisy);
  if (cfg.oracle_mode == OracleMode::Noisy) {
    t.oracles = std::move(noisy);
  } else {
    t.oracles = t.clean_refs;
    t.oracles.push_back(t.summed_noise());
  }
  return t;
}

// --- on-disk datasets -------------------------------------------------------

// One line of a dataset manifest. Paths are relative to the dataset root.
struct ManifestEntry {
  std::string trial_id;
  std::string mixture;
  std::vector<std::string> oracles;
  std::vector<std::string> clean_refs;
  std::vector<std::string> noises;
  SnrSpec snr;
  OracleMode oracle_mode = OracleMode::Noisy;
  int sample_rate = kDefaultSampleRate;
  std::size_t length = 0;
  std::map<std::string, std::string> digests;  // relative path -> sha256

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline nlohmann::json to_json(const ManifestEntry& e) {
  return nlohmann::json{{"trial_id", e.trial_id},
                        {"mixture", e.mixture},
                        {"oracles", e.oracles},
                        {"clean_refs", e.clean_refs},
                        {"noises", e.noises},
                        {"snr_db", to_json_value(e.snr)},
                        {"oracle_mode", to_string(e.oracle_mode)},
                        {"sample_rate", e.sample_rate},
                        {"length", e.length},
                        {"digests", e.digests}};
}

inline ManifestEntry manifest_entry_from_json(const nlohmann::json& j) {
  try {
    ManifestEntry e;
    e.trial_id = j.at("trial_id").get<std::string>();
    e.mixture = j.at("mixture").get<std::string>();
    e.oracles = j.at("oracles").get<std::vector<std::string>>();
    e.clean_refs = j.at("clean_refs").get<std::vector<std::string>>();
    e.noises = j.at("noises").get<std::vector<std::string>>();
    e.snr = snr_from_json(j.at("snr_db"));
    e.oracle_mode = parse_oracle_mode(j.at("oracle_mode").get<std::string>());
    e.sample_rate = j.at("sample_rate").get<int>();
    e.length = j.at("length").get<std::size_t>();
    e.digests = j.at("digests").get<std::map<std::string, std::string>>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("manifest entry: ") + ex.what());
  }
}

inline constexpr const char* kManifestName = "manifest.jsonl";

inline void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const ManifestEntry& e : entries) out << to_json(e).dump() << '\n';
  if (!out) throw IoError("short write to " + path.string());
}

// Reads any line-delimited JSON file, skipping blank lines.
inline std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::vector<ManifestEntry> out;
  for (const auto& j : read_json_lines(path)) out.push_back(manifest_entry_from_json(j));
  return out;
}

// Loads every trial of a dataset written by build_dataset, in manifest
// order. With verify_digests, a file whose bytes changed is a FormatError.
inline std::vector<Trial> load_dataset(const std::filesystem::path& root, bool verify_digests = false) {
  std::vector<Trial> trials;
  for (const ManifestEntry& e : read_manifest(root / kManifestName)) {
    auto load = [&](const std::string& rel) {
      const auto path = root / rel;
      if (verify_digests) {
        const auto it = e.digests.find(rel);
        if (it == e.digests.end() || sha256_file(path) != it->second) {
          throw FormatError(e.trial_id + ": digest mismatch for " + rel);
        }
      }
      return read_wav(path);
    };
    Trial t;
    t.trial_id = e.trial_id;
    t.snr = e.snr;
    t.oracle_mode = e.oracle_mode;
    t.mixture = load(e.mixture);
    for (const auto& p : e.oracles) t.oracles.push_back(load(p));
    for (const auto& p : e.clean_refs) t.clean_refs.push_back(load(p));
    for (const auto& p : e.noises) t.noises.push_back(load(p));
    trials.push_back(std::move(t));
  }
  return trials;
}

// One requested trial of a source manifest: K clean-speech files and the K
// noise files paired with them (relative paths resolve against the
// manifest's directory).
struct SourceRequest {
  std::string trial_id;
  std::vector<std::filesystem::path> clean;
  std::vector<std::filesystem::path> noise;
};

inline std::vector<SourceRequest> read_source_manifest(const std::filesystem::path& path) {
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<SourceRequest> out;
  for (const auto& j : read_json_lines(path)) {
    try {
      SourceRequest r;
      r.trial_id = j.at("trial_id").get<std::string>();
      for (const auto& p : j.at("clean")) r.clean.push_back(resolve(p.get<std::string>()));
      for (const auto& p : j.at("noise")) r.noise.push_back(resolve(p.get<std::string>()));
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(path.string() + ": " + ex.what());
    }
  }
  return out;
}

struct TrialError {
  std::string trial_id;
  std::string message;
};

struct DatasetSummary {
  std::size_t trials_written = 0;
  std::vector<TrialError> errors;
  std::vector<ManifestEntry> entries;

  bool ok() const { return errors.empty(); }
};

// Builds every trial of a source manifest. Trials are assembled in memory
// first; if any fails, no audio or manifest is written and the summary
// carries one error record per failed trial.
inline DatasetSummary build_dataset(const std::filesystem::path& manifest_in, const DatasetConfig& cfg,
                                    const std::filesystem::path& out_dir,
                                    SampleFormat format = SampleFormat::Float32) {
  namespace fs = std::filesystem;
  std::vector<SourceRequest> requests = read_source_manifest(manifest_in);
  std::sort(requests.begin(), requests.end(),
            [](const SourceRequest& a, const SourceRequest& b) { return a.trial_id < b.trial_id; });

  DatasetSummary summary;
  std::vector<Trial> built;
  for (const SourceRequest& r : requests) {
    try {
      std::vector<Waveform> clean, noise;
      for (const auto& p : r.clean) clean.push_back(read_wav(p));
      for (const auto& p : r.noise) noise.push_back(read_wav(p));
      for (const auto* group : {&clean, &noise}) {
        for (const Waveform& w : *group) {
          if (w.sample_rate != cfg.sample_rate) {
            throw DimensionError("sample rate " + std::to_string(w.sample_rate) + " != " +
                                 std::to_string(cfg.sample_rate));
          }
        }
      }
      built.push_back(build_trial(clean, noise, cfg, r.trial_id));
    } catch (const Error& e) {
      summary.errors.push_back({r.trial_id, e.what()});
    }
  }
  if (!summary.ok()) return summary;

  fs::create_directories(out_dir);
  for (const Trial& t : built) {
    fs::create_directories(out_dir / t.trial_id);
    ManifestEntry e;
    e.trial_id = t.trial_id;
    e.snr = t.snr;
    e.oracle_mode = t.oracle_mode;
    e.sample_rate = t.mixture.sample_rate;
    e.length = t.mixture.size();
    auto emit = [&](const std::string& name, const Waveform& w) {
      const std::string rel = t.trial_id + "/" + name;
      write_wav(out_dir / rel, w, format);
      e.digests[rel] = sha256_file(out_dir / rel);
      return rel;
    };
    e.mixture = emit("mixture.wav", t.mixture);
    for (std::size_t i = 0; i < t.oracles.size(); ++i) {
      e.oracles.push_back(emit("oracle_" + std::to_string(i) + ".wav", t.oracles[i]));
    }
    for (std::size_t i = 0; i < t.speakers(); ++i) {
      e.clean_refs.push_back(emit("clean_" + std::to_string(i) + ".wav", t.clean_refs[i]));
      e.noises.push_back(emit("noise_" + std::to_string(i) + ".wav", t.noises[i]));
    }
    summary.entries.push_back(std::move(e));
  }
  write_manifest(out_dir / kManifestName, summary.entries);
  summary.trials_written = summary.entries.size();
  return summary;
}

}  // namespace esser
