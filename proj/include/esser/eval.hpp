// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "esser/error.hpp"
#include "esser/loss.hpp"
#include "esser/mixer.hpp"
#include "esser/pit.hpp"
#include "json.hpp"

namespace esser {

// Scores are measured against clean references, never against oracles, so
// estimates from models trained in either oracle mode compare directly.
struct SeparationScore {
  std::vector<double> si_sdr_db;        // indexed by reference (speaker)
  std::vector<std::size_t> permutation;  // estimate i -> reference permutation[i]
  std::vector<bool> capped;             // per reference: score sits on a floor
  double mean_db = 0.0;
};

namespace detail {

// si_sdr that maps a zero-energy estimate to the low floor instead of
// throwing.
inline SiSdrResult si_sdr_or_floor(const Waveform& reference, const Waveform& estimate) {
  if (!(energy(estimate) > 0.0)) {
    return {10.0 * std::log10(kDefaultEpsilon), false, true};
  }
  return si_sdr_detail(reference, estimate);
}

}  // namespace detail

// Permutation-invariant SI-SDR of the estimates against trial.clean_refs.
// Raw scores, not improvements.
inline SeparationScore eval_separation(const Trial& trial, std::span<const Waveform> estimates) {
  const std::size_t k = trial.speakers();
  if (estimates.size() != k) throw ArgumentError("eval_separation: estimate count != speakers");
  if (k > kMaxPitSpeakers) throw CapacityError("eval_separation: at most 4 speakers");
  for (const Waveform& e : estimates) require_compatible(trial.mixture, e, "eval_separation");

  std::vector<std::vector<SiSdrResult>> detail_table(k, std::vector<SiSdrResult>(k));
  std::vector<std::vector<double>> table(k, std::vector<double>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      detail_table[i][j] = detail::si_sdr_or_floor(trial.clean_refs[j], estimates[i]);
      table[i][j] = detail_table[i][j].value;
    }
  }
  const PitResult best = detail::best_assignment(table);
  SeparationScore s;
  s.permutation = best.best_permutation;
  s.si_sdr_db.assign(k, 0.0);
  s.capped.assign(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t ref = best.best_permutation[i];
    const SiSdrResult& r = detail_table[i][ref];
    s.si_sdr_db[ref] = r.value;
    s.capped[ref] = r.capped_high || r.capped_low;
  }
  s.mean_db = best.mean_value;
  return s;
}

// SI-SDR improvement of a noise estimate over the unprocessed mixture,
// against the summed noise. nullopt when the trial has no noise.
inline std::optional<double> eval_noise_estimate(const Trial& trial, const Waveform& n_hat) {
  require_compatible(trial.mixture, n_hat, "eval_noise_estimate");
  const Waveform reference = trial.summed_noise();
  if (!(energy(reference) > 0.0)) return std::nullopt;
  return detail::si_sdr_or_floor(reference, n_hat).value -
         detail::si_sdr_or_floor(reference, trial.mixture).value;
}

// --- reports ----------------------------------------------------------------

struct EvalRow {
  std::string trial_id;
  std::vector<double> si_sdr_db;
  std::vector<std::size_t> permutation;
  std::vector<bool> capped;
  std::optional<double> noise_si_sdri_db;

  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

struct MetricSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population standard deviation

  friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

struct EvalReport {
  std::vector<EvalRow> per_trial;
  std::map<std::string, MetricSummary> aggregates;
  nlohmann::json config = nlohmann::json::object();
};

inline MetricSummary summarize(std::vector<double> values) {
  MetricSummary m;
  m.count = values.size();
  if (values.empty()) return m;
  double total = 0.0;
  for (double v : values) total += v;
  m.mean = total / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(sq / static_cast<double>(values.size()));
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  m.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return m;
}

// Aggregates include capped scores; the rows carry the flags.
inline std::map<std::string, MetricSummary> aggregate(std::span<const EvalRow> rows) {
  std::vector<double> sep, noise;
  for (const EvalRow& r : rows) {
    sep.insert(sep.end(), r.si_sdr_db.begin(), r.si_sdr_db.end());
    if (r.noise_si_sdri_db) noise.push_back(*r.noise_si_sdri_db);
  }
  std::map<std::string, MetricSummary> out;
  out["si_sdr_db"] = summarize(std::move(sep));
  out["noise_si_sdri_db"] = summarize(std::move(noise));
  return out;
}

inline EvalRow evaluate_trial(const Trial& trial, std::span<const Waveform> estimates,
                              const std::optional<Waveform>& noise_estimate = std::nullopt) {
  const SeparationScore s = eval_separation(trial, estimates);
  EvalRow row;
  row.trial_id = trial.trial_id;
  row.si_sdr_db = s.si_sdr_db;
  row.permutation = s.permutation;
  row.capped = s.capped;
  if (noise_estimate) row.noise_si_sdri_db = eval_noise_estimate(trial, *noise_estimate);
  return row;
}

inline EvalReport make_report(std::vector<EvalRow> rows, nlohmann::json config = nlohmann::json::object()) {
  std::sort(rows.begin(), rows.end(),
            [](const EvalRow& a, const EvalRow& b) { return a.trial_id < b.trial_id; });
  EvalReport r;
  r.per_trial = std::move(rows);
  r.aggregates = aggregate(r.per_trial);
  r.config = std::move(config);
  return r;
}

enum class ReportFormat { Csv, JsonLines };

inline ReportFormat report_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return ReportFormat::Csv;
  if (ext == ".jsonl" || ext == ".json-lines" || ext == ".json") return ReportFormat::JsonLines;
  throw ArgumentError("report path must end in .csv or .jsonl: " + path.string());
}

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline const char* kCsvHeader = "trial_id,reference,estimate,si_sdr_db,capped,noise_si_sdri_db";

inline nlohmann::json to_json(const MetricSummary& m) {
  return {{"count", m.count}, {"mean", m.mean}, {"median", m.median}, {"std", m.std}};
}

// JSON lines: a header record, one record per trial, then an aggregate
// record when there is at least one trial. CSV: one row per (trial,
// reference); the noise column repeats per row and is empty when absent.
inline void write_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  if (format == ReportFormat::Csv) {
    out << kCsvHeader << '\n';
    for (const EvalRow& r : report.per_trial) {
      for (std::size_t ref = 0; ref < r.si_sdr_db.size(); ++ref) {
        const auto est = static_cast<std::size_t>(
            std::find(r.permutation.begin(), r.permutation.end(), ref) - r.permutation.begin());
        out << r.trial_id << ',' << ref << ',' << est << ',' << format_double(r.si_sdr_db[ref]) << ','
            << (r.capped[ref] ? 1 : 0) << ','
            << (r.noise_si_sdri_db ? format_double(*r.noise_si_sdri_db) : std::string()) << '\n';
      }
    }
  } else {
    out << nlohmann::json{{"type", "header"}, {"config", report.config}}.dump() << '\n';
    for (const EvalRow& r : report.per_trial) {
      nlohmann::json j{{"type", "trial"},
                       {"trial_id", r.trial_id},
                       {"si_sdr_db", r.si_sdr_db},
                       {"permutation", r.permutation},
                       {"capped", r.capped},
                       {"noise_si_sdri_db", nullptr}};
      if (r.noise_si_sdri_db) j["noise_si_sdri_db"] = *r.noise_si_sdri_db;
      out << j.dump() << '\n';
    }
    if (!report.per_trial.empty()) {
      nlohmann::json agg{{"type", "aggregate"}};
      for (const auto& [name, m] : report.aggregates) agg["metrics"][name] = to_json(m);
      out << agg.dump() << '\n';
    }
  }
  if (!out) throw IoError("short write to " + path.string());
}

inline void write_report(const EvalReport& report, const std::filesystem::path& path) {
  write_report(report, path, report_format_for(path));
}

inline EvalReport read_report_jsonl(const std::filesystem::path& path) {
  EvalReport report;
  try {
    for (const auto& j : read_json_lines(path)) {
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        report.config = j.at("config");
      } else if (type == "trial") {
        EvalRow r;
        r.trial_id = j.at("trial_id").get<std::string>();
        r.si_sdr_db = j.at("si_sdr_db").get<std::vector<double>>();
        r.permutation = j.at("permutation").get<std::vector<std::size_t>>();
        r.capped = j.at("capped").get<std::vector<bool>>();
        if (!j.at("noise_si_sdri_db").is_null()) r.noise_si_sdri_db = j["noise_si_sdri_db"].get<double>();
        report.per_trial.push_back(std::move(r));
      } else if (type == "aggregate") {
        for (const auto& [name, m] : j.at("metrics").items()) {
          report.aggregates[name] = MetricSummary{m.at("count").get<std::size_t>(), m.at("mean").get<double>(),
                                                  m.at("median").get<double>(), m.at("std").get<double>()};
        }
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(path.string() + ": " + ex.what());
  }
  return report;
}

// Reassembles rows from the CSV rendering.
inline std::vector<EvalRow> read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw FormatError(path.string() + ": bad CSV header");
  std::vector<EvalRow> rows;
  auto parse = [&](const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError("bad number '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    if (line.back() == ',') cols.emplace_back();
    if (cols.size() != 6) throw FormatError(path.string() + ": expected 6 columns");
    if (rows.empty() || rows.back().trial_id != cols[0]) {
      rows.push_back(EvalRow{cols[0], {}, {}, {}, std::nullopt});
    }
    EvalRow& r = rows.back();
    const auto ref = static_cast<std::size_t>(parse(cols[1]));
    const auto est = static_cast<std::size_t>(parse(cols[2]));
    if (r.si_sdr_db.size() <= ref) {
      r.si_sdr_db.resize(ref + 1);
      r.capped.resize(ref + 1);
    }
    if (r.permutation.size() <= est) r.permutation.resize(est + 1);
    r.si_sdr_db[ref] = parse(cols[3]);
    r.capped[ref] = cols[4] == "1";
    r.permutation[est] = ref;
    if (!cols[5].empty()) r.noise_si_sdri_db = parse(cols[5]);
  }
  return rows;
}

}  // namespace esser
