// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esser/error.hpp"
#include "json.hpp"

namespace esser {

inline constexpr double kDefaultDropThreshold = 0.667;
inline constexpr double kDefaultLambdaStep = 0.1;
inline constexpr double kDefaultMaxLambda = 1.0;

enum class StopReason { ThresholdDrop, SweepExhausted };

inline std::string_view to_string(StopReason r) {
  return r == StopReason::ThresholdDrop ? "THRESHOLD_DROP" : "SWEEP_EXHAUSTED";
}

// What a score drop is measured against.
enum class DropReference {
  Previous,  // the immediately preceding lambda
  Initial,   // the lambda = 0 score
};

struct Selection {
  std::size_t index = 0;
  StopReason reason = StopReason::SweepExhausted;
};

// Scans consecutive scores and stops at the first i where score[i+1] falls
// more than `threshold` below the reference score; returns i, the value
// prior to the drop. Without a drop, returns the last index.
inline Selection select_lambda(std::span<const double> scores, double threshold = kDefaultDropThreshold,
                               DropReference ref = DropReference::Previous) {
  if (scores.empty()) throw ArgumentError("select_lambda: no scores");
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    const double base = ref == DropReference::Previous ? scores[i] : scores[0];
    if (scores[i + 1] < base - threshold) return {i, StopReason::ThresholdDrop};
  }
  return {scores.size() - 1, StopReason::SweepExhausted};
}

struct SweepRecord {
  std::vector<double> lambda_values;
  std::vector<double> proxy_scores;
  double selected_lambda = 0.0;
  StopReason stop_reason = StopReason::SweepExhausted;
};

inline nlohmann::json to_json(const SweepRecord& r) {
  return {{"lambda_values", r.lambda_values},
          {"proxy_scores", r.proxy_scores},
          {"selected_lambda", r.selected_lambda},
          {"stop_reason", to_string(r.stop_reason)}};
}

// Thrown when the callback fails mid-sweep; carries what was measured.
class SweepAborted : public Error {
 public:
  SweepAborted(const std::string& what, SweepRecord partial)
      : Error(what), partial_(std::move(partial)) {}
  const SweepRecord& partial() const { return partial_; }

 private:
  SweepRecord partial_;
};

struct SweepOptions {
  double max_lambda = kDefaultMaxLambda;
  double step = kDefaultLambdaStep;
  double threshold = kDefaultDropThreshold;
  DropReference reference = DropReference::Previous;
};

// Grid 0, step, 2 step, ... <= max_lambda. Values are i*step, not a running
// sum, so the spacing carries no accumulated rounding.
inline std::vector<double> lambda_grid(double max_lambda, double step) {
  if (!(step > 0.0)) throw ArgumentError("lambda grid: step must be positive");
  if (!(max_lambda >= 0.0)) throw ArgumentError("lambda grid: max_lambda must be >= 0");
  const auto n = static_cast<std::size_t>(std::floor(max_lambda / step + 1e-9));
  std::vector<double> grid;
  for (std::size_t i = 0; i <= n; ++i) grid.push_back(static_cast<double>(i) * step);
  return grid;
}

// Evaluates `proxy` on the lambda grid in ascending order and stops as soon
// as the drop rule fires, so the callback never runs past the first lambda
// that shows the drop.
inline SweepRecord run_sweep(const std::function<double(double)>& proxy, const SweepOptions& opt = {}) {
  SweepRecord rec;
  for (double lambda : lambda_grid(opt.max_lambda, opt.step)) {
    double score;
    try {
      score = proxy(lambda);
    } catch (const std::exception& e) {
      if (!rec.proxy_scores.empty()) {
        rec.selected_lambda = rec.lambda_values[select_lambda(rec.proxy_scores, opt.threshold, opt.reference).index];
      }
      throw SweepAborted(std::string("sweep aborted at lambda=") + std::to_string(lambda) + ": " + e.what(),
                         rec);
    }
    rec.lambda_values.push_back(lambda);
    rec.proxy_scores.push_back(score);
    const Selection s = select_lambda(rec.proxy_scores, opt.threshold, opt.reference);
    if (s.reason == StopReason::ThresholdDrop) {
      rec.selected_lambda = rec.lambda_values[s.index];
      rec.stop_reason = StopReason::ThresholdDrop;
      return rec;
    }
  }
  rec.selected_lambda = rec.lambda_values.back();
  rec.stop_reason = StopReason::SweepExhausted;
  return rec;
}

}  // namespace esser
