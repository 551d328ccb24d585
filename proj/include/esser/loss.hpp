// Copyright 2026 The esser-toolkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "esser/error.hpp"
#include "esser/sigcore.hpp"

namespace esser {

enum class LossFamily { SdrNoisy, SiSdr, Esser };

inline std::string_view to_string(LossFamily f) {
  switch (f) {
    case LossFamily::SdrNoisy: return "sdr_noisy";
    case LossFamily::SiSdr: return "sisdr";
    case LossFamily::Esser: return "esser";
  }
  return "?";
}

inline LossFamily parse_loss_family(std::string_view s) {
  if (s == "sdr_noisy" || s == "sdr") return LossFamily::SdrNoisy;
  if (s == "sisdr" || s == "si_sdr") return LossFamily::SiSdr;
  if (s == "esser") return LossFamily::Esser;
  throw ArgumentError("unknown loss family: " + std::string(s));
}

inline constexpr double kMaxLambda = 2.0;
inline constexpr double kDefaultEpsilon = 1e-12;

struct LossConfig {
  // Weight of the noise discount.
  double lambda = 0.0;
  // Denominator floor, relative to the reference energy of each loss.
  double epsilon = kDefaultEpsilon;
  LossFamily family = LossFamily::SiSdr;

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= kMaxLambda)) {
      throw ConfigError("lambda must lie in [0, 2], got " + std::to_string(lambda));
    }
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  }
};

// The pieces of one ESSER evaluation. `value` is always
// db_ratio(numerator_energy, denominator_energy, floor).
struct LossBreakdown {
  double value = 0.0;
  double numerator_energy = 0.0;    // |s_hat|^2
  double denominator_energy = 0.0;  // |d|^2 before flooring
  double residual_energy = 0.0;     // |s_noisy - s_hat|^2
  double discount_energy = 0.0;     // |lambda * proj_e(n_hat)|^2
  double ortho_penalty_energy = 0.0;  // |proj_s_hat(n_hat)|^2
  double floor = 0.0;
  bool floored = false;
};

namespace detail {

inline constexpr double kDbPerNeper = 10.0 / std::numbers::ln10;

// Projection coefficient <target, onto>/|onto|^2, zero for a zero direction.
inline double proj_coeff(const Waveform& target, const Waveform& onto) {
  const double e = energy(onto);
  return e > 0.0 ? dot(target, onto) / e : 0.0;
}

// Vector-Jacobian products of P(n, u) = (<n,u>/|u|^2) u with cotangent w.
// Returns the pullbacks onto n and onto u.
inline std::pair<Waveform, Waveform> projection_vjp(const Waveform& n, const Waveform& u,
                                                    const Waveform& w) {
  const double uu = energy(u);
  if (!(uu > 0.0)) {
    return {Waveform::zeros(n.size(), n.sample_rate), Waveform::zeros(n.size(), n.sample_rate)};
  }
  const double c = dot(n, u) / uu;
  const double wu = dot(w, u) / uu;
  Waveform grad_n = wu * u;
  Waveform grad_u = wu * n + c * w - (2.0 * c * wu) * u;
  return {std::move(grad_n), std::move(grad_u)};
}

inline double reference_floor(double eps, const Waveform& reference, const Waveform& fallback) {
  const double e = energy(reference);
  return eps * (e > 0.0 ? e : energy(fallback));
}

struct EsserParts {
  Waveform residual;     // e = s_noisy - s_hat
  Waveform discount;     // proj_e(n_hat)
  Waveform ortho;        // proj_s_hat(n_hat)
  Waveform denominator;  // d = e - lambda*discount + ortho
  LossBreakdown breakdown;
};

inline EsserParts esser_parts(const Waveform& s_hat, const Waveform& n_hat,
                              const Waveform& s_noisy, const LossConfig& cfg) {
  cfg.validate();
  require_compatible(s_hat, n_hat, "esser");
  require_compatible(s_hat, s_noisy, "esser");
  const double ss = energy(s_hat);
  if (!(ss > 0.0)) throw DomainError("esser: zero-energy source estimate");

  EsserParts p;
  p.residual = s_noisy - s_hat;
  // Zero residual leaves the discount undefined; its limit is zero.
  p.discount = proj_coeff(n_hat, p.residual) * p.residual;
  p.ortho = (dot(n_hat, s_hat) / ss) * s_hat;
  p.denominator = p.residual - cfg.lambda * p.discount + p.ortho;

  LossBreakdown& b = p.breakdown;
  b.numerator_energy = ss;
  b.denominator_energy = energy(p.denominator);
  b.residual_energy = energy(p.residual);
  b.discount_energy = cfg.lambda * cfg.lambda * energy(p.discount);
  b.ortho_penalty_energy = energy(p.ortho);
  b.floor = reference_floor(cfg.epsilon, s_noisy, s_hat);
  b.floored = b.denominator_energy <= b.floor;
  b.value = db_ratio(b.numerator_energy, b.denominator_energy, b.floor);
  return p;
}

}  // namespace detail

// SDR against a noisy ground truth: 10 log10(|s_noisy|^2 / |s_noisy - s_hat|^2).
inline double sdr_noisy(const Waveform& s_noisy, const Waveform& s_hat,
                        double epsilon = kDefaultEpsilon) {
  require_compatible(s_noisy, s_hat, "sdr_noisy");
  const double ref = energy(s_noisy);
  if (!(ref > 0.0)) throw DomainError("sdr_noisy: zero-energy ground truth");
  return db_ratio(ref, energy(s_noisy - s_hat), epsilon * ref);
}

inline Waveform sdr_noisy_grad(const Waveform& s_noisy, const Waveform& s_hat,
                               double epsilon = kDefaultEpsilon) {
  require_compatible(s_noisy, s_hat, "sdr_noisy_grad");
  const double ref = energy(s_noisy);
  if (!(ref > 0.0)) throw DomainError("sdr_noisy: zero-energy ground truth");
  const Waveform e = s_noisy - s_hat;
  const double ee = energy(e);
  if (ee <= epsilon * ref) throw GradientUndefined("sdr_noisy_grad: residual on the floor");
  return (2.0 * detail::kDbPerNeper / ee) * e;
}

struct SiSdrResult {
  double value = 0.0;
  bool capped_high = false;  // residual on the floor (perfect reconstruction)
  bool capped_low = false;   // target on the floor (orthogonal estimate)
};

// Scale-invariant SDR. The floor is epsilon * |estimate|^2, which keeps the
// score exactly scale invariant and bounds it to +-10 log10(1/epsilon).
inline SiSdrResult si_sdr_detail(const Waveform& reference, const Waveform& estimate,
                                 double epsilon = kDefaultEpsilon) {
  require_compatible(reference, estimate, "si_sdr");
  const double rr = energy(reference);
  const double ee = energy(estimate);
  if (!(rr > 0.0) || !(ee > 0.0)) throw DomainError("si_sdr: zero-energy operand");
  const Waveform target = (dot(estimate, reference) / rr) * reference;
  const double tt = energy(target);
  const double res = energy(target - estimate);
  const double floor = epsilon * ee;
  SiSdrResult out;
  out.capped_high = res <= floor;
  out.capped_low = tt <= floor;
  out.value = 10.0 * std::log10(std::max(tt, floor) / std::max(res, floor));
  return out;
}

inline double si_sdr(const Waveform& reference, const Waveform& estimate,
                     double epsilon = kDefaultEpsilon) {
  return si_sdr_detail(reference, estimate, epsilon).value;
}

// Gradient of si_sdr with respect to the estimate. On the high cap the
// capped expression 10 log10(|target|^2 / (eps |estimate|^2)) is
// differentiated instead; it vanishes at perfect reconstruction.
inline Waveform si_sdr_grad(const Waveform& reference, const Waveform& estimate,
                            double epsilon = kDefaultEpsilon) {
  const SiSdrResult r = si_sdr_detail(reference, estimate, epsilon);
  if (r.capped_low) throw GradientUndefined("si_sdr_grad: estimate orthogonal to reference");
  const Waveform target = (dot(estimate, reference) / energy(reference)) * reference;
  const double tt = energy(target);
  constexpr double c = 2.0 * detail::kDbPerNeper;
  if (r.capped_high) return (c / tt) * target - (c / energy(estimate)) * estimate;
  const Waveform residual = target - estimate;
  return (c / tt) * target + (c / energy(residual)) * residual;
}

// Rescales an estimate by projecting the mixture onto it. Under-scales by
// |s_hat|^2 / |s_hat + e|^2 and becomes exact as the error vanishes.
inline Waveform mixture_scale(const Waveform& mixture, const Waveform& estimate) {
  require_compatible(mixture, estimate, "mixture_scale");
  if (!(energy(estimate) > 0.0)) throw DegenerateError("mixture_scale: zero-energy estimate");
  return project(mixture, estimate);
}

// Pullback of a cotangent on mixture_scale's output onto the raw estimate.
inline Waveform mixture_scale_vjp(const Waveform& mixture, const Waveform& estimate,
                                  const Waveform& cotangent) {
  return detail::projection_vjp(mixture, estimate, cotangent).second;
}

// ESSER of one source. Inputs are expected to be mixture-scaled already.
//   d = (s_noisy - s_hat) - lambda proj_e(n_hat) + proj_s_hat(n_hat)
//   value = 10 log10(|s_hat|^2 / max(|d|^2, eps |s_noisy|^2))
inline LossBreakdown esser(const Waveform& s_hat, const Waveform& n_hat, const Waveform& s_noisy,
                           const LossConfig& cfg) {
  return detail::esser_parts(s_hat, n_hat, s_noisy, cfg).breakdown;
}

struct EsserGradient {
  Waveform s_hat;
  Waveform n_hat;
};

inline EsserGradient esser_grad(const Waveform& s_hat, const Waveform& n_hat,
                                const Waveform& s_noisy, const LossConfig& cfg) {
  const detail::EsserParts p = detail::esser_parts(s_hat, n_hat, s_noisy, cfg);
  if (p.breakdown.floored) {
    throw GradientUndefined("esser_grad: denominator on the floor; perturb inputs or lower lambda");
  }
  if (!(p.breakdown.residual_energy > 0.0)) {
    throw GradientUndefined("esser_grad: zero residual");
  }
  const Waveform& d = p.denominator;
  // Pullbacks of <d, d(d)> through the two projections.
  const auto [disc_n, disc_e] = detail::projection_vjp(n_hat, p.residual, d);
  const auto [orth_n, orth_s] = detail::projection_vjp(n_hat, s_hat, d);
  // de/ds_hat = -I.
  const Waveform d_over_s = cfg.lambda * disc_e + orth_s - d;
  const Waveform d_over_n = orth_n - cfg.lambda * disc_n;

  constexpr double c = 2.0 * detail::kDbPerNeper;
  const double dd = p.breakdown.denominator_energy;
  EsserGradient g;
  g.s_hat = (c / p.breakdown.numerator_energy) * s_hat - (c / dd) * d_over_s;
  g.n_hat = (-c / dd) * d_over_n;
  return g;
}

}  // namespace esser
