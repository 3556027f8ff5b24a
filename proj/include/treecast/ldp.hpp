#ifndef TREECAST_LDP_HPP
#define TREECAST_LDP_HPP

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "treecast/distributions.hpp"
#include "treecast/model.hpp"

namespace treecast {

/// Largest lambda at which log-MGFs of unbounded kinds are evaluated.
inline constexpr double kLambdaCap = 700.0;
/// Half-width of the band around I(0) = log m reported as critical.
inline constexpr double kCriticalTol = 1e-7;

/// E[R] - E[C] with IEEE semantics: +-inf for one infinite mean, NaN for two.
inline double mean_z(const ModelConfig& cfg) { return mean(cfg.R).raw() - mean(cfg.C).raw(); }

/// log E[exp(lambda (R - C))] for lambda >= 0.
inline ExtReal log_mgf_z(const ModelConfig& cfg, double lambda) {
  if (lambda < 0.0) throw PreconditionFailed("log_mgf_z: lambda must be >= 0");
  return log_mgf(cfg.R, lambda) + log_mgf(cfg.C, -lambda);
}

/// Top of the support of Z = R - C and its probability.
struct ZTop {
  ExtReal value;
  double prob = 0.0;
};

inline ZTop z_top(const ModelConfig& cfg) {
  const ExtReal r_hi = max_support(cfg.R);
  if (r_hi.is_inf()) return {ExtReal::inf(), 0.0};
  const double c_lo = min_support(cfg.C);
  return {ExtReal(r_hi.value() - c_lo), prob_at(cfg.R, r_hi.value()) * prob_at(cfg.C, c_lo)};
}

/// True when both R and C have finite atom lists, so their MGFs stay exact for
/// any lambda.
inline bool both_finite_kinds(const ModelConfig& cfg) {
  return finite_atoms(cfg.R).has_value() && finite_atoms(cfg.C).has_value();
}

struct RateResult {
  ExtReal value;
  double argmax = 0.0;   // maximizing lambda (+inf for the analytic limit)
  bool converged = true; // false when the bracket hit the lambda cap
};

/// Right-sided Legendre transform I(s) = sup_{lambda >= 0} [lambda s - Lambda(lambda)].
///
/// The objective is concave in lambda. The maximizer is bracketed by doubling
/// from [0, 1] until the objective decreases, then located by golden-section
/// search. If the objective still increases at the lambda cap and Z has a
/// top atom, the analytic limit is used.
inline RateResult rate_function(const ModelConfig& cfg, double s) {
  const double ez = mean_z(cfg);
  if (!std::isnan(ez) && s <= ez) return {0.0, 0.0, true};
  if (is_power_law(cfg.R)) return {0.0, 0.0, true};

  const ZTop top = z_top(cfg);
  if (top.value.is_finite()) {
    if (s > top.value.value()) return {ExtReal::inf(), std::numeric_limits<double>::infinity(), true};
    if (s == top.value.value()) {
      if (top.prob <= 0.0) return {ExtReal::inf(), std::numeric_limits<double>::infinity(), true};
      return {-std::log(top.prob), std::numeric_limits<double>::infinity(), true};
    }
  }

  auto objective = [&](double lambda) {
    const ExtReal lm = log_mgf_z(cfg, lambda);
    return lm.is_inf() ? -std::numeric_limits<double>::infinity() : lambda * s - lm.value();
  };

  const bool exact_any_lambda = both_finite_kinds(cfg);
  double lo = 0.0;
  double hi = 1.0;
  bool converged = true;
  double f_hi = objective(hi);
  double f_half = objective(0.5);
  while (f_hi >= f_half) {
    if (!exact_any_lambda && hi >= kLambdaCap) {
      converged = false;
      break;
    }
    lo = hi / 2.0;
    hi *= 2.0;
    if (!exact_any_lambda) hi = std::min(hi, kLambdaCap);
    f_half = objective(hi / 2.0);
    f_hi = objective(hi);
    if (hi > 1e300) break;
  }
  if (!converged) return {ExtReal(std::max(0.0, f_hi)), hi, false};

  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = objective(x1);
  double f2 = objective(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, b); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = objective(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = objective(x1);
    }
  }
  const double best = std::max(f1, f2);
  if (best <= 0.0) return {0.0, 0.0, true};
  return {ExtReal(best), f1 > f2 ? x1 : x2, true};
}

inline ExtReal rate_i(const ModelConfig& cfg, double s) { return rate_function(cfg, s).value; }

/// s* = sup{s : I(s) <= log m}, the asymptotic speed of the rightmost particle.
inline ExtReal s_star(const ModelConfig& cfg) {
  if (cfg.m < 2) throw PreconditionFailed("s_star requires m >= 2");
  if (is_power_law(cfg.R)) return ExtReal::inf();
  const double log_m = cfg.log_m();
  const ZTop top = z_top(cfg);
  if (top.value.is_finite() && rate_i(cfg, top.value.value()) <= log_m) return top.value;

  const double ez = mean_z(cfg);
  double lo;
  if (std::isfinite(ez)) {
    lo = ez;
  } else {
    lo = -1.0;
    while (rate_i(cfg, lo) > log_m && lo > -1e12) lo *= 2.0;
  }
  double step = 1.0;
  double hi = lo + step;
  while (rate_i(cfg, hi) <= log_m) {
    lo = hi;
    step *= 2.0;
    hi = lo + step;
    if (hi > 1e12) return ExtReal::inf();
  }
  while (hi - lo > 1e-10 * std::max(1.0, std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    if (rate_i(cfg, mid) <= log_m)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// inf over lambda >= 0 of log(E[e^{lambda R}] E[e^{-lambda C}]), found by a
/// log-spaced scan and golden refinement of the product form. Kept separate
/// from rate_function so the two survival criteria are computed independently.
inline double min_log_product(const ModelConfig& cfg) {
  if (is_power_law(cfg.R)) return 0.0;
  auto g = [&](double lambda) {
    const ExtReal a = log_mgf(cfg.R, lambda);
    const ExtReal b = log_mgf(cfg.C, -lambda);
    return (a + b).raw();
  };
  std::vector<double> grid{0.0};
  for (int i = 0; i <= 720; ++i) grid.push_back(1e-6 * std::pow(kLambdaCap / 1e-6, i / 720.0));
  std::size_t best = 0;
  double best_val = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double v = g(grid[i]);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  if (best == 0 || best + 1 == grid.size()) return best_val;
  double a = grid[best - 1];
  double b = grid[best + 1];
  for (int it = 0; it < 200 && b - a > 1e-14 * b; ++it) {
    const double m1 = a + (b - a) / 3.0;
    const double m2 = b - (b - a) / 3.0;
    if (g(m1) < g(m2))
      b = m2;
    else
      a = m1;
  }
  return std::min(best_val, g(0.5 * (a + b)));
}

/// Outcome of the augmented-routing analysis.
struct LdpReport {
  std::vector<std::pair<double, ExtReal>> lambda_grid;
  ExtReal i_at_zero;
  double lambda_star = 0.0;
  ExtReal s_star;
  double product_min_log = 0.0;  // inf_lambda log(E e^{lambda R} E e^{-lambda C})
  Verdict verdict = Verdict::CriticalIndeterminate;
  Verdict product_verdict = Verdict::CriticalIndeterminate;
  bool degenerate = false;         // P(R >= C) in {0, 1}
  bool short_circuit = false;      // min R >= max C
  bool converged = true;
  /// Within the critical band the killed walk is known to die at exact
  /// criticality; the band itself is still reported as indeterminate.
  bool critical_extinction = false;
};

/// Survival verdict for augmented routing (m >= 2): I(0) against log m,
/// cross-checked by inf_lambda m E[e^{lambda R}] E[e^{-lambda C}] against 1.
inline LdpReport augmented_verdict(const ModelConfig& cfg) {
  if (cfg.m < 2) throw PreconditionFailed("augmented_verdict requires m >= 2; use m1_verdict");
  LdpReport rep;
  for (int i = 0; i <= 20; ++i) {
    const double lambda = 0.25 * i;
    rep.lambda_grid.emplace_back(lambda, log_mgf_z(cfg, lambda));
  }
  rep.degenerate = cfg.degenerate_warning();
  rep.s_star = s_star(cfg);
  if (cfg.reach() == Reach::Always) {
    rep.short_circuit = true;
    rep.i_at_zero = 0.0;
    rep.verdict = rep.product_verdict = Verdict::Survives;
    return rep;
  }
  const double log_m = cfg.log_m();
  const RateResult r0 = rate_function(cfg, 0.0);
  rep.i_at_zero = r0.value;
  rep.lambda_star = r0.argmax;
  rep.converged = r0.converged;
  rep.verdict = r0.value.is_inf() ? Verdict::Dies : verdict_from_margin(log_m - r0.value.value(), kCriticalTol);

  rep.product_min_log = min_log_product(cfg);
  rep.product_verdict = verdict_from_margin(log_m + rep.product_min_log, kCriticalTol);
  const bool clash = (rep.verdict == Verdict::Survives && rep.product_verdict == Verdict::Dies) ||
                     (rep.verdict == Verdict::Dies && rep.product_verdict == Verdict::Survives);
  if (clash) throw ConsistencyError("augmented_verdict: rate-function and product criteria disagree");
  rep.critical_extinction = rep.verdict == Verdict::CriticalIndeterminate;
  return rep;
}

}  // namespace treecast

#endif  // TREECAST_LDP_HPP
