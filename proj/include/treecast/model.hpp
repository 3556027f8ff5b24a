#ifndef TREECAST_MODEL_HPP
#define TREECAST_MODEL_HPP

#include <cmath>
#include <string_view>

#include "treecast/distributions.hpp"
#include "treecast/errors.hpp"

namespace treecast {

enum class Verdict { Survives, Dies, CriticalIndeterminate };

enum class Scheme { Augmented, Complete, Boundary };

inline constexpr std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Survives: return "survives";
    case Verdict::Dies: return "dies";
    case Verdict::CriticalIndeterminate: return "critical-indeterminate";
  }
  return "?";
}

inline constexpr std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::Augmented: return "augmented";
    case Scheme::Complete: return "complete";
    case Scheme::Boundary: return "boundary";
  }
  return "?";
}

/// Classify a margin (positive means survival) against a tolerance band.
inline Verdict verdict_from_margin(double margin, double tol) {
  if (margin > tol) return Verdict::Survives;
  if (margin < -tol) return Verdict::Dies;
  return Verdict::CriticalIndeterminate;
}

/// How often a transceiver can bridge the next edge on its own.
enum class Reach { Never, Sometimes, Always };

/// Branching number m with the laws of R (vertex strength) and C (edge cost).
struct ModelConfig {
  int m = 2;
  Dist R = Dist::constant(1.0);
  Dist C = Dist::constant(1.0);

  ModelConfig() = default;
  ModelConfig(int m_, Dist r, Dist c) : m(m_), R(std::move(r)), C(std::move(c)) {
    if (m < 1) throw SchemaError("m must be >= 1");
  }

  double log_m() const { return std::log(static_cast<double>(m)); }

  /// Classification of P(R >= C). Only Sometimes is the interesting regime.
  Reach reach() const {
    const double r_lo = min_support(R);
    const ExtReal r_hi = max_support(R);
    const double c_lo = min_support(C);
    const ExtReal c_hi = max_support(C);
    if (c_hi.is_finite() && r_lo >= c_hi.value()) return Reach::Always;
    if (r_hi.is_finite()) {
      if (r_hi.value() < c_lo) return Reach::Never;
      if (r_hi.value() == c_lo && (prob_at(R, r_hi.value()) == 0.0 || prob_at(C, c_lo) == 0.0)) return Reach::Never;
    }
    return Reach::Sometimes;
  }

  /// Set when P(R >= C) is 0 or 1.
  bool degenerate_warning() const { return reach() != Reach::Sometimes; }
};

}  // namespace treecast

#endif  // TREECAST_MODEL_HPP
