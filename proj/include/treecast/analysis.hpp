#ifndef TREECAST_ANALYSIS_HPP
#define TREECAST_ANALYSIS_HPP

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "treecast/chains.hpp"
#include "treecast/distributions.hpp"
#include "treecast/errors.hpp"
#include "treecast/ldp.hpp"
#include "treecast/model.hpp"

namespace treecast {

/// Evidence of the branching-process criterion E[m^R] > 1 + r_0 (C constant).
struct BranchingEvidence {
  double cost_unit = 1.0;     // the constant C that R was rescaled by
  double m_moment = 0.0;      // E[m^R'], R' = floor(R / c); may be +inf
  double r0 = 0.0;            // P(R' = 0)
  double offspring_mean = 0.0;
};

/// Evidence for the single-ray (m = 1) criteria.
struct M1Evidence {
  ExtReal mean_r;
  ExtReal mean_c;
  bool r_bounded = false;
  std::string reason;
};

/// Evidence for a verdict forced by a structural shortcut whose general path
/// was not computed.
struct ShortcutEvidence {
  std::string rule;
};

using Evidence = std::variant<std::monostate, LdpReport, DecayEstimate, BranchingEvidence, M1Evidence, ShortcutEvidence>;

struct SchemeVerdict {
  Scheme scheme = Scheme::Augmented;
  Verdict verdict = Verdict::CriticalIndeterminate;
  /// rate-function, spectral, splitting, branching-process, m1-special or shortcut.
  std::string method;
  /// Shortcut that also decided this scheme ("power-law-strength", "zero-cost-atom").
  std::optional<std::string> shortcut;
  Evidence evidence;
  /// Set when the sub-computation failed; other schemes are still reported.
  std::optional<std::string> error;
  /// The failure was a disagreement between two routes (ConsistencyError).
  bool inconsistent = false;
};

// ---------------------------------------------------------------------------

namespace detail {

// Distribution of floor(R / c) as (value, prob) for finite kinds.
inline std::map<long long, double> floored_pmf(const std::vector<Atom>& atoms, double c) {
  std::map<long long, double> pmf;
  for (const Atom& a : atoms) pmf[static_cast<long long>(std::floor(a.value / c + 1e-9))] += a.prob;
  return pmf;
}

}  // namespace detail

/// Boundary routing with constant edge cost: the informed boundary is a
/// Galton-Watson process with offspring m^R' (R' >= 1), so it survives iff
/// E[m^R'] > 1 + P(R' = 0).
inline SchemeVerdict boundary_branching_check(const ModelConfig& cfg) {
  const auto* cc = std::get_if<dist::Constant>(&cfg.C.kind());
  if (!cc) throw PreconditionFailed("boundary_branching_check: C must be constant");
  if (cc->value <= 0.0) throw PreconditionFailed("boundary_branching_check: constant C must be > 0");
  const double c = cc->value;
  const double m = cfg.m;
  BranchingEvidence ev;
  ev.cost_unit = c;

  std::visit(overloaded{
                 [&](const dist::Poisson& p) {
                   if (c == 1.0) {
                     ev.m_moment = std::exp(p.mean * (m - 1.0));
                     ev.r0 = std::exp(-p.mean);
                     return;
                   }
                   double sum = 0.0, r0 = 0.0, log_pk = -p.mean;
                   int small_terms = 0;
                   for (int k = 0; k < 100000; ++k) {
                     if (k > 0) log_pk += std::log(p.mean) - std::log(static_cast<double>(k));
                     const double fl = std::floor(k / c + 1e-9);
                     if (fl == 0.0) r0 += std::exp(log_pk);
                     const double term = std::exp(log_pk + fl * std::log(m));
                     sum += term;
                     small_terms = (k > p.mean && term < 1e-18 * sum) ? small_terms + 1 : 0;
                     if (small_terms > 20) break;
                   }
                   ev.m_moment = sum;
                   ev.r0 = r0;
                 },
                 [&](const dist::Pareto& p) {
                   ev.m_moment = std::numeric_limits<double>::infinity();
                   ev.r0 = c <= p.xmin ? 0.0 : 1.0 - std::pow(c / p.xmin, -p.shape);
                 },
                 [&](const dist::Zeta&) {
                   ev.m_moment = std::numeric_limits<double>::infinity();
                   for (double k = 1.0; k < c - 1e-9; k += 1.0) ev.r0 += prob_at(cfg.R, k);
                 },
                 [&](const auto&) {
                   for (const auto& [k, pk] : detail::floored_pmf(*finite_atoms(cfg.R), c)) {
                     ev.m_moment += pk * std::pow(m, static_cast<double>(k));
                     if (k == 0) ev.r0 += pk;
                   }
                 },
             },
             cfg.R.kind());
  ev.offspring_mean = ev.m_moment - ev.r0;
  SchemeVerdict sv;
  sv.scheme = Scheme::Boundary;
  sv.method = "branching-process";
  sv.verdict = std::isinf(ev.m_moment) ? Verdict::Survives : verdict_from_margin(ev.m_moment - 1.0 - ev.r0, 1e-12);
  sv.evidence = ev;
  return sv;
}

/// Criteria on a single ray (m = 1).
inline SchemeVerdict m1_verdict(const ModelConfig& cfg, Scheme scheme) {
  if (cfg.m != 1) throw PreconditionFailed("m1_verdict requires m = 1");
  SchemeVerdict sv;
  sv.scheme = scheme;
  sv.method = "m1-special";
  M1Evidence ev;
  ev.mean_r = mean(cfg.R);
  ev.mean_c = mean(cfg.C);
  ev.r_bounded = max_support(cfg.R).is_finite();
  const Reach reach = cfg.reach();
  if (reach == Reach::Always) {
    sv.verdict = Verdict::Survives;
    ev.reason = "R >= C surely";
  } else if (reach == Reach::Never) {
    sv.verdict = Verdict::Dies;
    ev.reason = "R < C surely";
  } else {
    switch (scheme) {
      case Scheme::Augmented:
        if (ev.mean_r.is_inf() && ev.mean_c.is_inf()) {
          sv.verdict = Verdict::CriticalIndeterminate;
          ev.reason = "both means infinite";
        } else if (ev.mean_r > ev.mean_c) {
          sv.verdict = Verdict::Survives;
          ev.reason = "E[R] > E[C]: walk drifts upward";
        } else {
          sv.verdict = Verdict::Dies;
          ev.reason = "E[R] <= E[C]: killed walk hits below 0";
        }
        break;
      case Scheme::Complete:
        if (ev.r_bounded) {
          sv.verdict = Verdict::Dies;
          ev.reason = "bounded R: a long enough run of weak vertices and costly edges kills the signal";
        } else if (ev.mean_c.is_finite() && ev.mean_r <= ev.mean_c) {
          sv.verdict = Verdict::Dies;
          ev.reason = "E[R] <= E[C] < inf: dominated by augmented routing";
        } else {
          sv.verdict = Verdict::CriticalIndeterminate;
          ev.reason = "unbounded R with E[R] > E[C]: open case";
        }
        break;
      case Scheme::Boundary:
        sv.verdict = Verdict::Dies;
        ev.reason = "a boundary vertex weaker than its outgoing edge occurs almost surely";
        break;
    }
  }
  sv.evidence = ev;
  return sv;
}

/// Shift mass eps from the smallest positive atom k to 0.
inline Dist perturb_to_zero(const Dist& r, double eps) {
  const auto atoms = finite_atoms(r);
  if (!atoms) throw PreconditionFailed("perturb_to_zero: R must be finitely supported");
  const Atom* k = nullptr;
  for (const Atom& a : *atoms)
    if (a.value > 0.0 && a.prob > 0.0) {
      k = &a;
      break;
    }
  if (!k) throw PreconditionFailed("perturb_to_zero: R has no mass above 0");
  if (!(eps > 0.0 && eps < k->prob)) throw PreconditionFailed("perturb_to_zero: eps must lie in (0, r_k)");
  std::vector<Atom> out;
  bool has_zero = false;
  for (const Atom& a : *atoms) {
    if (a.value == 0.0) {
      out.push_back({0.0, a.prob + eps});
      has_zero = true;
    } else if (&a == k) {
      out.push_back({a.value, a.prob - eps});
    } else {
      out.push_back(a);
    }
  }
  if (!has_zero) out.push_back({0.0, eps});
  return Dist::finite(std::move(out));
}

// ---------------------------------------------------------------------------
// Per-scheme dispatch

namespace detail {

inline SchemeVerdict from_ldp(const ModelConfig& cfg) {
  SchemeVerdict sv;
  sv.scheme = Scheme::Augmented;
  sv.method = "rate-function";
  LdpReport rep = augmented_verdict(cfg);
  sv.verdict = rep.verdict;
  sv.evidence = std::move(rep);
  return sv;
}

inline SchemeVerdict from_decay(Scheme scheme, DecayEstimate est) {
  SchemeVerdict sv;
  sv.scheme = scheme;
  sv.method = std::string(to_string(est.method));
  sv.verdict = est.verdict;
  sv.evidence = std::move(est);
  return sv;
}

inline bool clash(Verdict a, Verdict b) {
  return (a == Verdict::Survives && b == Verdict::Dies) || (a == Verdict::Dies && b == Verdict::Survives);
}

}  // namespace detail

/// General-path verdict for one scheme, without structural shortcuts.
inline SchemeVerdict scheme_verdict(const ModelConfig& cfg, Scheme scheme, const SplittingOptions& opt = {}) {
  if (cfg.m == 1) return m1_verdict(cfg, scheme);
  switch (scheme) {
    case Scheme::Augmented:
      return detail::from_ldp(cfg);
    case Scheme::Complete:
      return detail::from_decay(scheme, decay_rate(cfg, Chain::W, opt));
    case Scheme::Boundary: {
      const auto* cc = std::get_if<dist::Constant>(&cfg.C.kind());
      if (cc && cc->value > 0.0) {
        SchemeVerdict sv = boundary_branching_check(cfg);
        if (to_lattice(cfg)) {
          const DecayEstimate u = exact_decay(cfg, Chain::U);
          if (detail::clash(sv.verdict, u.verdict))
            throw ConsistencyError("boundary: branching criterion and spectral U-chain rate disagree");
        }
        return sv;
      }
      return detail::from_decay(scheme, decay_rate(cfg, Chain::U, opt));
    }
  }
  throw PreconditionFailed("unknown scheme");
}

/// Verdicts for all three schemes, with the power-law and zero-cost-atom
/// shortcuts applied and cross-checked against the general path whenever
/// that path is exact (no splitting needed). `schemes` restricts the report.
inline std::vector<SchemeVerdict> scheme_report(const ModelConfig& cfg, const SplittingOptions& opt = {},
                                                const std::vector<Scheme>& schemes = {Scheme::Augmented, Scheme::Complete,
                                                                                      Scheme::Boundary}) {
  std::vector<SchemeVerdict> out;
  std::optional<std::string> shortcut;
  if (cfg.m >= 2) {
    if (is_power_law(cfg.R))
      shortcut = "power-law-strength";
    else if (prob_at(cfg.C, 0.0) >= 1.0 / cfg.m)
      shortcut = "zero-cost-atom";
  }
  for (Scheme scheme : schemes) {
    SchemeVerdict sv;
    sv.scheme = scheme;
    try {
      const bool exact_path = cfg.m == 1 || scheme == Scheme::Augmented || to_lattice(cfg).has_value() ||
                              (scheme == Scheme::Boundary && cfg.C.is<dist::Constant>() && min_support(cfg.C) > 0.0);
      if (shortcut && !exact_path) {
        sv.method = "shortcut";
        sv.verdict = Verdict::Survives;
        sv.evidence = ShortcutEvidence{*shortcut};
      } else {
        sv = scheme_verdict(cfg, scheme, opt);
        if (shortcut) {
          if (detail::clash(sv.verdict, Verdict::Survives))
            throw ConsistencyError("shortcut " + *shortcut + " contradicts the " + sv.method + " verdict");
          sv.verdict = Verdict::Survives;
        }
      }
      sv.shortcut = shortcut;
    } catch (const Error& e) {
      sv.inconsistent = dynamic_cast<const ConsistencyError*>(&e) != nullptr;
      sv.verdict = Verdict::CriticalIndeterminate;
      if (sv.method.empty()) sv.method = "error";
      sv.error = e.what();
      sv.evidence = ShortcutEvidence{"error"};
    }
    out.push_back(std::move(sv));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Threshold search

/// One-parameter family of models.
struct Family {
  std::string name;
  std::string param = "theta";
  double lo = 0.0;
  double hi = 1.0;
  std::function<ModelConfig(double)> generator;
};

/// One evaluation made during a threshold search.
struct Probe {
  double theta = 0.0;
  Verdict verdict = Verdict::CriticalIndeterminate;
  std::string method;
  std::optional<double> margin;  // signed distance to criticality for exact methods
  double ci = 0.0;               // rate half-width for stochastic methods
};

struct ThresholdResult {
  double theta = 0.0;
  double uncertainty = 0.0;
  std::string method;
  bool stopped_on_indeterminate = false;
  int evaluations = 0;
  std::vector<Probe> trail;
};

/// Evaluate one scheme at one model, reporting an exact margin where available.
inline Probe probe_scheme(const ModelConfig& cfg, Scheme scheme, const SplittingOptions& opt) {
  Probe p;
  if (cfg.m == 1) {
    const SchemeVerdict sv = m1_verdict(cfg, scheme);
    p.verdict = sv.verdict;
    p.method = sv.method;
    return p;
  }
  const double log_m = cfg.log_m();
  auto from_rate = [&](const DecayEstimate& est) {
    p.method = std::string(to_string(est.method));
    p.verdict = est.verdict;
    p.ci = est.ci_half_width;
    if (est.method == DecayMethod::SpectralExact) p.margin = log_m - est.rate;
  };
  switch (scheme) {
    case Scheme::Augmented: {
      const LdpReport rep = augmented_verdict(cfg);
      p.method = "rate-function";
      p.verdict = rep.verdict;
      if (rep.short_circuit)
        p.margin = std::numeric_limits<double>::infinity();
      else
        p.margin = rep.i_at_zero.is_inf() ? -std::numeric_limits<double>::infinity() : log_m - rep.i_at_zero.value();
      break;
    }
    case Scheme::Complete:
      from_rate(decay_rate(cfg, Chain::W, opt));
      break;
    case Scheme::Boundary:
      if (cfg.C.is<dist::Constant>() && min_support(cfg.C) > 0.0) {
        const SchemeVerdict sv = boundary_branching_check(cfg);
        const auto& ev = std::get<BranchingEvidence>(sv.evidence);
        p.method = sv.method;
        p.verdict = sv.verdict;
        p.margin = ev.m_moment - 1.0 - ev.r0;
      } else {
        from_rate(decay_rate(cfg, Chain::U, opt));
      }
      break;
  }
  return p;
}

namespace detail {

// +1 survives, -1 dies, 0 undecided. Exact margins decide by sign.
inline int side(const Probe& p) {
  if (p.margin) return *p.margin > 0.0 ? 1 : (*p.margin < 0.0 ? -1 : 0);
  if (p.verdict == Verdict::Survives) return 1;
  if (p.verdict == Verdict::Dies) return -1;
  return 0;
}

}  // namespace detail

/// Bisection for the critical parameter of a family. Exact criteria bisect on
/// the sign of their margin; stochastic ones stop refining at the first
/// undecided midpoint. `budget` caps the number of bisection steps.
inline ThresholdResult find_threshold(const Family& family, Scheme scheme, double tol, int budget = 200,
                                      const SplittingOptions& opt = {}) {
  if (!(tol > 0.0)) throw PreconditionFailed("find_threshold: tol must be > 0");
  if (!(family.hi > family.lo)) throw PreconditionFailed("find_threshold: empty range");
  ThresholdResult res;
  auto eval = [&](double theta) {
    Probe p = probe_scheme(family.generator(theta), scheme, opt);
    p.theta = theta;
    res.trail.push_back(p);
    ++res.evaluations;
    return p;
  };
  double lo = family.lo, hi = family.hi;
  const Probe p_lo = eval(lo);
  const Probe p_hi = eval(hi);
  const int s_lo = detail::side(p_lo);
  const int s_hi = detail::side(p_hi);
  if (s_lo == 0 || s_hi == 0 || s_lo == s_hi)
    throw NoSignChange("find_threshold: verdicts at the range endpoints do not differ (" + std::string(to_string(p_lo.verdict)) +
                       ", " + std::string(to_string(p_hi.verdict)) + ")");
  res.method = p_lo.method == p_hi.method ? p_lo.method : p_lo.method + "+" + p_hi.method;
  for (int it = 0; it < budget && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Probe p = eval(mid);
    const int s = detail::side(p);
    if (s == 0) {
      if (p.margin) {
        lo = hi = mid;
      } else {
        res.stopped_on_indeterminate = true;
      }
      break;
    }
    (s == s_lo ? lo : hi) = mid;
  }
  res.theta = 0.5 * (lo + hi);
  res.uncertainty = 0.5 * (hi - lo);
  if (res.stopped_on_indeterminate) res.uncertainty = std::max(res.uncertainty, tol);
  return res;
}

}  // namespace treecast

#endif  // TREECAST_ANALYSIS_HPP
