// Acceptance suite: one PASS/FAIL line per criterion. A criterion passes only
// if its check holds and it finishes inside its time limit. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "treecast/treecast.hpp"

using namespace treecast;

namespace {

// Tolerances and limits, pinned.
constexpr double kTolAugmentedClosedForm = 1e-6;   // 1
constexpr double kCriticalBand = 1e-6;             // 2
constexpr double kPoissonAugTarget = 0.23;         // 3
constexpr double kPoissonAugTol = 0.005;           // 3
constexpr double kTolSpectralRate = 1e-10;         // 4
constexpr double kTolCompleteThreshold = 1e-6;     // 4
constexpr int kCoverageNeeded = 18;                // 5, out of 20
constexpr double kTolBoundaryThreshold = 1e-6;     // 6
constexpr double kSpeedTol = 0.15;                 // 9
constexpr int kDominanceNeeded = 4;                // 9, out of 5
constexpr double kKsCoefficient = 1.36;            // 9: two-sample KS, alpha = 0.05

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ModelConfig two_point(double r2, int m = 2) { return ModelConfig(m, Dist::two_point(0, 2, r2), Dist::constant(1)); }

Family two_point_family(int m) {
  return Family{"two-point", "r2", 1e-9, 1.0 - 1e-9, [m](double t) { return two_point(t, m); }};
}

Family poisson_family() {
  return Family{"poisson", "mean", 0.01, 3.0, [](double t) { return ModelConfig(2, Dist::poisson(t), Dist::constant(1)); }};
}

Dist random_lattice_law(CounterRng& rng, double unit, int max_k, bool allow_zero) {
  const int n = 1 + static_cast<int>(rng.below(3));
  std::vector<Atom> atoms;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int k = static_cast<int>(rng.below(max_k + 1)) + (allow_zero ? 0 : 1);
    bool dup = false;
    for (const Atom& a : atoms) dup |= a.value == k * unit;
    if (dup) continue;
    const double w = 0.1 + rng.uniform();
    atoms.push_back({k * unit, w});
    total += w;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    atoms[i].prob = i + 1 < atoms.size() ? atoms[i].prob / total : 1.0 - acc;
    acc += atoms[i].prob;
  }
  return Dist::finite(atoms);
}

ModelConfig random_lattice_config(CounterRng& rng, int max_m = 3, double unit = 0.0) {
  if (unit == 0.0) unit = rng.below(2) ? 1.0 : 0.5;
  return ModelConfig(2 + static_cast<int>(rng.below(max_m - 1)), random_lattice_law(rng, unit, 4, true), random_lattice_law(rng, unit, 2, false));
}

// ---------------------------------------------------------------------------

Outcome augmented_thresholds() {
  double worst = 0.0;
  std::string seen;
  for (int m : {2, 3, 4}) {
    const double expected = 0.5 * (1 - std::sqrt(1 - 1.0 / (m * m)));
    const double got = find_threshold(two_point_family(m), Scheme::Augmented, 1e-10).theta;
    worst = std::max(worst, std::abs(got - expected));
    seen += fmt("m=%d %.9f ", m, got);
  }
  return {worst <= kTolAugmentedClosedForm, seen + fmt("max err %.2e", worst)};
}

Outcome poisson_grid() {
  int agree = 0, compared = 0, skipped = 0;
  for (int i = 1; i <= 20; ++i)
    for (int j = 1; j <= 20; ++j) {
      const double mr = 0.2 * i, mc = 0.2 * j;
      const double margin = std::sqrt(std::log(2.0)) - (std::sqrt(mc) - std::sqrt(mr));
      if (std::abs(margin) <= kCriticalBand) {
        ++skipped;
        continue;
      }
      const Verdict v = augmented_verdict(ModelConfig(2, Dist::poisson(mr), Dist::poisson(mc))).verdict;
      agree += v == (margin > 0 ? Verdict::Survives : Verdict::Dies);
      ++compared;
    }
  return {agree == compared, fmt("%d/%d agree, %d in band", agree, compared, skipped)};
}

Outcome poisson_augmented() {
  const double got = find_threshold(poisson_family(), Scheme::Augmented, defaults::kTol).theta;
  return {std::abs(got - kPoissonAugTarget) <= kPoissonAugTol, fmt("theta %.6f", got)};
}

Outcome complete_spectral() {
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double r = (i + 0.5) / 50.0;
    const double expected = -std::log(0.5 * (r + std::sqrt(4 * r - 3 * r * r)));
    worst = std::max(worst, std::abs(exact_decay(two_point(r), Chain::W).rate - expected));
  }
  const double m = 2;
  const double expected = 0.5 * (1 + 1 / m - std::sqrt(1 + 2 / m - 3 / (m * m)));
  const double got = find_threshold(two_point_family(2), Scheme::Complete, 1e-10).theta;
  const double err = std::abs(got - expected);
  return {worst <= kTolSpectralRate && err <= kTolCompleteThreshold,
          fmt("rate max err %.2e over 50 r; threshold %.9f (closed form %.9f)", worst, got, expected)};
}

Outcome splitting_coverage() {
  CounterRng rng(derive_key(2024, {}));
  int trials = 0, covered = 0, skipped = 0;
  while (trials < 20) {
    const ModelConfig cfg = random_lattice_config(rng);
    const Chain ch = rng.below(2) ? Chain::W : Chain::U;
    const DecayEstimate exact = exact_decay(cfg, ch);
    // A rate above 3 empties a population of 10^4 within a few steps.
    if (!(exact.rate < 3.0)) {
      ++skipped;
      continue;
    }
    const DecayEstimate est = splitting_decay(cfg, ch, {.n = 200, .particles = 10'000, .reps = 20, .seed = static_cast<std::uint64_t>(trials)});
    ++trials;
    covered += std::abs(est.rate - exact.rate) <= est.ci_half_width;
  }
  return {covered >= kCoverageNeeded, fmt("%d/20 covered (%d draws with rate >= 3 skipped)", covered, skipped)};
}

Outcome boundary_thresholds() {
  const SchemeVerdict at = boundary_branching_check(two_point(0.25));
  const auto& ev = std::get<BranchingEvidence>(at.evidence);
  const bool critical = at.verdict == Verdict::CriticalIndeterminate && ev.offspring_mean == 1.0;
  const double tp = find_threshold(two_point_family(2), Scheme::Boundary, 1e-10).theta;
  const bool a = critical && std::abs(tp - 0.25) <= kTolBoundaryThreshold;
  const double expected = std::log(1 + std::sqrt(2.0));
  const double got = find_threshold(poisson_family(), Scheme::Boundary, 1e-10).theta;
  const bool b = std::abs(got - expected) <= kTolBoundaryThreshold;
  return {a && b, fmt("(a) %s: 0.25 critical=%d, bisection %.9f; (b) %s: poisson %.9f vs %.9f", a ? "ok" : "FAIL", critical, tp,
                      b ? "ok" : "FAIL", got, expected)};
}

Outcome hierarchy() {
  CounterRng rng(derive_key(7, {}));
  std::uint64_t violations = 0;
  int runs = 0;
  for (int c = 0; c < 50; ++c) {
    const ModelConfig cfg = random_lattice_config(rng);
    for (int s = 0; s < 20; ++s, ++runs)
      violations += run_coupled(cfg, 20, derive_key(c, {static_cast<std::uint64_t>(s)}), 4096).hierarchy_violations;
  }
  return {violations == 0, fmt("%d runs, %llu violations", runs, static_cast<unsigned long long>(violations))};
}

Outcome boundary_oracle() {
  CounterRng rng(derive_key(8, {}));
  int equal = 0;
  for (int t = 0; t < 100; ++t) {
    const int depth = 1 + static_cast<int>(rng.below(8));
    const ModelConfig cfg = random_lattice_config(rng, 3, 1.0);
    std::vector<VertexId> recursion;
    run_coupled(cfg, depth, t, 1 << 30, [&](const VertexId& id, const VertexState& s) {
      if (s.u_bond.is_alive()) recursion.push_back(id);
    });
    std::sort(recursion.begin(), recursion.end());
    equal += run_boundary_literal(cfg, depth, t) == recursion;
  }
  return {equal == 100, fmt("%d/100 identical", equal)};
}

// Largest gap F_late(x) - F_early(x) between empirical CDFs; positive means
// the later sample is stochastically smaller somewhere.
double dominance_gap(std::vector<double> early, std::vector<double> late) {
  std::sort(early.begin(), early.end());
  std::sort(late.begin(), late.end());
  double gap = 0.0;
  std::vector<double> xs = early;
  xs.insert(xs.end(), late.begin(), late.end());
  for (double x : xs) {
    const double fe = static_cast<double>(std::upper_bound(early.begin(), early.end(), x) - early.begin()) / early.size();
    const double fl = static_cast<double>(std::upper_bound(late.begin(), late.end(), x) - late.begin()) / late.size();
    gap = std::max(gap, fl - fe);
  }
  return gap;
}

Outcome brw_speed() {
  constexpr int kReps = 200;
  int within = 0, dominated = 0;
  std::string seen;
  const double ks = kKsCoefficient * std::sqrt(2.0 / kReps);
  for (double r : {0.3, 0.4, 0.5, 0.6, 0.7}) {
    const ModelConfig cfg = two_point(r);
    const std::vector<double> d10 = brw_speed_samples(cfg, 10, kReps, 100, 4096);
    const std::vector<double> d25 = brw_speed_samples(cfg, 25, kReps, 200, 4096);
    double mean = 0.0;
    for (double x : d25) mean += x / kReps;
    const double target = s_star(cfg).value();
    within += std::abs(mean - target) <= kSpeedTol;
    dominated += dominance_gap(d10, d25) <= ks;
    seen += fmt("r=%.1f %.3f/%.3f ", r, mean, target);
  }
  return {within == 5 && dominated >= kDominanceNeeded,
          fmt("%d/5 within %.2f of s*, %d/5 depth 25 >=st depth 10; ", within, kSpeedTol, dominated) + seen};
}

Outcome separation() {
  const auto a = scheme_report(two_point(0.12));
  const bool first = a[0].verdict == Verdict::Survives && a[1].verdict == Verdict::Dies && a[2].verdict == Verdict::Dies;
  const ModelConfig atom(2, Dist::constant(1), Dist::two_point(0, 2, 0.75));
  const auto b = scheme_report(atom, {}, {Scheme::Augmented, Scheme::Complete});
  const bool second = b[0].verdict == Verdict::Survives && b[1].verdict == Verdict::Dies;
  return {first && second, fmt("r2=0.12: %s/%s/%s; p0=0.25: %s/%s", std::string(to_string(a[0].verdict)).c_str(),
                               std::string(to_string(a[1].verdict)).c_str(), std::string(to_string(a[2].verdict)).c_str(),
                               std::string(to_string(b[0].verdict)).c_str(), std::string(to_string(b[1].verdict)).c_str())};
}

Outcome perturbation() {
  const Dist base = Dist::two_point(0, 2, 0.52);
  if (boundary_branching_check(ModelConfig(2, base, Dist::constant(1))).verdict != Verdict::Survives)
    return {false, "base config does not survive boundary routing"};
  int found = 0;
  double first = 0.0;
  for (int k = 1; k < 1000; ++k) {
    const double eps = 0.52 * k / 1000.0;
    const ModelConfig cfg(2, perturb_to_zero(base, eps), Dist::constant(1));
    if (boundary_branching_check(cfg).verdict == Verdict::Dies && augmented_verdict(cfg).verdict == Verdict::Survives) {
      if (found++ == 0) first = eps;
    }
  }
  return {found > 0, fmt("%d of 999 eps qualify; smallest %.5f", found, first)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "augmented thresholds, closed-form family", 1, augmented_thresholds},
      {2, "poisson-poisson augmented criterion grid", 10, poisson_grid},
      {3, "poisson-strength augmented threshold", 5, poisson_augmented},
      {4, "complete-routing spectral rate and threshold", 2, complete_spectral},
      {5, "splitting covers spectral rate", 300, splitting_coverage},
      {6, "boundary thresholds", 1, boundary_thresholds},
      {7, "hierarchy across coupled runs", 120, hierarchy},
      {8, "literal boundary routing equals U-recursion", 60, boundary_oracle},
      {9, "BRW speed", 120, brw_speed},
      {10, "scheme separation", 5, separation},
      {11, "perturbation toward zero strength", 5, perturbation},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %2d %s: %s [%.2fs / %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs, c.limit_s,
                in_time ? "" : " TIME");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
