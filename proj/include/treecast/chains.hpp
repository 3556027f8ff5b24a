#ifndef TREECAST_CHAINS_HPP
#define TREECAST_CHAINS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string_view>
#include <thread>
#include <vector>

#include "treecast/distributions.hpp"
#include "treecast/errors.hpp"
#include "treecast/model.hpp"
#include "treecast/random.hpp"

namespace treecast {

/// Alive(value >= 0) or the absorbing cemetery state.
class ChainState {
 public:
  static constexpr ChainState alive(double v) { return ChainState(v); }
  static constexpr ChainState dead() { return ChainState(); }

  constexpr bool is_alive() const { return alive_; }
  constexpr bool is_dead() const { return !alive_; }
  /// Remaining value; only meaningful when alive.
  constexpr double value() const { return v_; }

  friend constexpr bool operator==(const ChainState&, const ChainState&) = default;

 private:
  constexpr ChainState() = default;
  constexpr explicit ChainState(double v) : v_(v), alive_(true) {}
  double v_ = 0.0;
  bool alive_ = false;
};

/// Complete routing: remaining range after passing a vertex of strength r and
/// an edge of cost c.
constexpr ChainState w_step(ChainState s, double r, double c) {
  if (s.is_dead()) return s;
  const double w = s.value();
  if (r > w) return r - c >= 0.0 ? ChainState::alive(r - c) : ChainState::dead();
  return w - c >= 0.0 ? ChainState::alive(w - c) : ChainState::dead();
}

/// Boundary routing: remaining signal strength. r_prev is the strength of the
/// vertex the edge leaves from; it only forwards when the old signal runs out.
constexpr ChainState u_step(ChainState s, double r_prev, double c) {
  if (s.is_dead()) return s;
  if (s.value() - c >= 0.0) return ChainState::alive(s.value() - c);
  if (r_prev - c >= 0.0) return ChainState::alive(r_prev - c);
  return ChainState::dead();
}

enum class Chain { W, U };
enum class DecayMethod { SpectralExact, Splitting, NaiveMC };

inline constexpr std::string_view to_string(Chain c) { return c == Chain::W ? "W" : "U"; }
inline constexpr std::string_view to_string(DecayMethod m) {
  switch (m) {
    case DecayMethod::SpectralExact: return "spectral";
    case DecayMethod::Splitting: return "splitting";
    case DecayMethod::NaiveMC: return "naive-mc";
  }
  return "?";
}

inline ChainState chain_step(Chain chain, ChainState s, double r, double c) {
  return chain == Chain::W ? w_step(s, r, c) : u_step(s, r, c);
}

/// Estimated or exact exponential decay rate of P_0(chain alive at n).
struct DecayEstimate {
  Chain chain = Chain::W;
  DecayMethod method = DecayMethod::SpectralExact;
  double rate = 0.0;  // +inf when the chain dies in finitely many steps surely
  double ci_half_width = 0.0;
  Verdict verdict = Verdict::CriticalIndeterminate;
  // Spectral details.
  double spectral_radius = 0.0;
  std::size_t states = 0;
  double lattice_unit = 0.0;
  // Splitting details.
  int n = 0;
  int particles = 0;
  int reps = 0;
  int burn_in = 0;
  int extinct_reps = 0;
  std::vector<double> rep_rates;
};

/// Rate band used for exact spectral values.
inline constexpr double kSpectralTol = 1e-10;

inline Verdict decay_verdict(double rate, double ci, double log_m, double band = 0.0) {
  if (rate + ci + band < log_m) return Verdict::Survives;
  if (rate - ci - band > log_m) return Verdict::Dies;
  return Verdict::CriticalIndeterminate;
}

// ---------------------------------------------------------------------------
// Finite lattice reduction

/// R and C expressed as integer multiples of a common unit.
struct LatticeModel {
  double unit = 1.0;
  std::vector<std::pair<std::int64_t, double>> r_atoms;  // (units, prob)
  std::vector<std::pair<std::int64_t, double>> c_atoms;
};

inline constexpr std::int64_t kMaxLatticeStates = 4096;

namespace detail {

inline double real_gcd(double a, double b, double tol) {
  if (a < b) std::swap(a, b);
  while (b > tol) {
    double t = std::fmod(a, b);
    if (b - t <= tol) t = 0.0;
    a = b;
    b = t;
  }
  return a;
}

}  // namespace detail

/// Common-lattice form of cfg, or nullopt when R or C is not finitely
/// supported, the values are not commensurable, or the state space would
/// exceed kMaxLatticeStates.
inline std::optional<LatticeModel> to_lattice(const ModelConfig& cfg) {
  const auto ra = finite_atoms(cfg.R);
  const auto ca = finite_atoms(cfg.C);
  if (!ra || !ca) return std::nullopt;
  double vmax = 0.0;
  for (const Atom& a : *ra) vmax = std::max(vmax, a.value);
  for (const Atom& a : *ca) vmax = std::max(vmax, a.value);
  LatticeModel lm;
  if (vmax == 0.0) {
    lm.unit = 1.0;
  } else {
    const double tol = 1e-9 * vmax;
    double g = 0.0;
    for (const auto* list : {&*ra, &*ca})
      for (const Atom& a : *list)
        if (a.value > tol) g = g == 0.0 ? a.value : detail::real_gcd(g, a.value, tol);
    lm.unit = g;
  }
  auto convert = [&](const std::vector<Atom>& atoms, auto& out) {
    for (const Atom& a : atoms) {
      const double q = a.value / lm.unit;
      const double k = std::round(q);
      if (std::abs(q - k) > 1e-7 || k > static_cast<double>(kMaxLatticeStates)) return false;
      out.emplace_back(static_cast<std::int64_t>(k), a.prob);
    }
    return true;
  };
  if (!convert(*ra, lm.r_atoms) || !convert(*ca, lm.c_atoms)) return std::nullopt;
  return lm;
}

/// Dense sub-stochastic transition matrix on the alive states reachable from 0.
struct ChainMatrix {
  std::vector<std::int64_t> states;       // state values in lattice units
  std::vector<std::vector<double>> p;     // p[i][j]
  double unit = 1.0;
};

inline std::optional<std::int64_t> lattice_step(Chain chain, std::int64_t s, std::int64_t r, std::int64_t c) {
  if (chain == Chain::W) {
    const std::int64_t t = std::max(s, r) - c;
    return t >= 0 ? std::optional(t) : std::nullopt;
  }
  if (s - c >= 0) return s - c;
  if (r - c >= 0) return r - c;
  return std::nullopt;
}

/// Throws NotLatticeFinite when cfg has no finite lattice form.
inline ChainMatrix build_chain_matrix(const ModelConfig& cfg, Chain chain) {
  const auto lm = to_lattice(cfg);
  if (!lm) throw NotLatticeFinite("R and C are not finitely supported on a common lattice");
  ChainMatrix cm;
  cm.unit = lm->unit;
  std::vector<std::int64_t> index(static_cast<std::size_t>(kMaxLatticeStates) + 1, -1);
  cm.states.push_back(0);
  index[0] = 0;
  for (std::size_t i = 0; i < cm.states.size(); ++i) {
    const std::int64_t s = cm.states[i];
    std::vector<double> row;
    for (const auto& [r, pr] : lm->r_atoms)
      for (const auto& [c, pc] : lm->c_atoms) {
        const auto t = lattice_step(chain, s, r, c);
        if (!t) continue;
        auto& slot = index[static_cast<std::size_t>(*t)];
        if (slot < 0) {
          slot = static_cast<std::int64_t>(cm.states.size());
          cm.states.push_back(*t);
        }
        const auto j = static_cast<std::size_t>(slot);
        if (row.size() <= j) row.resize(j + 1, 0.0);
        row[j] += pr * pc;
      }
    cm.p.push_back(std::move(row));
  }
  for (auto& row : cm.p) row.resize(cm.states.size(), 0.0);
  return cm;
}

namespace detail {

// Tarjan's strongly connected components on the support graph of p.
inline std::vector<std::vector<std::size_t>> strong_components(const std::vector<std::vector<double>>& p) {
  const std::size_t n = p.size();
  std::vector<int> idx(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> out;
  int counter = 0;
  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    idx[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (std::size_t w = 0; w < n; ++w) {
      if (p[v][w] <= 0.0) continue;
      if (idx[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], idx[w]);
      }
    }
    if (low[v] == idx[v]) {
      std::vector<std::size_t> comp;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      out.push_back(std::move(comp));
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (idx[v] < 0) visit(v);
  return out;
}

// Perron root of an irreducible block via power iteration on (B + I), which is
// primitive, stopped by the Collatz-Wielandt bounds.
inline double irreducible_radius(const std::vector<std::vector<double>>& p, const std::vector<std::size_t>& comp) {
  const std::size_t k = comp.size();
  if (k == 1) return p[comp[0]][comp[0]];
  std::vector<double> x(k, 1.0), y(k);
  double lo = 0.0, hi = 0.0;
  for (int it = 0; it < 1'000'000; ++it) {
    lo = std::numeric_limits<double>::infinity();
    hi = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      double acc = x[a];
      for (std::size_t b = 0; b < k; ++b) acc += p[comp[a]][comp[b]] * x[b];
      y[a] = acc;
      const double ratio = acc / x[a];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    const double norm = *std::max_element(y.begin(), y.end());
    for (std::size_t a = 0; a < k; ++a) x[a] = y[a] / norm;
    if (hi - lo <= 1e-14 * hi) break;
  }
  return 0.5 * (lo + hi) - 1.0;
}

}  // namespace detail

/// Spectral radius of a nonnegative matrix: the largest Perron root over its
/// irreducible diagonal blocks.
inline double spectral_radius(const std::vector<std::vector<double>>& p) {
  double rho = 0.0;
  for (const auto& comp : detail::strong_components(p)) rho = std::max(rho, detail::irreducible_radius(p, comp));
  return std::max(rho, 0.0);
}

/// Exact decay rate -log rho(P) of the alive probability.
inline DecayEstimate exact_decay(const ModelConfig& cfg, Chain chain) {
  const ChainMatrix cm = build_chain_matrix(cfg, chain);
  DecayEstimate est;
  est.chain = chain;
  est.method = DecayMethod::SpectralExact;
  est.spectral_radius = spectral_radius(cm.p);
  est.states = cm.states.size();
  est.lattice_unit = cm.unit;
  est.rate = est.spectral_radius > 0.0 ? -std::log(est.spectral_radius) : std::numeric_limits<double>::infinity();
  if (est.rate < 0.0 && est.rate > -1e-13) est.rate = 0.0;
  est.verdict = decay_verdict(est.rate, 0.0, cfg.log_m(), kSpectralTol);
  return est;
}

/// P_0(chain alive after n steps) by repeated vector-matrix products.
inline double survival_prob_exact(const ModelConfig& cfg, Chain chain, int n) {
  if (n < 0) throw PreconditionFailed("survival_prob_exact: n must be >= 0");
  const ChainMatrix cm = build_chain_matrix(cfg, chain);
  const std::size_t k = cm.states.size();
  std::vector<double> v(k, 0.0), next(k);
  v[0] = 1.0;
  for (int step = 0; step < n; ++step) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      if (v[i] == 0.0) continue;
      for (std::size_t j = 0; j < k; ++j) next[j] += v[i] * cm.p[i][j];
    }
    v.swap(next);
  }
  double total = 0.0;
  for (double x : v) total += x;
  return total;
}

// ---------------------------------------------------------------------------
// Particle splitting

struct SplittingOptions {
  int n = 200;
  int particles = 10'000;
  int reps = 20;
  std::uint64_t seed = 0;
  int threads = 1;
};

namespace detail {

struct RepOutcome {
  double rate = 0.0;
  int extinct_step = 0;  // 0 when the population survived all n steps
};

inline RepOutcome splitting_rep(const ModelConfig& cfg, Chain chain, const SplittingOptions& opt, int burn_in, int rep) {
  const auto n_part = static_cast<std::size_t>(opt.particles);
  std::vector<ChainState> pop(n_part, ChainState::alive(0.0));
  std::vector<ChainState> next;
  next.reserve(n_part);
  double log_sum = 0.0;
  const int measured = opt.n - burn_in;
  for (int step = 1; step <= opt.n; ++step) {
    CounterRng rng(derive_key(opt.seed, {static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(step)}));
    next.clear();
    for (const ChainState& s : pop) {
      const double r = sample_with(cfg.R, rng);
      const double c = sample_with(cfg.C, rng);
      const ChainState t = chain_step(chain, s, r, c);
      if (t.is_alive()) next.push_back(t);
    }
    if (next.empty()) {
      // Treat the terminal step as one survivor out of the population and the
      // unobserved remainder as free: a lower bound on this repetition's rate.
      if (step > burn_in) log_sum -= std::log(static_cast<double>(n_part));
      return {-log_sum / measured, step};
    }
    if (step > burn_in) log_sum += std::log(static_cast<double>(next.size()) / static_cast<double>(n_part));
    // Multinomial resampling back to full size.
    for (std::size_t j = 0; j < n_part; ++j) pop[j] = next[rng.below(next.size())];
  }
  return {-log_sum / measured, 0};
}

}  // namespace detail

/// Fixed-population splitting estimate of the decay rate.
///
/// Each repetition keeps `particles` copies of the chain started at 0,
/// advances all of them with fresh (R, C) draws, records the surviving
/// fraction and resamples the survivors with replacement. The first n/4
/// steps are a burn-in toward the quasi-stationary law and are not counted;
/// the rate is -(1/(n - burn_in)) sum log(fraction). The half-width is three
/// standard errors over repetitions.
inline DecayEstimate splitting_decay(const ModelConfig& cfg, Chain chain, const SplittingOptions& opt) {
  if (opt.n < 50) throw PreconditionFailed("splitting_decay: n must be >= 50");
  if (opt.particles < 1000) throw PreconditionFailed("splitting_decay: particles must be >= 1000");
  if (opt.reps < 10) throw PreconditionFailed("splitting_decay: reps must be >= 10");
  const int burn_in = opt.n / 4;
  std::vector<detail::RepOutcome> out(static_cast<std::size_t>(opt.reps));
  const int threads = std::clamp(opt.threads, 1, opt.reps);
  if (threads == 1) {
    for (int r = 0; r < opt.reps; ++r) out[r] = detail::splitting_rep(cfg, chain, opt, burn_in, r);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int r = t; r < opt.reps; r += threads) out[r] = detail::splitting_rep(cfg, chain, opt, burn_in, r);
      });
  }

  const bool all_early = std::all_of(out.begin(), out.end(), [](const auto& o) { return o.extinct_step > 0 && o.extinct_step < 10; });
  if (all_early)
    throw DegenerateExtinction("splitting_decay: every repetition died before step 10; increase particles or use a smaller n");

  DecayEstimate est;
  est.chain = chain;
  est.method = DecayMethod::Splitting;
  est.n = opt.n;
  est.particles = opt.particles;
  est.reps = opt.reps;
  est.burn_in = burn_in;
  double sum = 0.0;
  for (const auto& o : out) {
    est.rep_rates.push_back(o.rate);
    sum += o.rate;
    if (o.extinct_step > 0) ++est.extinct_reps;
  }
  const double mu = sum / opt.reps;
  double ss = 0.0;
  for (double x : est.rep_rates) ss += (x - mu) * (x - mu);
  const double sd = std::sqrt(ss / (opt.reps - 1));
  est.rate = mu;
  est.ci_half_width = 3.0 * sd / std::sqrt(static_cast<double>(opt.reps));
  const double log_m = cfg.log_m();
  if (est.extinct_reps > 0)
    est.verdict = mu - est.ci_half_width > log_m ? Verdict::Dies : Verdict::CriticalIndeterminate;
  else
    est.verdict = decay_verdict(est.rate, est.ci_half_width, log_m);
  return est;
}

/// Spectral value when the model is lattice-finite, splitting otherwise.
inline DecayEstimate decay_rate(const ModelConfig& cfg, Chain chain, const SplittingOptions& opt) {
  if (to_lattice(cfg)) return exact_decay(cfg, chain);
  return splitting_decay(cfg, chain, opt);
}

}  // namespace treecast

#endif  // TREECAST_CHAINS_HPP
