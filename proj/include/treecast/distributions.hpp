#ifndef TREECAST_DISTRIBUTIONS_HPP
#define TREECAST_DISTRIBUTIONS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "treecast/errors.hpp"
#include "treecast/ext_real.hpp"
#include "treecast/random.hpp"

namespace treecast {

/// One support point of a finitely supported law.
struct Atom {
  double value;
  double prob;

  friend bool operator==(const Atom&, const Atom&) = default;
};

namespace dist {

struct Constant {
  double value;
};

/// Finitely many nonnegative atoms, sorted by value. The cumulative table is
/// kept alongside for sampling.
struct FiniteLattice {
  std::vector<Atom> atoms;
  std::vector<double> cdf;
};

struct Poisson {
  double mean;
};

/// Continuous power law: P(X > x) = (x / xmin)^(-shape) for x >= xmin.
struct Pareto {
  double shape;
  double xmin;
};

/// Discrete power law on {1, 2, ...}: P(X = k) = k^(-tau) / zeta(tau).
struct Zeta {
  double tau;
};

}  // namespace dist

/// Law of a vertex strength R or an edge cost C. All laws live on [0, inf).
class Dist {
 public:
  using Kind = std::variant<dist::Constant, dist::FiniteLattice, dist::Poisson, dist::Pareto, dist::Zeta>;

  static Dist constant(double value) {
    if (!(value >= 0.0) || !std::isfinite(value)) throw SchemaError("constant: value must be finite and >= 0");
    return Dist(dist::Constant{value});
  }

  /// Atoms with zero probability are dropped. Probabilities must sum to 1
  /// within 1e-12 and values must be distinct.
  static Dist finite(std::vector<Atom> atoms) {
    std::erase_if(atoms, [](const Atom& a) { return a.prob == 0.0; });
    if (atoms.empty()) throw SchemaError("finite: no atom with positive probability");
    double total = 0.0;
    for (const Atom& a : atoms) {
      if (!(a.value >= 0.0) || !std::isfinite(a.value)) throw SchemaError("finite: atom values must be finite and >= 0");
      if (!(a.prob > 0.0 && a.prob <= 1.0)) throw SchemaError("finite: atom probabilities must lie in [0, 1]");
      total += a.prob;
    }
    if (std::abs(total - 1.0) > 1e-12) throw SchemaError("finite: probabilities sum to " + std::to_string(total));
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
    for (std::size_t i = 1; i < atoms.size(); ++i)
      if (atoms[i].value == atoms[i - 1].value) throw SchemaError("finite: duplicate atom value");
    if (atoms.size() == 1) return Dist(dist::Constant{atoms.front().value});
    std::vector<double> cdf(atoms.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) cdf[i] = (acc += atoms[i].prob);
    cdf.back() = 1.0;
    return Dist(dist::FiniteLattice{std::move(atoms), std::move(cdf)});
  }

  /// Convenience: mass 1 - p at lo and p at hi.
  static Dist two_point(double lo, double hi, double p_hi) {
    return finite({{lo, 1.0 - p_hi}, {hi, p_hi}});
  }

  static Dist poisson(double mean) {
    if (!(mean > 0.0) || !std::isfinite(mean)) throw SchemaError("poisson: mean must be finite and > 0");
    return Dist(dist::Poisson{mean});
  }

  static Dist pareto(double shape, double xmin) {
    if (!(shape > 0.0) || !std::isfinite(shape)) throw SchemaError("pareto: shape must be > 0");
    if (!(xmin > 0.0) || !std::isfinite(xmin)) throw SchemaError("pareto: xmin must be > 0");
    return Dist(dist::Pareto{shape, xmin});
  }

  static Dist zeta(double tau) {
    if (!(tau > 1.0) || !std::isfinite(tau)) throw SchemaError("zeta: tau must be > 1");
    return Dist(dist::Zeta{tau});
  }

  const Kind& kind() const { return kind_; }

  template <class K>
  bool is() const {
    return std::holds_alternative<K>(kind_);
  }

  std::string_view kind_name() const {
    return std::visit(
        [](const auto& k) -> std::string_view {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, dist::Constant>) return "constant";
          else if constexpr (std::is_same_v<K, dist::FiniteLattice>) return "finite";
          else if constexpr (std::is_same_v<K, dist::Poisson>) return "poisson";
          else if constexpr (std::is_same_v<K, dist::Pareto>) return "pareto";
          else return "zeta";
        },
        kind_);
  }

 private:
  explicit Dist(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

namespace detail {

inline double sample_poisson_small(double mean, CounterRng& rng) {
  // Sequential inversion; fine for mean <= 30.
  double p = std::exp(-mean);
  double cdf = p;
  const double u = rng.uniform();
  double k = 0.0;
  while (u > cdf && p > 0.0) {
    k += 1.0;
    p *= mean / k;
    cdf += p;
  }
  return k;
}

inline double sample_poisson(double mean, CounterRng& rng) {
  constexpr double kChunk = 30.0;
  double total = 0.0;
  while (mean > kChunk) {
    total += sample_poisson_small(kChunk, rng);
    mean -= kChunk;
  }
  return total + sample_poisson_small(mean, rng);
}

// Devroye, Non-Uniform Random Variate Generation, X.6.1.
inline double sample_zeta(double tau, CounterRng& rng) {
  const double a1 = tau - 1.0;
  const double b = std::pow(2.0, a1);
  for (;;) {
    const double u = rng.uniform_pos();
    const double v = rng.uniform();
    const double x = std::floor(std::pow(u, -1.0 / a1));
    if (!std::isfinite(x) || x < 1.0) continue;
    const double t = std::pow(1.0 + 1.0 / x, a1);
    if (v * x * (t - 1.0) / (b - 1.0) <= t / b) return x;
  }
}

// log of alpha * int_1^inf exp(-z (t - 1)) t^(-alpha - 1) dt, z >= 0.
inline double log_pareto_mgf_core(double alpha, double z) {
  boost::math::quadrature::exp_sinh<double> integrator;
  auto f = [&](double t) {
    const double s = t + 1.0;
    return std::exp(-z * t - (alpha + 1.0) * std::log(s));
  };
  const double val = integrator.integrate(f, 1e-13);
  return std::log(alpha * val);
}

// log sum_{k>=1} k^(-tau) exp(lambda (k - 1)) for lambda < 0.
inline double log_zeta_mgf_core(double tau, double lambda) {
  auto term = [&](double k) { return std::exp(-tau * std::log(k) + lambda * (k - 1.0)); };
  constexpr int kDirect = 4000;
  double sum = 0.0;
  int k = 1;
  for (; k < kDirect; ++k) {
    const double t = term(k);
    sum += t;
    if (t < 1e-18 * sum) return std::log(sum);
  }
  // Euler-Maclaurin tail from N = kDirect.
  const double n = kDirect;
  boost::math::quadrature::exp_sinh<double> integrator;
  const double integral = integrator.integrate([&](double t) { return term(n + t); }, 1e-13);
  const double fn = term(n);
  const double dfn = fn * (-tau / n + lambda);
  sum += integral + 0.5 * fn - dfn / 12.0;
  return std::log(sum);
}

}  // namespace detail

/// One draw using the given uniform source.
inline double sample_with(const Dist& d, CounterRng& rng) {
  return std::visit(
      overloaded{
          [](const dist::Constant& c) { return c.value; },
          [&](const dist::FiniteLattice& f) {
            const double u = rng.uniform();
            for (std::size_t i = 0; i + 1 < f.cdf.size(); ++i)
              if (u < f.cdf[i]) return f.atoms[i].value;
            return f.atoms.back().value;
          },
          [&](const dist::Poisson& p) { return detail::sample_poisson(p.mean, rng); },
          [&](const dist::Pareto& p) { return p.xmin * std::pow(rng.uniform_pos(), -1.0 / p.shape); },
          [&](const dist::Zeta& z) { return detail::sample_zeta(z.tau, rng); },
      },
      d.kind());
}

/// Next draw from the stream; value is a function of (stream key, draw index).
inline double sample(const Dist& d, RandomStream& stream) {
  CounterRng rng = stream.next_draw();
  return sample_with(d, rng);
}

/// Exact expectation, +inf for heavy tails without a first moment.
inline ExtReal mean(const Dist& d) {
  return std::visit(overloaded{
                        [](const dist::Constant& c) { return ExtReal(c.value); },
                        [](const dist::FiniteLattice& f) {
                          double m = 0.0;
                          for (const Atom& a : f.atoms) m += a.value * a.prob;
                          return ExtReal(m);
                        },
                        [](const dist::Poisson& p) { return ExtReal(p.mean); },
                        [](const dist::Pareto& p) {
                          if (p.shape <= 1.0) return ExtReal::inf();
                          return ExtReal(p.shape * p.xmin / (p.shape - 1.0));
                        },
                        [](const dist::Zeta& z) {
                          if (z.tau <= 2.0) return ExtReal::inf();
                          return ExtReal(std::riemann_zeta(z.tau - 1.0) / std::riemann_zeta(z.tau));
                        },
                    },
                    d.kind());
}

/// log E[exp(lambda X)], +inf where the expectation diverges.
inline ExtReal log_mgf(const Dist& d, double lambda) {
  if (lambda == 0.0) return 0.0;
  return std::visit(
      overloaded{
          [&](const dist::Constant& c) { return ExtReal(lambda * c.value); },
          [&](const dist::FiniteLattice& f) {
            double shift = -std::numeric_limits<double>::infinity();
            for (const Atom& a : f.atoms) shift = std::max(shift, lambda * a.value);
            double s = 0.0;
            for (const Atom& a : f.atoms) s += a.prob * std::exp(lambda * a.value - shift);
            return ExtReal(shift + std::log(s));
          },
          [&](const dist::Poisson& p) {
            const double v = p.mean * std::expm1(lambda);
            return std::isfinite(v) ? ExtReal(v) : ExtReal::inf();
          },
          [&](const dist::Pareto& p) {
            if (lambda > 0.0) return ExtReal::inf();
            const double z = -lambda * p.xmin;
            return ExtReal(lambda * p.xmin + detail::log_pareto_mgf_core(p.shape, z));
          },
          [&](const dist::Zeta& z) {
            if (lambda > 0.0) return ExtReal::inf();
            return ExtReal(lambda + detail::log_zeta_mgf_core(z.tau, lambda) - std::log(std::riemann_zeta(z.tau)));
          },
      },
      d.kind());
}

inline double min_support(const Dist& d) {
  return std::visit(overloaded{
                        [](const dist::Constant& c) { return c.value; },
                        [](const dist::FiniteLattice& f) { return f.atoms.front().value; },
                        [](const dist::Poisson&) { return 0.0; },
                        [](const dist::Pareto& p) { return p.xmin; },
                        [](const dist::Zeta&) { return 1.0; },
                    },
                    d.kind());
}

inline ExtReal max_support(const Dist& d) {
  return std::visit(overloaded{
                        [](const dist::Constant& c) { return ExtReal(c.value); },
                        [](const dist::FiniteLattice& f) { return ExtReal(f.atoms.back().value); },
                        [](const auto&) { return ExtReal::inf(); },
                    },
                    d.kind());
}

/// P(X = x).
inline double prob_at(const Dist& d, double x) {
  return std::visit(overloaded{
                        [&](const dist::Constant& c) { return c.value == x ? 1.0 : 0.0; },
                        [&](const dist::FiniteLattice& f) {
                          for (const Atom& a : f.atoms)
                            if (a.value == x) return a.prob;
                          return 0.0;
                        },
                        [&](const dist::Poisson& p) {
                          if (x < 0.0 || x != std::floor(x)) return 0.0;
                          return std::exp(x * std::log(p.mean) - p.mean - std::lgamma(x + 1.0));
                        },
                        [](const dist::Pareto&) { return 0.0; },
                        [&](const dist::Zeta& z) {
                          if (x < 1.0 || x != std::floor(x)) return 0.0;
                          return std::pow(x, -z.tau) / std::riemann_zeta(z.tau);
                        },
                    },
                    d.kind());
}

/// Regularly varying tail (the power-law kinds).
inline bool is_power_law(const Dist& d) { return d.is<dist::Pareto>() || d.is<dist::Zeta>(); }

/// Atom list for Constant and FiniteLattice, nullopt otherwise.
inline std::optional<std::vector<Atom>> finite_atoms(const Dist& d) {
  if (const auto* c = std::get_if<dist::Constant>(&d.kind())) return std::vector<Atom>{{c->value, 1.0}};
  if (const auto* f = std::get_if<dist::FiniteLattice>(&d.kind())) return f->atoms;
  return std::nullopt;
}

}  // namespace treecast

#endif  // TREECAST_DISTRIBUTIONS_HPP
