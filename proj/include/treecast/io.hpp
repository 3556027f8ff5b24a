#ifndef TREECAST_IO_HPP
#define TREECAST_IO_HPP

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "treecast/analysis.hpp"
#include "treecast/chains.hpp"
#include "treecast/distributions.hpp"
#include "treecast/errors.hpp"
#include "treecast/ldp.hpp"
#include "treecast/model.hpp"
#include "treecast/treesim.hpp"

namespace treecast::io {

using json = nlohmann::json;

/// Numbers stay numbers; +inf becomes "inf" (and -inf "-inf").
inline json ext(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}
inline json ext(ExtReal v) { return ext(v.raw()); }

namespace detail {

inline double number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SchemaError(where + ": missing \"" + key + "\"");
  const json& v = j.at(key);
  if (!v.is_number()) throw SchemaError(where + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

}  // namespace detail

inline Dist dist_from_json(const json& j, const std::string& where = "dist") {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  if (!j.contains("kind") || !j.at("kind").is_string()) throw SchemaError(where + ": missing string \"kind\"");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return Dist::constant(detail::number(j, "value", where));
  if (kind == "poisson") return Dist::poisson(detail::number(j, "mean", where));
  if (kind == "pareto") return Dist::pareto(detail::number(j, "shape", where), detail::number(j, "xmin", where));
  if (kind == "zeta") return Dist::zeta(detail::number(j, "tau", where));
  if (kind == "finite") {
    if (!j.contains("atoms") || !j.at("atoms").is_array()) throw SchemaError(where + ": finite needs an \"atoms\" array");
    std::vector<Atom> atoms;
    for (const json& a : j.at("atoms")) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        throw SchemaError(where + ": each atom must be [value, prob]");
      atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    return Dist::finite(std::move(atoms));
  }
  throw SchemaError(where + ": unknown kind \"" + kind + "\"");
}

inline json to_json(const Dist& d) {
  return std::visit(overloaded{
                        [](const dist::Constant& c) { return json{{"kind", "constant"}, {"value", c.value}}; },
                        [](const dist::FiniteLattice& f) {
                          json atoms = json::array();
                          for (const Atom& a : f.atoms) atoms.push_back({a.value, a.prob});
                          return json{{"kind", "finite"}, {"atoms", atoms}};
                        },
                        [](const dist::Poisson& p) { return json{{"kind", "poisson"}, {"mean", p.mean}}; },
                        [](const dist::Pareto& p) { return json{{"kind", "pareto"}, {"shape", p.shape}, {"xmin", p.xmin}}; },
                        [](const dist::Zeta& z) { return json{{"kind", "zeta"}, {"tau", z.tau}}; },
                    },
                    d.kind());
}

inline ModelConfig model_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("config: expected an object");
  if (!j.contains("m") || !j.at("m").is_number_integer()) throw SchemaError("config: \"m\" must be an integer");
  const auto m = j.at("m").get<long long>();
  if (m < 1 || m > 1'000'000) throw SchemaError("config: \"m\" must be >= 1");
  if (!j.contains("R")) throw SchemaError("config: missing \"R\"");
  if (!j.contains("C")) throw SchemaError("config: missing \"C\"");
  return ModelConfig(static_cast<int>(m), dist_from_json(j.at("R"), "R"), dist_from_json(j.at("C"), "C"));
}

inline json to_json(const ModelConfig& cfg) { return json{{"m", cfg.m}, {"R", to_json(cfg.R)}, {"C", to_json(cfg.C)}}; }

inline json to_json(const LdpReport& r) {
  json grid = json::array();
  for (const auto& [lambda, value] : r.lambda_grid) grid.push_back({lambda, ext(value)});
  return json{{"type", "ldp"},
              {"lambda_grid", grid},
              {"I_at_zero", ext(r.i_at_zero)},
              {"lambda_star", ext(r.lambda_star)},
              {"s_star", ext(r.s_star)},
              {"product_min_log", ext(r.product_min_log)},
              {"verdict", to_string(r.verdict)},
              {"product_verdict", to_string(r.product_verdict)},
              {"degenerate", r.degenerate},
              {"short_circuit", r.short_circuit},
              {"converged", r.converged},
              {"critical_extinction", r.critical_extinction}};
}

inline json to_json(const DecayEstimate& e) {
  json j{{"type", "decay"},
         {"chain", to_string(e.chain)},
         {"rate", ext(e.rate)},
         {"ci", e.ci_half_width},
         {"method", to_string(e.method)},
         {"verdict", to_string(e.verdict)}};
  if (e.method == DecayMethod::SpectralExact) {
    j["spectral_radius"] = e.spectral_radius;
    j["states"] = e.states;
    j["lattice_unit"] = e.lattice_unit;
  } else {
    j["n"] = e.n;
    j["particles"] = e.particles;
    j["reps"] = e.reps;
    j["burn_in"] = e.burn_in;
    j["extinct_reps"] = e.extinct_reps;
    json rr = json::array();
    for (double x : e.rep_rates) rr.push_back(ext(x));
    j["rep_rates"] = rr;
  }
  return j;
}

inline json to_json(const Evidence& ev) {
  return std::visit(overloaded{
                        [](const std::monostate&) { return json{{"type", "none"}}; },
                        [](const LdpReport& r) { return to_json(r); },
                        [](const DecayEstimate& e) { return to_json(e); },
                        [](const BranchingEvidence& b) {
                          return json{{"type", "branching"},
                                      {"cost_unit", b.cost_unit},
                                      {"m_moment", ext(b.m_moment)},
                                      {"r0", b.r0},
                                      {"offspring_mean", ext(b.offspring_mean)}};
                        },
                        [](const M1Evidence& m) {
                          return json{{"type", "m1"},
                                      {"mean_r", ext(m.mean_r)},
                                      {"mean_c", ext(m.mean_c)},
                                      {"r_bounded", m.r_bounded},
                                      {"reason", m.reason}};
                        },
                        [](const ShortcutEvidence& s) { return json{{"type", "shortcut"}, {"rule", s.rule}}; },
                    },
                    ev);
}

inline json to_json(const SchemeVerdict& sv) {
  json j{{"scheme", to_string(sv.scheme)}, {"verdict", to_string(sv.verdict)}, {"method", sv.method}, {"evidence", to_json(sv.evidence)}};
  if (sv.shortcut) j["shortcut"] = *sv.shortcut;
  if (sv.error) j["error"] = *sv.error;
  if (sv.inconsistent) j["inconsistent"] = true;
  return j;
}

inline json to_json(const TreeRunReport& r) {
  auto counts = [&](Scheme s) { return json(r.counts(s)); };
  return json{{"depth", r.depth},
              {"seed", r.seed},
              {"frontier_cap", r.frontier_cap},
              {"truncated", r.truncated},
              {"alive_per_level", {{"aug", counts(Scheme::Augmented)}, {"comp", counts(Scheme::Complete)}, {"bond", counts(Scheme::Boundary)}}},
              {"hierarchy_violations", r.hierarchy_violations},
              {"survived",
               {{"aug", r.survived(Scheme::Augmented)}, {"comp", r.survived(Scheme::Complete)}, {"bond", r.survived(Scheme::Boundary)}}}};
}

/// CSV rows "level,aug,comp,bond" (no header).
inline std::string to_csv_rows(const TreeRunReport& r) {
  std::string out;
  for (int l = 0; l <= r.depth; ++l) {
    out += std::to_string(l) + "," + std::to_string(r.counts(Scheme::Augmented)[l]) + "," +
           std::to_string(r.counts(Scheme::Complete)[l]) + "," + std::to_string(r.counts(Scheme::Boundary)[l]) + "\n";
  }
  return out;
}

inline json to_json(const Probe& p) {
  json j{{"theta", p.theta}, {"verdict", to_string(p.verdict)}, {"method", p.method}};
  if (p.margin) j["margin"] = ext(*p.margin);
  if (!p.margin) j["ci"] = p.ci;
  return j;
}

inline json to_json(const ThresholdResult& r) {
  json trail = json::array();
  for (const Probe& p : r.trail) trail.push_back(to_json(p));
  return json{{"theta", r.theta},
              {"uncertainty", r.uncertainty},
              {"method", r.method},
              {"stopped_on_indeterminate", r.stopped_on_indeterminate},
              {"evaluations", r.evaluations},
              {"trail", trail}};
}

}  // namespace treecast::io

#endif  // TREECAST_IO_HPP
