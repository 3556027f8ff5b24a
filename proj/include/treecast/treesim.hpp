#ifndef TREECAST_TREESIM_HPP
#define TREECAST_TREESIM_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "treecast/chains.hpp"
#include "treecast/distributions.hpp"
#include "treecast/errors.hpp"
#include "treecast/model.hpp"
#include "treecast/random.hpp"

namespace treecast {

// Tie conventions, used consistently across this header:
//  * a vertex y is in range of x when the path cost from x to y is <= R_x;
//  * the augmented signal V dies strictly below 0 (V >= 0 survives);
//  * the W and U chains are alive at value >= 0.

/// Vertex of the m-ary tree: level and left-to-right position within it.
struct VertexId {
  int level = 0;
  std::uint64_t position = 0;
  friend auto operator<=>(const VertexId&, const VertexId&) = default;
};

// Per-vertex weights are derived from the vertex's path key, so pruning or
// subsampling never changes the weights seen by any other vertex.
namespace tree_keys {

inline constexpr std::uint64_t kStrengthTag = 0x5254;  // "RT"
inline constexpr std::uint64_t kCostTag = 0x4354;      // "CT"

inline std::uint64_t root(std::uint64_t seed) { return derive_key(seed, {0x726f6f74}); }
inline std::uint64_t child(std::uint64_t parent, int i) {
  return detail::mix64(parent ^ detail::mix64(static_cast<std::uint64_t>(i) + 1 + detail::kGolden));
}
inline double strength(const ModelConfig& cfg, std::uint64_t seed, std::uint64_t key) {
  CounterRng rng(derive_key(seed, {key, kStrengthTag}));
  return sample_with(cfg.R, rng);
}
/// Cost of the edge leading into the vertex with this key.
inline double cost(const ModelConfig& cfg, std::uint64_t seed, std::uint64_t key) {
  CounterRng rng(derive_key(seed, {key, kCostTag}));
  return sample_with(cfg.C, rng);
}

}  // namespace tree_keys

/// The three coupled scheme states carried by one vertex.
struct VertexState {
  bool aug_alive = true;
  double v_aug = 0.0;
  ChainState w_comp = ChainState::alive(0.0);
  ChainState u_bond = ChainState::alive(0.0);

  bool any_alive() const { return aug_alive || w_comp.is_alive() || u_bond.is_alive(); }
};

/// True when the vertex violates bond <= comp <= aug (with value ordering).
inline bool violates_hierarchy(const VertexState& s) {
  auto below = [](double a, double b) { return a < b - 1e-9 * (1.0 + std::abs(b)); };
  if (s.u_bond.is_alive() && (s.w_comp.is_dead() || below(s.w_comp.value(), s.u_bond.value()))) return true;
  if (s.w_comp.is_alive() && (!s.aug_alive || below(s.v_aug, s.w_comp.value()))) return true;
  return false;
}

struct TreeRunReport {
  int depth = 0;
  std::uint64_t seed = 0;
  int frontier_cap = 0;
  bool truncated = false;
  std::array<std::vector<std::uint64_t>, 3> alive_per_level;  // indexed by Scheme
  std::uint64_t hierarchy_violations = 0;
  std::array<bool, 3> survived_to_depth{};

  const std::vector<std::uint64_t>& counts(Scheme s) const { return alive_per_level[static_cast<int>(s)]; }
  bool survived(Scheme s) const { return survived_to_depth[static_cast<int>(s)]; }
};

/// Called for every generated vertex that is kept (at least one scheme alive).
using VertexVisitor = std::function<void(const VertexId&, const VertexState&)>;

namespace detail {

struct FrontierNode {
  VertexId id;
  std::uint64_t key;
  VertexState state;
};

inline int tier(const VertexState& s) {
  if (s.u_bond.is_alive()) return 0;
  if (s.w_comp.is_alive()) return 1;
  return 2;
}

// Keep at most cap nodes: boundary-alive first, then complete-alive, then
// augmented-only; the tier that overflows is subsampled uniformly.
inline void truncate_frontier(std::vector<FrontierNode>& nodes, std::size_t cap, std::uint64_t seed, int level) {
  std::stable_sort(nodes.begin(), nodes.end(), [](const FrontierNode& a, const FrontierNode& b) { return tier(a.state) < tier(b.state); });
  std::size_t begin = 0;
  while (begin < nodes.size()) {
    std::size_t end = begin;
    while (end < nodes.size() && tier(nodes[end].state) == tier(nodes[begin].state)) ++end;
    if (end > cap) {
      const std::size_t want = cap - begin;
      CounterRng rng(derive_key(seed, {0x7472756e63ULL, static_cast<std::uint64_t>(level)}));
      for (std::size_t i = 0; i < want; ++i) std::swap(nodes[begin + i], nodes[begin + i + rng.below(end - begin - i)]);
      std::sort(nodes.begin() + static_cast<std::ptrdiff_t>(begin), nodes.begin() + static_cast<std::ptrdiff_t>(cap),
                [](const FrontierNode& a, const FrontierNode& b) { return a.id < b.id; });
      nodes.resize(cap);
      return;
    }
    begin = end;
  }
}

}  // namespace detail

/// Level-order simulation of augmented, complete and boundary routing on one
/// sampled tree, all driven by the same vertex strengths and edge costs.
/// Vertices where all three schemes are dead are pruned; when the frontier
/// exceeds frontier_cap it is subsampled and the report is flagged truncated.
inline TreeRunReport run_coupled(const ModelConfig& cfg, int depth, std::uint64_t seed, int frontier_cap,
                                 const VertexVisitor& visit = {}) {
  if (depth < 1) throw PreconditionFailed("run_coupled: depth must be >= 1");
  if (frontier_cap < 1) throw PreconditionFailed("run_coupled: frontier_cap must be >= 1");
  TreeRunReport rep;
  rep.depth = depth;
  rep.seed = seed;
  rep.frontier_cap = frontier_cap;
  for (auto& v : rep.alive_per_level) v.assign(static_cast<std::size_t>(depth) + 1, 0);
  for (auto& v : rep.alive_per_level) v[0] = 1;

  std::vector<detail::FrontierNode> frontier{{VertexId{0, 0}, tree_keys::root(seed), VertexState{}}};
  if (visit) visit(frontier[0].id, frontier[0].state);
  std::vector<detail::FrontierNode> next;
  for (int level = 1; level <= depth && !frontier.empty(); ++level) {
    next.clear();
    for (const auto& x : frontier) {
      const double r = tree_keys::strength(cfg, seed, x.key);
      for (int i = 0; i < cfg.m; ++i) {
        const std::uint64_t key = tree_keys::child(x.key, i);
        const double c = tree_keys::cost(cfg, seed, key);
        VertexState s;
        const double v = x.state.v_aug + r - c;
        s.aug_alive = x.state.aug_alive && v >= 0.0;
        s.v_aug = s.aug_alive ? v : 0.0;
        s.w_comp = w_step(x.state.w_comp, r, c);
        s.u_bond = u_step(x.state.u_bond, r, c);
        if (!s.any_alive()) continue;
        if (violates_hierarchy(s)) ++rep.hierarchy_violations;
        const VertexId id{level, x.id.position * static_cast<std::uint64_t>(cfg.m) + static_cast<std::uint64_t>(i)};
        if (s.aug_alive) ++rep.alive_per_level[0][level];
        if (s.w_comp.is_alive()) ++rep.alive_per_level[1][level];
        if (s.u_bond.is_alive()) ++rep.alive_per_level[2][level];
        if (visit) visit(id, s);
        next.push_back({id, key, s});
      }
    }
    if (next.size() > static_cast<std::size_t>(frontier_cap)) {
      rep.truncated = true;
      detail::truncate_frontier(next, static_cast<std::size_t>(frontier_cap), seed, level);
    }
    frontier.swap(next);
  }
  for (int s = 0; s < 3; ++s) rep.survived_to_depth[s] = rep.alive_per_level[s][depth] > 0;
  return rep;
}

/// Literal synchronized boundary routing on the fully materialized tree, with
/// the same seed-derived weights as run_coupled. Returns the informed vertices
/// in sorted order. Oracle scale only: m^depth <= 1e6.
inline std::vector<VertexId> run_boundary_literal(const ModelConfig& cfg, int depth, std::uint64_t seed) {
  if (depth < 0) throw PreconditionFailed("run_boundary_literal: depth must be >= 0");
  if (std::pow(static_cast<double>(cfg.m), depth) > 1e6) throw PreconditionFailed("run_boundary_literal: m^depth exceeds 1e6");
  const auto m = static_cast<std::size_t>(cfg.m);

  // Heap layout: children of vertex v are first_child(v) + i.
  std::vector<std::size_t> level_start{0};
  std::size_t width = 1;
  for (int l = 0; l <= depth; ++l) {
    level_start.push_back(level_start.back() + width);
    width *= m;
  }
  const std::size_t total = level_start.back();
  std::vector<std::uint64_t> key(total);
  std::vector<double> strength(total), cost(total, 0.0);
  std::vector<int> level_of(total, 0);
  key[0] = tree_keys::root(seed);
  for (int l = 0; l <= depth; ++l)
    for (std::size_t v = level_start[l]; v < level_start[l + 1]; ++v) {
      level_of[v] = l;
      strength[v] = tree_keys::strength(cfg, seed, key[v]);
      if (l == depth) continue;
      const std::size_t first = level_start[l + 1] + (v - level_start[l]) * m;
      for (std::size_t i = 0; i < m; ++i) {
        key[first + i] = tree_keys::child(key[v], static_cast<int>(i));
        cost[first + i] = tree_keys::cost(cfg, seed, key[first + i]);
      }
    }
  auto first_child = [&](std::size_t v) { return level_start[level_of[v] + 1] + (v - level_start[level_of[v]]) * m; };

  std::vector<char> informed(total, 0);
  informed[0] = 1;
  for (;;) {
    std::vector<std::size_t> boundary;
    for (std::size_t v = 0; v < total; ++v) {
      if (!informed[v] || level_of[v] == depth) continue;
      const std::size_t f = first_child(v);
      for (std::size_t i = 0; i < m; ++i)
        if (!informed[f + i]) {
          boundary.push_back(v);
          break;
        }
    }
    std::vector<std::size_t> added;
    for (std::size_t x : boundary) {
      // Vertices within range of x whose path from x avoids the informed set.
      const std::size_t f = first_child(x);
      std::vector<std::pair<std::size_t, double>> work;
      for (std::size_t i = 0; i < m; ++i)
        if (!informed[f + i]) work.emplace_back(f + i, cost[f + i]);
      while (!work.empty()) {
        const auto [y, spent] = work.back();
        work.pop_back();
        if (spent > strength[x] || informed[y]) continue;
        added.push_back(y);
        if (level_of[y] == depth) continue;
        const std::size_t g = first_child(y);
        for (std::size_t i = 0; i < m; ++i) work.emplace_back(g + i, spent + cost[g + i]);
      }
    }
    if (added.empty()) break;
    for (std::size_t y : added) informed[y] = 1;
  }

  std::vector<VertexId> out;
  for (std::size_t v = 0; v < total; ++v)
    if (informed[v]) out.push_back({level_of[v], static_cast<std::uint64_t>(v - level_start[level_of[v]])});
  return out;
}

/// Per-repetition values of (1/depth) max_{|x| = depth} V_x for the unkilled
/// walk. When more than frontier_cap particles exist, the highest positions
/// are kept, which biases the estimate low.
inline std::vector<double> brw_speed_samples(const ModelConfig& cfg, int depth, int reps, std::uint64_t seed,
                                             int frontier_cap = 1 << 16) {
  if (cfg.m < 2) throw PreconditionFailed("brw_speed: m must be >= 2");
  if (depth < 1 || reps < 1) throw PreconditionFailed("brw_speed: depth and reps must be >= 1");
  std::vector<double> out;
  struct Particle {
    double v;
    std::uint64_t key;
  };
  for (int rep = 0; rep < reps; ++rep) {
    const std::uint64_t tree_seed = derive_key(seed, {0x7370656564ULL, static_cast<std::uint64_t>(rep)});
    std::vector<Particle> gen{{0.0, tree_keys::root(tree_seed)}}, next;
    for (int level = 1; level <= depth; ++level) {
      next.clear();
      for (const Particle& p : gen) {
        const double r = tree_keys::strength(cfg, tree_seed, p.key);
        for (int i = 0; i < cfg.m; ++i) {
          const std::uint64_t k = tree_keys::child(p.key, i);
          next.push_back({p.v + r - tree_keys::cost(cfg, tree_seed, k), k});
        }
      }
      if (next.size() > static_cast<std::size_t>(frontier_cap)) {
        auto higher = [](const Particle& a, const Particle& b) { return a.v != b.v ? a.v > b.v : a.key < b.key; };
        std::nth_element(next.begin(), next.begin() + frontier_cap, next.end(), higher);
        next.resize(static_cast<std::size_t>(frontier_cap));
      }
      gen.swap(next);
    }
    double best = -std::numeric_limits<double>::infinity();
    for (const Particle& p : gen) best = std::max(best, p.v);
    out.push_back(best / depth);
  }
  return out;
}

/// Mean of brw_speed_samples; estimates s* from below.
inline double brw_speed_estimate(const ModelConfig& cfg, int depth, int reps, std::uint64_t seed, int frontier_cap = 1 << 16) {
  const auto s = brw_speed_samples(cfg, depth, reps, seed, frontier_cap);
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

}  // namespace treecast

#endif  // TREECAST_TREESIM_HPP
