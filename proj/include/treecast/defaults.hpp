#ifndef TREECAST_DEFAULTS_HPP
#define TREECAST_DEFAULTS_HPP

#include <cstdint>

namespace treecast::defaults {

// Every CLI default lives here.
//
//   name            value   used by
//   depth           30      simulate, speed
//   reps            20      estimate (splitting), simulate, speed
//   particles       10^4    estimate (splitting)
//   n               200     estimate (splitting steps)
//   tol             1e-4    threshold
//   budget          200     threshold bisection steps
//   frontier_cap    4096    simulate, speed (vertices kept per level)
//   sim_budget      10^6    simulate: upper bound on depth * reps
//   seed            0       all (TREECAST_SEED overrides)
//   threads         1       estimate, simulate

inline constexpr int kDepth = 30;
inline constexpr int kReps = 20;
inline constexpr int kParticles = 10'000;
inline constexpr int kSteps = 200;
inline constexpr double kTol = 1e-4;
inline constexpr int kBudget = 200;
inline constexpr int kFrontierCap = 4096;
inline constexpr long long kSimBudget = 1'000'000;
inline constexpr std::uint64_t kSeed = 0;
inline constexpr int kThreads = 1;

// Lower bounds enforced by the splitting estimator.
inline constexpr int kMinSteps = 50;
inline constexpr int kMinParticles = 1000;
inline constexpr int kMinReps = 10;

}  // namespace treecast::defaults

#endif  // TREECAST_DEFAULTS_HPP
