#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smalign/bounds.hpp"
#include "smalign/objective.hpp"
#include "smalign/se3.hpp"

namespace smalign {

struct SolverConfig {
  // Termination gap, in objective units. The objective is already scale-free
  // (all mixture weights sum to 1), so the gap is interpreted as an absolute
  // threshold on f; the report records this interpretation.
  double epsilon = 0.1;
  // Camera standoff radius; must match the ObjectiveContext it is used with.
  double zeta = 0.5;
  // Branches per bound-evaluation wave.
  int batch_size = 1024;
  // Wall-clock budget in seconds; the incumbent is returned on expiry.
  std::optional<double> time_limit;
  // Queue size cap. Overflow folds the worst-priority branches into the
  // resolved set: their volume stops being refined but their bounds still
  // participate in the certified global lower bound.
  std::optional<std::size_t> queue_capacity;
  // Cap on total branch bound evaluations; a deterministic resource budget
  // (reported as a time_limit termination). Unlimited when unset.
  std::optional<std::uint64_t> max_evaluations;
  // Worker threads for bound evaluation; 0 means hardware concurrency.
  int threads = 0;
  // Recorded in the report for reproducibility bookkeeping; the search itself
  // is deterministic and draws no random numbers.
  std::uint64_t seed = 0;
};

enum class SolverStatus {
  epsilon_optimal,   // gap <= epsilon, best_value is epsilon-optimal
  time_limit,        // wall-clock or evaluation budget exhausted
  queue_exhausted,   // no refinable volume left but gap > epsilon
};

struct TraceEntry {
  std::uint64_t wave = 0;
  std::uint64_t bound_evaluations = 0;  // cumulative
  double best_upper = 0.0;
  double global_lower = 0.0;
  std::size_t queue_size = 0;
  // Volume bookkeeping, as fractions of the initial feasible domain volume.
  double unexplored_volume_fraction = 0.0;
  double pruned_volume_fraction = 0.0;
  double resolved_volume_fraction = 0.0;
};

struct SolverStats {
  std::uint64_t branches_expanded = 0;
  std::uint64_t sma_invocations = 0;
  std::uint64_t bound_evaluations = 0;
  double wall_time_seconds = 0.0;  // the only nondeterministic field
};

struct SolverReport {
  Pose best_pose;
  double best_value = 0.0;    // d*, objective at best_pose
  double global_lower = 0.0;  // certified lower bound on the global minimum
  double gap = 0.0;           // best_value - global_lower, >= -1e-9
  SolverStatus status = SolverStatus::queue_exhausted;
  std::string epsilon_interpretation;  // how epsilon was applied
  SolverStats stats;
  std::vector<TraceEntry> trace;  // one entry per evaluation wave
};

struct RefineResult {
  double value = 0.0;
  Pose pose;
};

// Local descent ("SMA"): limited-memory quasi-Newton minimization of the
// objective from a feasible start, with strong-Wolfe line search. The result
// is clamped to the domain and zeta-feasible, and never worse than the start
// (failure to improve returns the start itself).
RefineResult local_refine(const ObjectiveContext& ctx, const Pose& start,
                          const PoseDomain& domain);

// Bounds for each branch, in input order. Results are identical to calling
// evaluate_bounds sequentially regardless of worker count; threads = 0 uses
// hardware concurrency, 1 runs inline. skip_upper_at is forwarded to
// evaluate_bounds, letting callers with an incumbent value skip the upper
// evaluation of branches their incumbent already prunes.
std::vector<BoundPair> evaluate_branch_batch(
    const ObjectiveContext& ctx, const std::vector<BranchRegion>& branches,
    int threads = 0,
    double skip_upper_at = std::numeric_limits<double>::infinity());

// Globally-optimal alignment: best-first branch-and-bound over the domain.
// Terminates when the certified gap drops to config.epsilon, the refinable
// queue empties, or a time/evaluation budget expires (incumbent returned).
// Throws std::invalid_argument on inconsistent config and InfeasiblePoseError
// when the domain contains no feasible camera center.
SolverReport solve(const ObjectiveContext& ctx, const PoseDomain& domain,
                   const SolverConfig& config);

}  // namespace smalign
