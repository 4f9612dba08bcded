#include "smalign/solver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <thread>

#include <Eigen/Geometry>

#include "smalign/errors.hpp"

namespace smalign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Vector6d = Eigen::Matrix<double, 6, 1>;

Pose pose_from(const Vector6d& x) {
  Pose p;
  p.r = x.head<3>();
  p.t = x.tail<3>();
  return p;
}

Vector6d vec_from(const Pose& p) {
  Vector6d x;
  x << p.r, p.t;
  return x;
}

// Objective with infeasible poses mapped to +infinity (line-search barrier).
double safe_value(const ObjectiveContext& ctx, const Vector6d& x) {
  try {
    return objective_value(ctx, pose_from(x));
  } catch (const InfeasiblePoseError&) {
    return kInf;
  }
}

// Clamp a point into the domain: rotation into the cube, translation into the
// nearest cuboid, then out of any standoff ball (best effort, like the upper
// bound's center projection). Returns false if no feasible point was reached.
bool clamp_to_domain(const ObjectiveContext& ctx, const PoseDomain& domain,
                     Vector6d* x) {
  Vector6d& v = *x;
  const Eigen::Vector3d rc = domain.rotation.center;
  const double rh = domain.rotation.half_width;
  for (int k = 0; k < 3; ++k) v[k] = std::clamp(v[k], rc[k] - rh, rc[k] + rh);

  const Eigen::Vector3d t(v[3], v[4], v[5]);
  const TranslationCuboid* best_box = nullptr;
  double best_dist = kInf;
  for (const auto& box : domain.translations) {
    const double d = point_cuboid_distance(box, t).lo;
    if (d < best_dist) {
      best_dist = d;
      best_box = &box;
    }
  }
  if (best_box == nullptr) return false;

  Eigen::Vector3d p = t;
  const Eigen::Vector3d c = best_box->center;
  const Eigen::Vector3d h = best_box->half_widths;
  for (int k = 0; k < 3; ++k) p[k] = std::clamp(p[k], c[k] - h[k], c[k] + h[k]);

  const double zeta = ctx.zeta();
  for (int projection = 0; projection <= 8; ++projection) {
    const Eigen::Vector3d* offender = nullptr;
    for (const auto& mu : ctx.all_means()) {
      if ((mu - p).norm() < zeta) {
        offender = &mu;
        break;
      }
    }
    if (offender == nullptr) {
      v[3] = p.x();
      v[4] = p.y();
      v[5] = p.z();
      return true;
    }
    if (projection == 8) break;
    Eigen::Vector3d dir = p - *offender;
    const double n = dir.norm();
    dir = n > 1e-12 ? Eigen::Vector3d(dir / n) : Eigen::Vector3d::UnitX();
    p = *offender + dir * (zeta * (1.0 + 1e-9));
    for (int k = 0; k < 3; ++k) p[k] = std::clamp(p[k], c[k] - h[k], c[k] + h[k]);
  }
  return false;
}

// Strong-Wolfe line search (bracket + bisection zoom). Returns the accepted
// step, or the best sufficient-decrease step found, or 0 on failure.
struct LineSearchResult {
  double alpha = 0.0;
  double value = kInf;
  bool wolfe = false;
};

LineSearchResult wolfe_search(const ObjectiveContext& ctx, const Vector6d& x,
                              const Vector6d& d, double f0, double g0) {
  constexpr double c1 = 1e-4;
  constexpr double c2 = 0.9;
  constexpr double alpha_max = 1e3;

  const auto phi = [&](double a) { return safe_value(ctx, x + a * d); };
  const auto dphi = [&](double a) {
    return objective_gradient(ctx, pose_from(Vector6d(x + a * d))).dot(d);
  };

  LineSearchResult best;  // best sufficient-decrease point as a fallback
  const auto consider = [&](double a, double v) {
    if (v <= f0 + c1 * a * g0 && v < best.value) {
      best.alpha = a;
      best.value = v;
    }
  };

  const auto zoom = [&](double lo, double flo, double hi) -> LineSearchResult {
    for (int iter = 0; iter < 30; ++iter) {
      const double a = 0.5 * (lo + hi);
      const double v = phi(a);
      consider(a, v);
      if (v > f0 + c1 * a * g0 || v >= flo) {
        hi = a;
        continue;
      }
      const double g = dphi(a);
      if (std::abs(g) <= -c2 * g0) return {a, v, true};
      if (g * (hi - lo) >= 0.0) hi = lo;
      lo = a;
      flo = v;
    }
    return best;
  };

  double a_prev = 0.0;
  double f_prev = f0;
  double a = 1.0;
  for (int iter = 0; iter < 20; ++iter) {
    const double v = phi(a);
    consider(a, v);
    if (v > f0 + c1 * a * g0 || (iter > 0 && v >= f_prev)) {
      return zoom(a_prev, f_prev, a);
    }
    const double g = dphi(a);
    if (std::abs(g) <= -c2 * g0) return {a, v, true};
    if (g >= 0.0) return zoom(a, v, a_prev);
    a_prev = a;
    f_prev = v;
    a = std::min(2.0 * a, alpha_max);
    if (a_prev >= alpha_max) break;
  }
  return best;
}

}  // namespace

RefineResult local_refine(const ObjectiveContext& ctx, const Pose& start,
                          const PoseDomain& domain) {
  constexpr int kMaxIterations = 200;
  constexpr int kMemory = 10;
  constexpr double kGradTol = 1e-6;

  RefineResult best;
  best.value = safe_value(ctx, vec_from(start));
  best.pose = start;
  if (!std::isfinite(best.value)) return best;

  // Track the best point that is both feasible and inside the domain.
  const auto offer = [&](const Vector6d& x, double fx) {
    Vector6d p = x;
    if (!clamp_to_domain(ctx, domain, &p)) return;
    const double fp = (p == x) ? fx : safe_value(ctx, p);
    if (fp < best.value) {
      best.value = fp;
      best.pose = pose_from(p);
    }
  };

  Vector6d x = vec_from(start);
  double fx = best.value;
  offer(x, fx);
  Vector6d g = objective_gradient(ctx, pose_from(x));

  std::deque<Vector6d> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    if (g.norm() < kGradTol) break;

    // Two-loop recursion for the quasi-Newton direction.
    Vector6d q = g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const Vector6d& s = s_hist.back();
      const Vector6d& y = y_hist.back();
      q *= s.dot(y) / y.dot(y);
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Vector6d d = -q;
    double dg = d.dot(g);
    if (!(dg < -1e-14 * d.norm() * g.norm())) {
      // Not a descent direction; fall back to steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      dg = -g.squaredNorm();
    }

    const LineSearchResult ls = wolfe_search(ctx, x, d, fx, dg);
    if (!(ls.alpha > 0.0) || !std::isfinite(ls.value)) break;

    const Vector6d x_new = x + ls.alpha * d;
    const Vector6d g_new = objective_gradient(ctx, pose_from(x_new));
    const Vector6d s = x_new - x;
    const Vector6d y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = x_new;
    fx = ls.value;
    g = g_new;
    offer(x, fx);

    // The angle-axis chart degrades past pi; re-express the same rotation
    // with the short vector and drop curvature pairs that straddle the change.
    if (x.head<3>().norm() > M_PI) {
      x.head<3>() = wrap_rotation_vector(x.head<3>());
      g = objective_gradient(ctx, pose_from(x));
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
  }
  return best;
}

std::vector<BoundPair> evaluate_branch_batch(const ObjectiveContext& ctx,
                                             const std::vector<BranchRegion>& branches,
                                             int threads, double skip_upper_at) {
  std::vector<BoundPair> results(branches.size());
  if (branches.empty()) return results;
  unsigned worker_count = threads > 0
                              ? static_cast<unsigned>(threads)
                              : std::max(1u, std::thread::hardware_concurrency());
  worker_count = std::min<unsigned>(worker_count,
                                    static_cast<unsigned>(branches.size()));
  if (worker_count <= 1) {
    for (std::size_t i = 0; i < branches.size(); ++i) {
      results[i] = evaluate_bounds(ctx, branches[i], skip_upper_at);
    }
    return results;
  }
  // Each slot is written once by whichever worker claims its index, so the
  // output is identical to the sequential order no matter the scheduling.
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(worker_count);
  for (unsigned w = 0; w < worker_count; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= branches.size()) return;
        results[i] = evaluate_bounds(ctx, branches[i], skip_upper_at);
      }
    });
  }
  for (auto& t : workers) t.join();
  return results;
}

namespace {

struct QueueEntry {
  BranchRegion branch;
  double volume = 0.0;
  std::uint64_t seq = 0;
};

// Heap "less": true when a has worse priority than b, so the heap top is the
// branch with the smallest lower bound (ties: larger volume, earlier seq).
bool worse_priority(const QueueEntry& a, const QueueEntry& b) {
  if (a.branch.lower != b.branch.lower) return a.branch.lower > b.branch.lower;
  if (a.volume != b.volume) return a.volume < b.volume;
  return a.seq > b.seq;
}

}  // namespace

SolverReport solve(const ObjectiveContext& ctx, const PoseDomain& domain,
                   const SolverConfig& config) {
  using Clock = std::chrono::steady_clock;
  const auto start_time = Clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(Clock::now() - start_time).count();
  };

  if (!(config.epsilon > 0.0)) {
    throw std::invalid_argument("solve: epsilon must be > 0");
  }
  if (config.batch_size < 1) {
    throw std::invalid_argument("solve: batch_size must be >= 1");
  }
  if (config.zeta != ctx.zeta()) {
    throw std::invalid_argument(
        "solve: config.zeta differs from the context's standoff radius");
  }

  SolverReport report;
  report.epsilon_interpretation =
      "absolute gap on the objective value (weights are normalized, so the "
      "objective is scale-free)";

  // Feasible roots: one branch per translation cuboid. A domain of isolated
  // poses has zero Lebesgue volume; fall back to counting measure so the
  // trace fractions stay meaningful.
  std::vector<BranchRegion> roots;
  double total_volume = 0.0;
  for (const auto& box : domain.translations) {
    BranchRegion b;
    b.rotation = domain.rotation;
    b.translation = box;
    total_volume += branch_volume(b);
  }
  const bool unit_measure = !(total_volume > 0.0);
  const auto measure = [&](const BranchRegion& b) {
    return unit_measure ? 1.0 : branch_volume(b);
  };
  if (unit_measure) {
    total_volume = static_cast<double>(domain.translations.size());
  }

  double pruned_volume = 0.0;
  for (const auto& box : domain.translations) {
    BranchRegion b;
    b.rotation = domain.rotation;
    b.translation = box;
    if (feasible_wrt_zeta(box, ctx.all_means(), ctx.zeta())) {
      roots.push_back(b);
    } else {
      pruned_volume += measure(b);
    }
  }
  if (roots.empty()) {
    throw InfeasiblePoseError("solve: no feasible camera center in the domain");
  }

  double best_value = kInf;
  Pose best_pose;
  double certified_lower = -kInf;
  double queue_volume = 0.0;
  double resolved_volume = 0.0;
  double floor_lower = kInf;  // min lower among resolved (unsplittable) branches
  std::uint64_t seq = 0;
  std::vector<QueueEntry> queue;

  const auto queue_min_lower = [&] {
    return queue.empty() ? kInf : queue.front().branch.lower;
  };

  const auto push_entry = [&](const BranchRegion& b, double vol) {
    QueueEntry e;
    e.branch = b;
    e.volume = vol;
    e.seq = seq++;
    queue_volume += e.volume;
    queue.push_back(std::move(e));
    std::push_heap(queue.begin(), queue.end(), worse_priority);
  };

  // Route an evaluated branch: prune, resolve at the size floor, or enqueue.
  // Measures travel with the branches (children carry an exact eighth of the
  // parent), so the three buckets always sum to the initial total.
  const auto route = [&](const BranchRegion& b, double vol) {
    if (b.lower >= best_value) {
      pruned_volume += vol;
    } else if (!is_splittable(b)) {
      resolved_volume += vol;
      floor_lower = std::min(floor_lower, b.lower);
    } else {
      push_entry(b, vol);
    }
  };

  // Process one evaluated wave in input order: incumbent updates, the local
  // optimizer on improving branches, then routing.
  const auto process_wave = [&](const std::vector<BranchRegion>& branches,
                                const std::vector<double>& volumes,
                                const std::vector<BoundPair>& bounds) {
    for (std::size_t i = 0; i < branches.size(); ++i) {
      BranchRegion b = branches[i];
      b.lower = bounds[i].lower;
      b.upper = bounds[i].upper;
      if (b.upper < best_value) {
        const std::optional<Pose> center = upper_bound_pose(ctx, b);
        best_value = b.upper;
        if (center) best_pose = *center;
        if (center) {
          const RefineResult refined = local_refine(ctx, *center, domain);
          ++report.stats.sma_invocations;
          if (refined.value < best_value) {
            best_value = refined.value;
            best_pose = refined.pose;
          }
        }
      }
      route(b, volumes[i]);
    }
  };

  const auto enforce_capacity = [&] {
    if (!config.queue_capacity || queue.size() <= *config.queue_capacity) return;
    std::sort(queue.begin(), queue.end(),
              [](const QueueEntry& a, const QueueEntry& b) {
                return worse_priority(b, a);  // best priority first
              });
    while (queue.size() > *config.queue_capacity) {
      const QueueEntry& e = queue.back();
      queue_volume -= e.volume;
      resolved_volume += e.volume;
      floor_lower = std::min(floor_lower, e.branch.lower);
      queue.pop_back();
    }
    std::make_heap(queue.begin(), queue.end(), worse_priority);
  };

  // Discovery dive: before certification starts, search a blurred copy of
  // the problem and anneal the best poses found back to the exact objective.
  // At fine concentration scales the optimum sits in a basin a few
  // milliradians wide while every coarse lower bound is dominated by slack,
  // so the priority queue alone must grind several tree levels breadth-first
  // before it can tell alignment from bulk. Blurring both mixtures widens the
  // basin enough for a cheap beam search over the blurred bounds to find it,
  // and a ladder of decreasing blur walks the pose into the exact basin. The
  // dive improves best_value/best_pose only and never touches the queue or
  // the volume ledger, so certified lower bounds are unaffected.
  const auto discovery_dive = [&](const std::vector<BranchRegion>& root_branches) {
    constexpr std::uint64_t kDiveCap = 100000;
    const std::uint64_t dive_budget =
        config.max_evaluations
            ? std::min<std::uint64_t>(kDiveCap, *config.max_evaluations / 4)
            : kDiveCap;
    if (dive_budget < 8 * root_branches.size()) return;
    constexpr std::size_t kSectorQuota = 12;  // beam slots per root sector
    constexpr int kMaxIterations = 40;
    constexpr double kCoarseWidth = 0.1;  // radians; basin wide enough to hit

    // Blur kernels act on directions; translation scatter converts through
    // the typical viewing distance.
    const auto means = ctx.all_means();
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& m : means) centroid += m;
    centroid /= static_cast<double>(means.size());
    double dbar = 0.0;
    for (const auto& box : domain.translations) {
      dbar += (box.center - centroid).norm();
    }
    dbar /= static_cast<double>(domain.translations.size());

    const ObjectiveContext coarse =
        ObjectiveContext::blurred(ctx, kCoarseWidth, dbar);

    // One candidate per root sector, each the best blurred center value seen
    // among that sector's descendants. Blur can rank a mirage basin above the
    // true one globally (far-side looks-back poses blur into near-alignment),
    // so every sector gets a seed and the exact objective arbitrates at the
    // end; a single global shortlist would flood with one macro-basin.
    struct Candidate {
      double value = kInf;
      BranchRegion branch;
    };
    std::vector<Candidate> sector_best(root_branches.size());
    const auto offer = [&](double value, const BranchRegion& b, std::size_t s) {
      if (!std::isfinite(value)) return;
      if (value < sector_best[s].value) sector_best[s] = Candidate{value, b};
    };
    const auto skip_threshold = [&] {
      double worst = -kInf;
      for (const Candidate& c : sector_best) {
        worst = std::max(worst, c.value);  // kInf until every sector seeded
      }
      return worst;
    };

    struct BeamEntry {
      BranchRegion branch;
      std::uint32_t sector = 0;
    };
    std::uint64_t used = 0;
    std::vector<BeamEntry> beam;
    {
      const std::vector<BoundPair> bounds =
          evaluate_branch_batch(coarse, root_branches, config.threads);
      used += root_branches.size();
      for (std::size_t i = 0; i < root_branches.size(); ++i) {
        offer(bounds[i].upper, root_branches[i], i);
        if (is_splittable(root_branches[i])) {
          BeamEntry e{root_branches[i], static_cast<std::uint32_t>(i)};
          e.branch.lower = bounds[i].lower;
          beam.push_back(e);
        }
      }
    }

    std::vector<BranchRegion> children;
    std::vector<std::uint32_t> child_sector;
    for (int iter = 0;
         iter < kMaxIterations && !beam.empty() && used + beam.size() * 8 <= dive_budget;
         ++iter) {
      if (config.time_limit && elapsed() >= *config.time_limit) break;
      children.clear();
      child_sector.clear();
      children.reserve(beam.size() * 8);
      for (const BeamEntry& e : beam) {
        const auto split = subdivide_adaptive(e.branch, ctx.all_means());
        children.insert(children.end(), split.begin(), split.end());
        child_sector.insert(child_sector.end(), 8, e.sector);
      }
      // A center value can never improve any sector's candidate once the
      // lower bound exceeds the worst of them, so skip those objective evals.
      const std::vector<BoundPair> child_bounds =
          evaluate_branch_batch(coarse, children, config.threads, skip_threshold());
      used += children.size();
      beam.clear();
      for (std::size_t i = 0; i < children.size(); ++i) {
        offer(child_bounds[i].upper, children[i], child_sector[i]);
        if (is_splittable(children[i])) {
          BeamEntry e{children[i], child_sector[i]};
          e.branch.lower = child_bounds[i].lower;
          beam.push_back(e);
        }
      }
      // Keep the loosest kSectorQuota entries per sector so no sector is
      // starved before the blurred bounds become informative inside it.
      std::sort(beam.begin(), beam.end(),
                [](const BeamEntry& a, const BeamEntry& b) {
                  if (a.sector != b.sector) return a.sector < b.sector;
                  return a.branch.lower < b.branch.lower;
                });
      std::size_t out = 0, run = 0;
      for (std::size_t i = 0; i < beam.size(); ++i) {
        run = (i > 0 && beam[i].sector == beam[i - 1].sector) ? run + 1 : 0;
        if (run < kSectorQuota) beam[out++] = beam[i];
      }
      beam.resize(out);
    }
    report.stats.bound_evaluations += used;

    // Anneal each sector's seed: refine under progressively weaker blur, then
    // let the exact objective have the last word on the incumbent.
    const std::array<double, 2> ladder = {0.03, 0.01};
    std::vector<ObjectiveContext> mids;
    for (const double w : ladder) {
      mids.push_back(ObjectiveContext::blurred(ctx, w, dbar));
    }
    for (const Candidate& c : sector_best) {
      if (!std::isfinite(c.value)) continue;
      const std::optional<Pose> seed = upper_bound_pose(coarse, c.branch);
      if (!seed) continue;
      Pose pose = local_refine(coarse, *seed, domain).pose;
      ++report.stats.sma_invocations;
      for (const ObjectiveContext& mid : mids) {
        pose = local_refine(mid, pose, domain).pose;
        ++report.stats.sma_invocations;
      }
      const RefineResult refined = local_refine(ctx, pose, domain);
      ++report.stats.sma_invocations;
      if (refined.value < best_value) {
        best_value = refined.value;
        best_pose = refined.pose;
      }
    }
  };

  const auto record_trace = [&](std::uint64_t wave) {
    TraceEntry t;
    t.wave = wave;
    t.bound_evaluations = report.stats.bound_evaluations;
    t.best_upper = best_value;
    t.global_lower = certified_lower;
    t.queue_size = queue.size();
    t.unexplored_volume_fraction = queue_volume / total_volume;
    t.pruned_volume_fraction = pruned_volume / total_volume;
    t.resolved_volume_fraction = resolved_volume / total_volume;
    report.trace.push_back(t);
  };

  // Wave 0: the roots.
  {
    std::vector<double> root_vols;
    root_vols.reserve(roots.size());
    for (const auto& b : roots) root_vols.push_back(measure(b));
    const std::vector<BoundPair> bounds =
        evaluate_branch_batch(ctx, roots, config.threads);
    report.stats.bound_evaluations += roots.size();
    discovery_dive(roots);
    process_wave(roots, root_vols, bounds);
    enforce_capacity();
  }

  std::uint64_t wave = 0;
  SolverStatus status = SolverStatus::queue_exhausted;
  for (;;) {
    certified_lower = std::max(
        certified_lower, std::min({best_value, queue_min_lower(), floor_lower}));
    record_trace(wave);
    if (best_value - certified_lower <= config.epsilon) {
      status = SolverStatus::epsilon_optimal;
      break;
    }
    if (queue.empty()) {
      status = SolverStatus::queue_exhausted;
      break;
    }
    if (config.time_limit && elapsed() >= *config.time_limit) {
      status = SolverStatus::time_limit;
      break;
    }
    if (config.max_evaluations &&
        report.stats.bound_evaluations >= *config.max_evaluations) {
      status = SolverStatus::time_limit;
      break;
    }

    // Pop a set of branches and subdivide them.
    const std::size_t pop_target =
        std::max<std::size_t>(1, static_cast<std::size_t>(config.batch_size) / 8);
    std::vector<BranchRegion> children;
    std::vector<double> child_vols;
    children.reserve(pop_target * 8);
    child_vols.reserve(pop_target * 8);
    std::size_t expanded = 0;
    while (expanded < pop_target && !queue.empty()) {
      std::pop_heap(queue.begin(), queue.end(), worse_priority);
      QueueEntry e = std::move(queue.back());
      queue.pop_back();
      queue_volume -= e.volume;
      if (e.branch.lower >= best_value) {  // stale: pruned by a newer incumbent
        pruned_volume += e.volume;
        continue;
      }
      const auto split = subdivide_adaptive(e.branch, ctx.all_means());
      children.insert(children.end(), split.begin(), split.end());
      child_vols.insert(child_vols.end(), 8, e.volume / 8.0);
      ++expanded;
      ++report.stats.branches_expanded;
    }

    if (!children.empty()) {
      const std::vector<BoundPair> bounds =
          evaluate_branch_batch(ctx, children, config.threads, best_value);
      report.stats.bound_evaluations += children.size();
      process_wave(children, child_vols, bounds);
      enforce_capacity();
    }
    ++wave;
  }

  report.best_pose = best_pose;
  report.best_value = best_value;
  report.global_lower = certified_lower;
  report.gap = best_value - certified_lower;
  report.status = status;
  report.stats.wall_time_seconds = elapsed();
  return report;
}

}  // namespace smalign
