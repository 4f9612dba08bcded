#include "smalign/mixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "smalign/errors.hpp"
#include "smalign/rng.hpp"

namespace smalign {

namespace {

constexpr int kMaxIterations = 100;

std::vector<std::size_t> visit_order(std::size_t n, std::optional<std::uint64_t> seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (seed) {
    Rng rng(*seed);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }
  }
  return order;
}

// Drops clusters that lost all their members, renumbering survivors in
// ascending old-index order.
void compact_clusters(std::vector<int>& assignment, std::vector<Eigen::Vector3d>& centers,
                      const std::vector<int>& counts) {
  std::vector<int> remap(centers.size(), -1);
  std::vector<Eigen::Vector3d> kept;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (counts[c] > 0) {
      remap[c] = static_cast<int>(kept.size());
      kept.push_back(centers[c]);
    }
  }
  for (int& a : assignment) a = remap[a];
  centers = std::move(kept);
}

}  // namespace

Clustering dp_means(std::span<const Eigen::Vector3d> points, double lambda_p,
                    std::optional<std::uint64_t> shuffle_seed) {
  if (points.empty()) throw std::invalid_argument("dp_means: empty input");
  if (!(lambda_p > 0.0)) throw std::invalid_argument("dp_means: lambda_p must be > 0");

  const std::size_t n = points.size();
  const double lambda2 = lambda_p * lambda_p;
  const std::vector<std::size_t> order = visit_order(n, shuffle_seed);

  Eigen::Vector3d global_mean = Eigen::Vector3d::Zero();
  for (const Eigen::Vector3d& p : points) global_mean += p;
  global_mean /= static_cast<double>(n);

  Clustering result;
  result.assignment.assign(n, -1);
  result.centers = {global_mean};

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    bool changed = false;
    for (const std::size_t i : order) {
      const Eigen::Vector3d& p = points[i];
      int best = 0;
      double best_d2 = (p - result.centers[0]).squaredNorm();
      for (std::size_t c = 1; c < result.centers.size(); ++c) {
        const double d2 = (p - result.centers[c]).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = static_cast<int>(c);
        }
      }
      if (best_d2 > lambda2) {
        best = static_cast<int>(result.centers.size());
        result.centers.push_back(p);
      }
      if (result.assignment[i] != best) {
        result.assignment[i] = best;
        changed = true;
      }
    }

    std::vector<Eigen::Vector3d> sums(result.centers.size(), Eigen::Vector3d::Zero());
    std::vector<int> counts(result.centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[result.assignment[i]] += points[i];
      ++counts[result.assignment[i]];
    }
    for (std::size_t c = 0; c < result.centers.size(); ++c) {
      if (counts[c] > 0) result.centers[c] = sums[c] / counts[c];
    }
    compact_clusters(result.assignment, result.centers, counts);

    double cost = lambda2 * static_cast<double>(result.centers.size());
    for (std::size_t i = 0; i < n; ++i) {
      cost += (points[i] - result.centers[result.assignment[i]]).squaredNorm();
    }
    result.objective_history.push_back(cost);

    if (!changed) break;
  }
  return result;
}

Clustering dp_vmf_means(std::span<const UnitVector3> bearings, double lambda_f,
                        std::optional<std::uint64_t> shuffle_seed) {
  if (bearings.empty()) throw std::invalid_argument("dp_vmf_means: empty input");
  if (!(lambda_f > 0.0) || !(lambda_f < M_PI)) {
    throw std::invalid_argument("dp_vmf_means: lambda_f must be in (0, pi)");
  }

  const std::size_t n = bearings.size();
  // Membership test is on the geodesic angle; comparing cosines avoids acos.
  const double cos_lambda = std::cos(lambda_f);
  const std::vector<std::size_t> order = visit_order(n, shuffle_seed);

  Eigen::Vector3d resultant = Eigen::Vector3d::Zero();
  for (const UnitVector3& f : bearings) resultant += f.vec();
  // A perfectly balanced set has no mean direction to start from.
  Eigen::Vector3d init = resultant.norm() > 1e-12 ? resultant.normalized()
                                                  : bearings[0].vec();

  Clustering result;
  result.assignment.assign(n, -1);
  result.centers = {init};

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    bool changed = false;
    for (const std::size_t i : order) {
      const Eigen::Vector3d& f = bearings[i].vec();
      int best = 0;
      double best_cos = f.dot(result.centers[0]);
      for (std::size_t c = 1; c < result.centers.size(); ++c) {
        const double cs = f.dot(result.centers[c]);
        if (cs > best_cos) {
          best_cos = cs;
          best = static_cast<int>(c);
        }
      }
      if (best_cos < cos_lambda) {
        best = static_cast<int>(result.centers.size());
        result.centers.push_back(f);
      }
      if (result.assignment[i] != best) {
        result.assignment[i] = best;
        changed = true;
      }
    }

    std::vector<Eigen::Vector3d> sums(result.centers.size(), Eigen::Vector3d::Zero());
    std::vector<int> counts(result.centers.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[result.assignment[i]] += bearings[i].vec();
      ++counts[result.assignment[i]];
    }
    for (std::size_t c = 0; c < result.centers.size(); ++c) {
      // Zero resultant leaves the previous direction in place.
      if (counts[c] > 0 && sums[c].norm() > 1e-12) {
        result.centers[c] = sums[c].normalized();
      }
    }
    compact_clusters(result.assignment, result.centers, counts);

    double cost = lambda_f * lambda_f * static_cast<double>(result.centers.size());
    for (std::size_t i = 0; i < n; ++i) {
      const double cs =
          std::clamp(bearings[i].vec().dot(result.centers[result.assignment[i]]), -1.0, 1.0);
      const double angle = std::acos(cs);
      cost += angle * angle;
    }
    result.objective_history.push_back(cost);

    if (!changed) break;
  }
  return result;
}

std::vector<std::vector<Eigen::Vector3d>> group_points_by_cluster(
    std::span<const Eigen::Vector3d> points, const Clustering& clustering) {
  std::vector<std::vector<Eigen::Vector3d>> out(clustering.centers.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[clustering.assignment[i]].push_back(points[i]);
  }
  return out;
}

std::vector<std::vector<UnitVector3>> group_bearings_by_cluster(
    std::span<const UnitVector3> bearings, const Clustering& clustering) {
  std::vector<std::vector<UnitVector3>> out;
  out.reserve(clustering.centers.size());
  for (std::size_t c = 0; c < clustering.centers.size(); ++c) out.emplace_back();
  for (std::size_t i = 0; i < bearings.size(); ++i) {
    out[clustering.assignment[i]].push_back(bearings[i]);
  }
  return out;
}

Gmm fit_gaussian_components(const std::vector<std::vector<Eigen::Vector3d>>& clusters,
                            double sigma2_min) {
  if (clusters.empty()) throw std::invalid_argument("fit_gaussian_components: no clusters");
  if (!(sigma2_min > 0.0)) {
    throw std::invalid_argument("fit_gaussian_components: sigma2_min must be > 0");
  }
  std::size_t total = 0;
  for (const auto& c : clusters) {
    if (c.empty()) throw std::invalid_argument("fit_gaussian_components: empty cluster");
    total += c.size();
  }

  Gmm gmm;
  gmm.components.reserve(clusters.size());
  for (const auto& cluster : clusters) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const Eigen::Vector3d& p : cluster) mean += p;
    mean /= static_cast<double>(cluster.size());

    double dispersion = 0.0;
    for (const Eigen::Vector3d& p : cluster) dispersion += (p - mean).squaredNorm();
    const double sigma2 =
        std::max(dispersion / (3.0 * static_cast<double>(cluster.size())), sigma2_min);

    const double weight = static_cast<double>(cluster.size()) / static_cast<double>(total);
    gmm.components.emplace_back(mean, sigma2, weight);
  }
  return gmm;
}

Vmfmm fit_vmf_components(const std::vector<std::vector<UnitVector3>>& clusters,
                         double kappa_min, double kappa_max) {
  if (clusters.empty()) throw std::invalid_argument("fit_vmf_components: no clusters");
  std::size_t total = 0;
  for (const auto& c : clusters) {
    if (c.empty()) throw std::invalid_argument("fit_vmf_components: empty cluster");
    total += c.size();
  }

  Vmfmm vmfmm;
  vmfmm.components.reserve(clusters.size());
  for (const auto& cluster : clusters) {
    Eigen::Vector3d resultant = Eigen::Vector3d::Zero();
    for (const UnitVector3& f : cluster) resultant += f.vec();
    const double resultant_norm = resultant.norm();
    if (resultant_norm < 1e-12) {
      throw std::invalid_argument(
          "fit_vmf_components: antipodally balanced cluster has no mean direction");
    }
    const double rbar = resultant_norm / static_cast<double>(cluster.size());

    double kappa;
    if (rbar >= 1.0 - 1e-12) {
      kappa = kappa_max;
    } else {
      kappa = std::clamp(rbar * (3.0 - rbar * rbar) / (1.0 - rbar * rbar), kappa_min,
                         kappa_max);
    }

    const double weight = static_cast<double>(cluster.size()) / static_cast<double>(total);
    vmfmm.components.emplace_back(UnitVector3::normalized(resultant), kappa, weight);
  }
  return vmfmm;
}

SemanticMixturePair build_semantic_mixtures(
    const LabeledPointSet& points, const LabeledBearingSet& bearings, double lambda_p,
    double lambda_f, const std::optional<std::map<std::string, double>>& class_weights) {
  if (points.points.empty()) throw std::invalid_argument("build_semantic_mixtures: no points");
  if (bearings.bearings.empty()) {
    throw std::invalid_argument("build_semantic_mixtures: no bearings");
  }
  if (!points.labels.empty() && points.labels.size() != points.points.size()) {
    throw std::invalid_argument("build_semantic_mixtures: point label count mismatch");
  }
  if (!bearings.labels.empty() && bearings.labels.size() != bearings.bearings.size()) {
    throw std::invalid_argument("build_semantic_mixtures: bearing label count mismatch");
  }
  const bool points_labeled = !points.labels.empty();
  const bool bearings_labeled = !bearings.labels.empty();
  if (points_labeled != bearings_labeled) {
    throw std::invalid_argument(
        "build_semantic_mixtures: labels must be present on both inputs or neither");
  }

  const double sigma2_min = (lambda_p / 10.0) * (lambda_p / 10.0);

  SemanticMixturePair result;

  // Partition by class; unlabeled data forms the single pseudo-class "all".
  std::map<std::string, std::vector<Eigen::Vector3d>> points_by_class;
  std::map<std::string, std::vector<UnitVector3>> bearings_by_class;
  if (points_labeled) {
    for (std::size_t i = 0; i < points.points.size(); ++i) {
      points_by_class[points.labels[i]].push_back(points.points[i]);
    }
    for (std::size_t i = 0; i < bearings.bearings.size(); ++i) {
      bearings_by_class[bearings.labels[i]].push_back(bearings.bearings[i]);
    }
  } else {
    points_by_class["all"] = points.points;
    bearings_by_class["all"] = {bearings.bearings.begin(), bearings.bearings.end()};
  }

  std::vector<std::string> shared;
  for (const auto& [label, pts] : points_by_class) {
    if (bearings_by_class.count(label)) {
      shared.push_back(label);
    } else {
      result.warnings.push_back("class '" + label + "' has no bearings; dropped");
    }
  }
  for (const auto& [label, dirs] : bearings_by_class) {
    if (!points_by_class.count(label)) {
      result.warnings.push_back("class '" + label + "' has no points; dropped");
    }
  }
  if (shared.empty()) {
    throw std::invalid_argument("build_semantic_mixtures: no class present in both inputs");
  }

  std::vector<double> weights(shared.size(), 1.0 / static_cast<double>(shared.size()));
  if (class_weights) {
    double sum = 0.0;
    for (std::size_t k = 0; k < shared.size(); ++k) {
      const auto it = class_weights->find(shared[k]);
      if (it == class_weights->end()) {
        throw std::invalid_argument("build_semantic_mixtures: missing weight for class '" +
                                    shared[k] + "'");
      }
      if (!(it->second >= 0.0)) {
        throw std::invalid_argument("build_semantic_mixtures: negative weight for class '" +
                                    shared[k] + "'");
      }
      weights[k] = it->second;
      sum += it->second;
    }
    if (!(sum > 0.0)) {
      throw std::invalid_argument("build_semantic_mixtures: class weights sum to zero");
    }
    for (double& w : weights) w /= sum;
  }

  for (std::size_t k = 0; k < shared.size(); ++k) {
    const auto& cls_points = points_by_class[shared[k]];
    const auto& cls_bearings = bearings_by_class[shared[k]];

    const Clustering pc = dp_means(cls_points, lambda_p);
    const Clustering bc = dp_vmf_means(cls_bearings, lambda_f);

    SemanticClass cls;
    cls.id = shared[k];
    cls.weight = weights[k];
    cls.gmm = fit_gaussian_components(group_points_by_cluster(cls_points, pc), sigma2_min);
    cls.vmfmm = fit_vmf_components(group_bearings_by_cluster(cls_bearings, bc));
    result.classes.push_back(std::move(cls));
  }
  return result;
}

}  // namespace smalign
