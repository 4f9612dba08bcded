#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "smalign/sphere_stats.hpp"
#include "smalign/unit_vector.hpp"

namespace smalign {

// 3D points with optional per-point class labels (empty = unlabeled).
struct LabeledPointSet {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::string> labels;
};

// Bearing directions with optional per-bearing class labels.
struct LabeledBearingSet {
  std::vector<UnitVector3> bearings;
  std::vector<std::string> labels;
};

// Mixture of isotropic Gaussians; weights sum to 1.
struct Gmm {
  std::vector<IsotropicGaussian> components;
};

// Mixture of vMF components; weights sum to 1.
struct Vmfmm {
  std::vector<VmfComponent> components;
};

// One mixture pair per semantic class, with class weights summing to 1.
struct SemanticClass {
  std::string id;
  double weight = 1.0;
  Gmm gmm;
  Vmfmm vmfmm;
};

struct SemanticMixturePair {
  std::vector<SemanticClass> classes;
  std::vector<std::string> warnings;  // e.g. classes dropped from one modality
};

// Result of nonparametric clustering. objective_history records the DP-means
// cost (within-cluster dispersion + penalty * cluster count) after each full
// iteration, for convergence diagnostics.
struct Clustering {
  std::vector<int> assignment;            // cluster index per input element
  std::vector<Eigen::Vector3d> centers;   // cluster centers / mean directions
  std::vector<double> objective_history;
};

// DP-means: starts from one cluster at the global mean; a point farther than
// lambda_p from every center spawns a new one; repeats until assignments are
// stable or 100 iterations. Visit order is input order unless a shuffle seed
// is given (assignments are always reported in input order).
Clustering dp_means(std::span<const Eigen::Vector3d> points, double lambda_p,
                    std::optional<std::uint64_t> shuffle_seed = std::nullopt);

// Spherical analog with the geodesic angle threshold lambda_f (radians) and
// normalized-resultant center updates.
Clustering dp_vmf_means(std::span<const UnitVector3> bearings, double lambda_f,
                        std::optional<std::uint64_t> shuffle_seed = std::nullopt);

std::vector<std::vector<Eigen::Vector3d>> group_points_by_cluster(
    std::span<const Eigen::Vector3d> points, const Clustering& clustering);
std::vector<std::vector<UnitVector3>> group_bearings_by_cluster(
    std::span<const UnitVector3> bearings, const Clustering& clustering);

// Per-cluster closed-form fits: mean = centroid, isotropic variance
// (1/3N) sum |p - mean|^2 floored at sigma2_min, weight = cluster share.
Gmm fit_gaussian_components(const std::vector<std::vector<Eigen::Vector3d>>& clusters,
                            double sigma2_min);

// Per-cluster fits: direction = normalized resultant, concentration from the
// small-sample inversion kappa = rbar (3 - rbar^2) / (1 - rbar^2), clamped to
// [kappa_min, kappa_max]. Throws on an antipodally balanced (zero-resultant)
// cluster.
Vmfmm fit_vmf_components(const std::vector<std::vector<UnitVector3>>& clusters,
                         double kappa_min = 1e-3, double kappa_max = 1e5);

// Clusters and fits both modalities per shared class. Unlabeled inputs give a
// single class with weight 1; labeled inputs keep the class intersection
// (classes in only one modality are dropped with a warning). Default class
// weights are uniform; explicit weights (by class id, renormalized) may be
// supplied instead.
SemanticMixturePair build_semantic_mixtures(
    const LabeledPointSet& points, const LabeledBearingSet& bearings, double lambda_p,
    double lambda_f,
    const std::optional<std::map<std::string, double>>& class_weights = std::nullopt);

}  // namespace smalign
