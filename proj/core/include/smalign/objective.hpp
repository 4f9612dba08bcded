#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "smalign/mixtures.hpp"
#include "smalign/se3.hpp"
#include "smalign/sphere_stats.hpp"

namespace smalign {

// Immutable evaluation context: per-class model GMM and image vMF mixture in
// flat arrays, plus cached image-side quantities. Safe for unbounded
// concurrent evaluation.
class ObjectiveContext {
 public:
  struct ClassData {
    double class_weight = 1.0;
    // Model components.
    std::vector<Eigen::Vector3d> mu;
    std::vector<double> sigma2;
    std::vector<double> phi1;
    // Image components: direction scaled by concentration, plus caches.
    std::vector<Eigen::Vector3d> b;  // kappa2j * mean_direction
    std::vector<double> kappa2;
    std::vector<double> log_z2;
    std::vector<double> phi2;
    double self_energy = 0.0;  // pose-independent image-image double sum
  };

  ObjectiveContext(const Gmm& model, const Vmfmm& image, double zeta);
  ObjectiveContext(const SemanticMixturePair& pair, double zeta);

  // Copy with both mixtures convolved by an isotropic directional kernel of
  // angular width w (radians): concentrations shrink to kappa / (1 + kappa
  // w^2) and model variances grow by (w * reference_distance)^2. Blurring
  // widens every basin of attraction without moving the alignment optimum
  // far, so a coarse-scale search can seed a fine-scale one.
  static ObjectiveContext blurred(const ObjectiveContext& ctx, double w,
                                  double reference_distance);

  const std::vector<ClassData>& classes() const { return classes_; }
  double zeta() const { return zeta_; }

  // Component means pooled over classes (branching and feasibility tests).
  std::span<const Eigen::Vector3d> all_means() const { return all_means_; }

  // C2: the constant dropped from the objective, sum over classes of the
  // weighted image-image energy. 2 pi * true L2 distance = objective + C2.
  double image_self_energy() const { return image_self_energy_; }

 private:
  void add_class(const std::string& id, double weight, const Gmm& model,
                 const Vmfmm& image);

  std::vector<ClassData> classes_;
  std::vector<Eigen::Vector3d> all_means_;
  double zeta_ = 0.5;
  double image_self_energy_ = 0.0;
};

// Concentration of the projected model component as seen from camera center
// t: (|mu - t| / sigma)^2 + 1. Throws DegenerateProjectionError when t
// coincides with the mean.
double kappa_of_t(const IsotropicGaussian& g, const Eigen::Vector3d& t);

// |kappa_i u_i + kappa_j u_j| for the two camera-frame model directions.
double pair_concentration_self(const IsotropicGaussian& gi, const IsotropicGaussian& gj,
                               const Eigen::Vector3d& t);

// |kappa_i R u_i + kappa_j m_j| mixing a rotated model direction with an
// image component.
double pair_concentration_cross(const IsotropicGaussian& gi, const VmfComponent& vj,
                                const Eigen::Matrix3d& R, const Eigen::Vector3d& t);

// L2 alignment objective (constant image self-energy removed), summed over
// classes with the class weights. Throws InfeasiblePoseError when the camera
// center is within zeta of any component mean.
double objective_value(const ObjectiveContext& ctx, const Pose& pose);

// Analytic gradient (d/dr, d/dt), validated against central differences.
Eigen::Matrix<double, 6, 1> objective_gradient(const ObjectiveContext& ctx,
                                               const Pose& pose);

// True L2 distance between the transformed model mixture and the image
// mixture by latitude-longitude quadrature with at least n_nodes nodes.
// Requires every concentration (including pose-dependent ones) <= 100 so the
// grid can resolve the densities.
double l2_quadrature(const ObjectiveContext& ctx, const Pose& pose, long n_nodes);

}  // namespace smalign
