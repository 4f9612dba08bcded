#include "smalign/sphere_stats.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "smalign/errors.hpp"

namespace smalign {

IsotropicGaussian::IsotropicGaussian(const Eigen::Vector3d& mean_, double variance_,
                                     double weight_)
    : mean(mean_), variance(variance_), weight(weight_) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw std::invalid_argument("IsotropicGaussian: variance must be positive, got " +
                                std::to_string(variance_));
  }
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw std::invalid_argument("IsotropicGaussian: weight must be non-negative, got " +
                                std::to_string(weight_));
  }
}

VmfComponent::VmfComponent(const UnitVector3& mean_direction_, double concentration_,
                           double weight_)
    : mean_direction(mean_direction_), concentration(concentration_), weight(weight_) {
  if (!(concentration > 0.0) || !std::isfinite(concentration)) {
    throw std::invalid_argument("VmfComponent: concentration must be positive, got " +
                                std::to_string(concentration_));
  }
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw std::invalid_argument("VmfComponent: weight must be non-negative, got " +
                                std::to_string(weight_));
  }
}

double z_eval(double kappa) {
  if (kappa < 0.0 || !std::isfinite(kappa)) {
    throw std::domain_error("z_eval: kappa must be finite and non-negative");
  }
  if (kappa == 0.0) return 2.0;
  if (kappa > 30.0) return std::exp(log_z_eval(kappa));
  // expm1 keeps the difference accurate as kappa -> 0.
  return (std::expm1(kappa) - std::expm1(-kappa)) / kappa;
}

double log_z_eval(double kappa) {
  if (kappa < 0.0 || !std::isfinite(kappa)) {
    throw std::domain_error("log_z_eval: kappa must be finite and non-negative");
  }
  if (kappa < 1e-4) {
    // Z = 2 (1 + kappa^2/6 + kappa^4/120 + ...)
    return std::log(2.0) + std::log1p(kappa * kappa / 6.0);
  }
  return kappa + std::log1p(-std::exp(-2.0 * kappa)) - std::log(kappa);
}

double log_z_deriv(double kappa) {
  if (kappa < 0.0 || !std::isfinite(kappa)) {
    throw std::domain_error("log_z_deriv: kappa must be finite and non-negative");
  }
  if (kappa < 1e-4) {
    // coth(x) - 1/x = x/3 - x^3/45 + ...
    return kappa / 3.0 - kappa * kappa * kappa / 45.0;
  }
  if (kappa > 350.0) return 1.0 - 1.0 / kappa;
  const double e2 = std::exp(-2.0 * kappa);
  return (1.0 + e2) / (1.0 - e2) - 1.0 / kappa;
}

double vmf_density(const UnitVector3& f, const UnitVector3& mu, double kappa) {
  const double dot = f.dot(mu);
  // exp(kappa (dot - 1)) / (2 pi Z) * e^kappa: fold e^kappa into log Z so
  // large kappa stays finite.
  return std::exp(kappa * dot - log_z_eval(kappa)) / (2.0 * M_PI);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double pn_density(const UnitVector3& f, const Eigen::Vector3d& mu, double sigma2) {
  if (!(sigma2 > 0.0)) {
    throw std::domain_error("pn_density: sigma2 must be positive");
  }
  const double norm_mu = mu.norm();
  if (!(norm_mu > 0.0)) {
    throw DegenerateProjectionError("pn_density: |mu| must be positive");
  }
  const double sigma = std::sqrt(sigma2);
  const double rho = norm_mu / sigma;
  const double alpha = mu.dot(f.vec()) / sigma;  // |alpha| <= rho
  // Radially integrated Gaussian; grouping exp((alpha^2 - rho^2)/2) <= 1
  // avoids overflow for distant components.
  const double t1 = alpha * std::exp(-0.5 * rho * rho) / std::sqrt(2.0 * M_PI);
  const double t2 =
      (1.0 + alpha * alpha) * normal_cdf(alpha) * std::exp(0.5 * (alpha * alpha - rho * rho));
  return (t1 + t2) / (2.0 * M_PI);
}

VmfComponent qpn_from_gaussian(const IsotropicGaussian& g, double degenerate_tol) {
  const double norm_mu = g.mean.norm();
  if (!(norm_mu > degenerate_tol)) {
    throw DegenerateProjectionError(
        "qpn_from_gaussian: component mean within " + std::to_string(degenerate_tol) +
        " of the projection center");
  }
  const double rho2 = norm_mu * norm_mu / g.variance;
  return VmfComponent(UnitVector3::normalized(g.mean), rho2 + 1.0, g.weight);
}

double qpn_pn_mae(double rho, int n_nodes) {
  if (!(rho > 0.0)) throw std::domain_error("qpn_pn_mae: rho must be positive");
  if (n_nodes < 2) throw std::domain_error("qpn_pn_mae: need at least 2 nodes");
  // Unit sigma, mean at distance rho along +z; evaluation direction swept
  // through the polar angle. Both densities are rotationally symmetric about
  // the mean direction, so this 1D sweep captures the full discrepancy.
  const Eigen::Vector3d mu(0.0, 0.0, rho);
  const UnitVector3 mu_hat = UnitVector3::normalized(mu);
  const double kappa = rho * rho + 1.0;
  double acc = 0.0;
  for (int k = 0; k < n_nodes; ++k) {
    const double theta = M_PI * static_cast<double>(k) / static_cast<double>(n_nodes - 1);
    const UnitVector3 f = UnitVector3::normalized(
        Eigen::Vector3d(std::sin(theta), 0.0, std::cos(theta)));
    acc += std::abs(vmf_density(f, mu_hat, kappa) - pn_density(f, mu, 1.0));
  }
  return acc / static_cast<double>(n_nodes);
}

}  // namespace smalign
