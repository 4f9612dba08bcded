#include "smalign/objective.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Geometry>

#include "smalign/errors.hpp"

namespace smalign {

namespace {

// Pairs whose log-domain exponent is provably below this threshold contribute
// less than ~2e-18 each and are dropped (value) or replaced by a ceiling of
// that size (bounds, where the direction of the error matters).
constexpr double kNegligibleExponentMargin = 64.0;

void check_weight_closure(double sum, const char* what) {
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string(what) + ": weights sum to " +
                                std::to_string(sum) + ", expected 1");
  }
}

}  // namespace

void ObjectiveContext::add_class(const std::string&, double weight, const Gmm& model,
                                 const Vmfmm& image) {
  if (model.components.empty() || image.components.empty()) {
    throw std::invalid_argument("ObjectiveContext: class with empty mixture");
  }
  double sum1 = 0.0;
  for (const auto& c : model.components) sum1 += c.weight;
  check_weight_closure(sum1, "ObjectiveContext model");
  double sum2 = 0.0;
  for (const auto& c : image.components) sum2 += c.weight;
  check_weight_closure(sum2, "ObjectiveContext image");

  ClassData data;
  data.class_weight = weight;
  for (const auto& c : model.components) {
    data.mu.push_back(c.mean);
    data.sigma2.push_back(c.variance);
    data.phi1.push_back(c.weight);
    all_means_.push_back(c.mean);
  }
  for (const auto& c : image.components) {
    data.b.push_back(c.concentration * c.mean_direction.vec());
    data.kappa2.push_back(c.concentration);
    data.log_z2.push_back(log_z_eval(c.concentration));
    data.phi2.push_back(c.weight);
  }

  const std::size_t n2 = data.kappa2.size();
  double c2 = 0.0;
  for (std::size_t j = 0; j < n2; ++j) {
    for (std::size_t k = 0; k < n2; ++k) {
      const double K = (data.b[j] + data.b[k]).norm();
      c2 += data.phi2[j] * data.phi2[k] *
            std::exp(log_z_eval(K) - data.log_z2[j] - data.log_z2[k]);
    }
  }
  data.self_energy = c2;
  image_self_energy_ += weight * c2;

  classes_.push_back(std::move(data));
}

ObjectiveContext ObjectiveContext::blurred(const ObjectiveContext& ctx, double w,
                                           double reference_distance) {
  if (!(w >= 0.0) || !(reference_distance >= 0.0)) {
    throw std::invalid_argument("ObjectiveContext::blurred: negative width");
  }
  ObjectiveContext out(ctx);
  out.image_self_energy_ = 0.0;
  const double var_add = (w * reference_distance) * (w * reference_distance);
  const double w2 = w * w;
  for (ClassData& cls : out.classes_) {
    for (double& s2 : cls.sigma2) s2 += var_add;
    const std::size_t n2 = cls.kappa2.size();
    for (std::size_t j = 0; j < n2; ++j) {
      const Eigen::Vector3d dir = cls.b[j] / cls.kappa2[j];
      const double k = cls.kappa2[j] / (1.0 + cls.kappa2[j] * w2);
      cls.kappa2[j] = k;
      cls.b[j] = k * dir;
      cls.log_z2[j] = log_z_eval(k);
    }
    double c2 = 0.0;
    for (std::size_t j = 0; j < n2; ++j) {
      for (std::size_t k = 0; k < n2; ++k) {
        const double K = (cls.b[j] + cls.b[k]).norm();
        c2 += cls.phi2[j] * cls.phi2[k] *
              std::exp(log_z_eval(K) - cls.log_z2[j] - cls.log_z2[k]);
      }
    }
    cls.self_energy = c2;
    out.image_self_energy_ += cls.class_weight * c2;
  }
  return out;
}

ObjectiveContext::ObjectiveContext(const Gmm& model, const Vmfmm& image, double zeta)
    : zeta_(zeta) {
  if (!(zeta > 0.0)) throw std::invalid_argument("ObjectiveContext: zeta must be > 0");
  add_class("all", 1.0, model, image);
}

ObjectiveContext::ObjectiveContext(const SemanticMixturePair& pair, double zeta)
    : zeta_(zeta) {
  if (!(zeta > 0.0)) throw std::invalid_argument("ObjectiveContext: zeta must be > 0");
  if (pair.classes.empty()) {
    throw std::invalid_argument("ObjectiveContext: no semantic classes");
  }
  double wsum = 0.0;
  for (const auto& cls : pair.classes) wsum += cls.weight;
  check_weight_closure(wsum, "ObjectiveContext class weights");
  for (const auto& cls : pair.classes) {
    add_class(cls.id, cls.weight, cls.gmm, cls.vmfmm);
  }
}

double kappa_of_t(const IsotropicGaussian& g, const Eigen::Vector3d& t) {
  const double d2 = (g.mean - t).squaredNorm();
  if (!(d2 > 0.0)) {
    throw DegenerateProjectionError("kappa_of_t: camera center at a component mean");
  }
  return d2 / g.variance + 1.0;
}

double pair_concentration_self(const IsotropicGaussian& gi, const IsotropicGaussian& gj,
                               const Eigen::Vector3d& t) {
  const Eigen::Vector3d ui = gi.mean - t;
  const Eigen::Vector3d uj = gj.mean - t;
  const double di = ui.norm();
  const double dj = uj.norm();
  if (!(di > 0.0) || !(dj > 0.0)) {
    throw DegenerateProjectionError(
        "pair_concentration_self: camera center at a component mean");
  }
  const double ki = di * di / gi.variance + 1.0;
  const double kj = dj * dj / gj.variance + 1.0;
  return ((ki / di) * ui + (kj / dj) * uj).norm();
}

double pair_concentration_cross(const IsotropicGaussian& gi, const VmfComponent& vj,
                                const Eigen::Matrix3d& R, const Eigen::Vector3d& t) {
  const Eigen::Vector3d ui = gi.mean - t;
  const double di = ui.norm();
  if (!(di > 0.0)) {
    throw DegenerateProjectionError(
        "pair_concentration_cross: camera center at a component mean");
  }
  const double ki = di * di / gi.variance + 1.0;
  return ((ki / di) * (R * ui) + vj.concentration * vj.mean_direction.vec()).norm();
}

namespace {

void check_feasible(const ObjectiveContext& ctx, const Eigen::Vector3d& t) {
  for (const Eigen::Vector3d& mu : ctx.all_means()) {
    if ((mu - t).norm() < ctx.zeta()) {
      throw InfeasiblePoseError("pose within zeta of a component mean");
    }
  }
}

// Per-component camera-frame quantities at a fixed translation.
struct ProjectedModel {
  std::vector<Eigen::Vector3d> v;   // kappa_i * unit(mu_i - t)
  std::vector<double> kappa;
  std::vector<double> log_z;
};

ProjectedModel project_model(const ObjectiveContext::ClassData& cls,
                             const Eigen::Vector3d& t) {
  const std::size_t n1 = cls.mu.size();
  ProjectedModel pm;
  pm.v.resize(n1);
  pm.kappa.resize(n1);
  pm.log_z.resize(n1);
  for (std::size_t i = 0; i < n1; ++i) {
    const Eigen::Vector3d u = cls.mu[i] - t;
    const double d2 = u.squaredNorm();
    const double d = std::sqrt(d2);
    const double kappa = d2 / cls.sigma2[i] + 1.0;
    pm.v[i] = (kappa / d) * u;
    pm.kappa[i] = kappa;
    pm.log_z[i] = log_z_eval(kappa);
  }
  return pm;
}

double class_objective(const ObjectiveContext::ClassData& cls, const Eigen::Matrix3d& R,
                       const Eigen::Vector3d& t) {
  const ProjectedModel pm = project_model(cls, t);
  const std::size_t n1 = cls.mu.size();
  const std::size_t n2 = cls.kappa2.size();

  double self_sum = 0.0;
  for (std::size_t i = 0; i < n1; ++i) {
    // Diagonal in closed form: Z(2k)/Z(k)^2 = (k/2) coth k.
    self_sum += cls.phi1[i] * cls.phi1[i] * 0.5 * pm.kappa[i] / std::tanh(pm.kappa[i]);
    for (std::size_t j = i + 1; j < n1; ++j) {
      const double K = (pm.v[i] + pm.v[j]).norm();
      if (K < pm.kappa[i] + pm.kappa[j] - kNegligibleExponentMargin) continue;
      self_sum += 2.0 * cls.phi1[i] * cls.phi1[j] *
                  std::exp(log_z_eval(K) - pm.log_z[i] - pm.log_z[j]);
    }
  }

  double cross_sum = 0.0;
  for (std::size_t i = 0; i < n1; ++i) {
    const Eigen::Vector3d w = R * pm.v[i];
    for (std::size_t j = 0; j < n2; ++j) {
      const double K = (w + cls.b[j]).norm();
      if (K < pm.kappa[i] + cls.kappa2[j] - kNegligibleExponentMargin) continue;
      cross_sum += cls.phi1[i] * cls.phi2[j] *
                   std::exp(log_z_eval(K) - pm.log_z[i] - cls.log_z2[j]);
    }
  }
  return self_sum - 2.0 * cross_sum;
}

}  // namespace

double objective_value(const ObjectiveContext& ctx, const Pose& pose) {
  check_feasible(ctx, pose.t);
  const Eigen::Matrix3d R = rotation_matrix(pose.r);
  double f = 0.0;
  for (const auto& cls : ctx.classes()) {
    f += cls.class_weight * class_objective(cls, R, pose.t);
  }
  return f;
}

namespace {

// Left Jacobian of SO(3): d/dr of exp acts as delta(R v) = -[Rv]x J_l dr.
Eigen::Matrix3d left_jacobian(const Eigen::Vector3d& r) {
  const double theta2 = r.squaredNorm();
  Eigen::Matrix3d K;
  K << 0.0, -r.z(), r.y(), r.z(), 0.0, -r.x(), -r.y(), r.x(), 0.0;
  if (theta2 < 1e-12) {
    return Eigen::Matrix3d::Identity() + 0.5 * K + (1.0 / 6.0) * (K * K);
  }
  const double theta = std::sqrt(theta2);
  return Eigen::Matrix3d::Identity() + ((1.0 - std::cos(theta)) / theta2) * K +
         ((theta - std::sin(theta)) / (theta2 * theta)) * (K * K);
}

}  // namespace

Eigen::Matrix<double, 6, 1> objective_gradient(const ObjectiveContext& ctx,
                                               const Pose& pose) {
  check_feasible(ctx, pose.t);
  const Eigen::Matrix3d R = rotation_matrix(pose.r);
  const Eigen::Matrix3d Jl = left_jacobian(pose.r);

  Eigen::Vector3d grad_r = Eigen::Vector3d::Zero();
  Eigen::Vector3d grad_t = Eigen::Vector3d::Zero();

  for (const auto& cls : ctx.classes()) {
    const std::size_t n1 = cls.mu.size();
    const std::size_t n2 = cls.kappa2.size();

    // Camera-frame projections plus their translation Jacobians.
    std::vector<Eigen::Vector3d> u(n1), uhat(n1);
    std::vector<double> kappa(n1), lz(n1), zl(n1), d(n1);
    std::vector<Eigen::Matrix3d> J(n1);  // d(kappa_i uhat_i)/dt, symmetric
    for (std::size_t i = 0; i < n1; ++i) {
      u[i] = cls.mu[i] - pose.t;
      const double d2 = u[i].squaredNorm();
      d[i] = std::sqrt(d2);
      uhat[i] = u[i] / d[i];
      kappa[i] = d2 / cls.sigma2[i] + 1.0;
      lz[i] = log_z_eval(kappa[i]);
      zl[i] = log_z_deriv(kappa[i]);
      const Eigen::Matrix3d outer = uhat[i] * uhat[i].transpose();
      J[i] = -(2.0 * d[i] / cls.sigma2[i]) * outer -
             (kappa[i] / d[i]) * (Eigen::Matrix3d::Identity() - outer);
    }

    Eigen::Vector3d cls_grad_r = Eigen::Vector3d::Zero();
    Eigen::Vector3d cls_grad_t = Eigen::Vector3d::Zero();

    for (std::size_t i = 0; i < n1; ++i) {
      const Eigen::Vector3d vi = kappa[i] * uhat[i];
      // Diagonal term gradient: d/dkappa of (kappa/2) coth kappa, chained
      // through dkappa/dt = -2 u / sigma^2.
      {
        const double term = 0.5 * kappa[i] / std::tanh(kappa[i]);
        const double dlog = 2.0 * (log_z_deriv(2.0 * kappa[i]) - zl[i]);
        cls_grad_t += cls.phi1[i] * cls.phi1[i] * term * dlog * (-2.0 / cls.sigma2[i]) * u[i];
      }
      for (std::size_t j = i + 1; j < n1; ++j) {
        const Eigen::Vector3d sum = vi + kappa[j] * uhat[j];
        const double K = sum.norm();
        if (K < kappa[i] + kappa[j] - kNegligibleExponentMargin) continue;
        const double term = 2.0 * cls.phi1[i] * cls.phi1[j] *
                            std::exp(log_z_eval(K) - lz[i] - lz[j]);
        Eigen::Vector3d dK = Eigen::Vector3d::Zero();
        if (K > 1e-12) dK = (J[i] + J[j]) * (sum / K);
        cls_grad_t += term * (log_z_deriv(K) * dK + (2.0 * zl[i] / cls.sigma2[i]) * u[i] +
                              (2.0 * zl[j] / cls.sigma2[j]) * u[j]);
      }

      const Eigen::Vector3d w = R * vi;
      for (std::size_t j = 0; j < n2; ++j) {
        const Eigen::Vector3d sum = w + cls.b[j];
        const double K = sum.norm();
        if (K < kappa[i] + cls.kappa2[j] - kNegligibleExponentMargin) continue;
        const double term = cls.phi1[i] * cls.phi2[j] *
                            std::exp(log_z_eval(K) - lz[i] - cls.log_z2[j]);
        Eigen::Vector3d what = Eigen::Vector3d::Zero();
        if (K > 1e-12) what = sum / K;
        const double zlK = log_z_deriv(K);
        const Eigen::Vector3d dt_part =
            zlK * (J[i] * (R.transpose() * what)) + (2.0 * zl[i] / cls.sigma2[i]) * u[i];
        const Eigen::Vector3d dr_part = zlK * (Jl.transpose() * w.cross(what));
        // Cross block enters the objective with factor -2.
        cls_grad_t += -2.0 * term * dt_part;
        cls_grad_r += -2.0 * term * dr_part;
      }
    }

    grad_r += cls.class_weight * cls_grad_r;
    grad_t += cls.class_weight * cls_grad_t;
  }

  Eigen::Matrix<double, 6, 1> g;
  g << grad_r, grad_t;
  return g;
}

double l2_quadrature(const ObjectiveContext& ctx, const Pose& pose, long n_nodes) {
  check_feasible(ctx, pose.t);
  if (n_nodes < 2) throw std::invalid_argument("l2_quadrature: n_nodes too small");
  const Eigen::Matrix3d R = rotation_matrix(pose.r);

  // Transformed model components per class; reject concentrations the grid
  // cannot resolve.
  struct Component {
    Eigen::Vector3d dir;
    double kappa;
    double log_z;
    double phi;
  };
  struct ClassDensities {
    double weight;
    std::vector<Component> model;
    std::vector<Component> image;
  };
  std::vector<ClassDensities> classes;
  for (const auto& cls : ctx.classes()) {
    ClassDensities cd;
    cd.weight = cls.class_weight;
    for (std::size_t i = 0; i < cls.mu.size(); ++i) {
      const Eigen::Vector3d u = cls.mu[i] - pose.t;
      const double kappa = u.squaredNorm() / cls.sigma2[i] + 1.0;
      if (kappa > 100.0) {
        throw std::invalid_argument(
            "l2_quadrature: concentration above 100 cannot be resolved by the grid");
      }
      cd.model.push_back({R * u.normalized(), kappa, log_z_eval(kappa), cls.phi1[i]});
    }
    for (std::size_t j = 0; j < cls.kappa2.size(); ++j) {
      if (cls.kappa2[j] > 100.0) {
        throw std::invalid_argument(
            "l2_quadrature: concentration above 100 cannot be resolved by the grid");
      }
      cd.image.push_back({cls.b[j] / cls.kappa2[j], cls.kappa2[j], cls.log_z2[j],
                          cls.phi2[j]});
    }
    classes.push_back(std::move(cd));
  }

  const long n_theta = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(n_nodes) / 2.0)));
  const long n_phi = 2 * n_theta;
  const double d_theta = M_PI / static_cast<double>(n_theta);
  const double d_phi = 2.0 * M_PI / static_cast<double>(n_phi);
  const double inv_two_pi = 1.0 / (2.0 * M_PI);

  double acc = 0.0;
  for (long it = 0; it < n_theta; ++it) {
    const double theta = (static_cast<double>(it) + 0.5) * d_theta;
    const double sin_theta = std::sin(theta);
    const double cos_theta = std::cos(theta);
    double ring = 0.0;
    for (long ip = 0; ip < n_phi; ++ip) {
      const double phi = (static_cast<double>(ip) + 0.5) * d_phi;
      const Eigen::Vector3d f(sin_theta * std::cos(phi), sin_theta * std::sin(phi),
                              cos_theta);
      for (const auto& cd : classes) {
        double p1 = 0.0;
        for (const Component& c : cd.model) {
          p1 += c.phi * std::exp(c.kappa * c.dir.dot(f) - c.log_z) * inv_two_pi;
        }
        double p2 = 0.0;
        for (const Component& c : cd.image) {
          p2 += c.phi * std::exp(c.kappa * c.dir.dot(f) - c.log_z) * inv_two_pi;
        }
        ring += cd.weight * (p1 - p2) * (p1 - p2);
      }
    }
    acc += ring * sin_theta;
  }
  return acc * d_theta * d_phi;
}

}  // namespace smalign
