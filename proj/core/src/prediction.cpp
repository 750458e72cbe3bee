#include "sied/prediction.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace sied {

namespace {

Eigen::VectorXd central_difference(
    const Eigen::VectorXd& at,
    const std::function<double(const Eigen::VectorXd&)>& f) {
  Eigen::VectorXd grad(at.size());
  Eigen::VectorXd probe = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(at(i)));
    probe(i) = at(i) + h;
    const double hi = f(probe);
    probe(i) = at(i) - h;
    const double lo = f(probe);
    probe(i) = at(i);
    grad(i) = (hi - lo) / (2.0 * h);
  }
  return grad;
}

}  // namespace

PredictedTrajectory propagate(const GaussianBelief& belief,
                              const ObstacleModel& model,
                              const BehaviorModel& behavior,
                              const Eigen::Matrix4d& Q, int horizon) {
  if (horizon < 1) {
    throw std::invalid_argument("propagate: horizon must be >= 1");
  }
  PredictedTrajectory traj;
  traj.means.reserve(horizon + 1);
  traj.covs.reserve(horizon + 1);
  traj.means.push_back(belief.mean);
  traj.covs.push_back(belief.cov);
  GaussianBelief current = belief;
  for (int l = 1; l <= horizon; ++l) {
    const ObstacleInput d = behavior.predict(current);
    const Eigen::Matrix4d A = model.state_jacobian(current.mean);
    current.mean = model.model_step(current.mean, d.vec());
    current.cov = repair_covariance(A * current.cov * A.transpose() + Q, 1e-9,
                                    "propagate");
    traj.means.push_back(current.mean);
    traj.covs.push_back(current.cov);
  }
  return traj;
}

Eigen::VectorXd SafetyLoss::obstacle_gradient(const Eigen::VectorXd& ego,
                                              const Eigen::VectorXd& xi) const {
  return central_difference(
      xi, [&](const Eigen::VectorXd& p) { return value(ego, p); });
}

Eigen::VectorXd SafetyLoss::ego_gradient(const Eigen::VectorXd& ego,
                                         const Eigen::VectorXd& xi) const {
  return central_difference(
      ego, [&](const Eigen::VectorXd& p) { return value(p, xi); });
}

double SquaredDistanceLoss::value(const Eigen::VectorXd& ego,
                                  const Eigen::VectorXd& xi) const {
  const Eigen::Vector2d q = ego.head<2>() - xi.head<2>();
  return -q.squaredNorm();
}

Eigen::VectorXd SquaredDistanceLoss::obstacle_gradient(
    const Eigen::VectorXd& ego, const Eigen::VectorXd& xi) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(xi.size());
  grad.head<2>() = 2.0 * (ego.head<2>() - xi.head<2>());
  return grad;
}

Eigen::VectorXd SquaredDistanceLoss::ego_gradient(
    const Eigen::VectorXd& ego, const Eigen::VectorXd& xi) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(ego.size());
  grad.head<2>() = -2.0 * (ego.head<2>() - xi.head<2>());
  return grad;
}

LossDistribution loss_distribution(const Eigen::VectorXd& ego,
                                   const Eigen::Vector4d& xi_mean,
                                   const Eigen::Matrix4d& xi_cov,
                                   const SafetyLoss& loss) {
  LossDistribution out;
  out.mean = loss.value(ego, xi_mean);
  const Eigen::VectorXd grad = loss.obstacle_gradient(ego, xi_mean);
  const double variance = grad.dot(xi_cov * grad);
  out.stddev = std::sqrt(std::max(variance, 0.0));
  return out;
}

}  // namespace sied
