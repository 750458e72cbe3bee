#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sied/estimation.hpp"

namespace sied {

/// The ego agent's approximation of the obstacle's control policy.
class BehaviorModel {
 public:
  virtual ~BehaviorModel() = default;
  virtual ObstacleInput predict(const GaussianBelief& belief) const = 0;
};

/// Horizon-indexed forecast of the obstacle. means[0] / covs[0] are the
/// current posterior; length is horizon + 1.
struct PredictedTrajectory {
  std::vector<Eigen::Vector4d> means;
  std::vector<Eigen::Matrix4d> covs;

  int horizon() const { return static_cast<int>(means.size()) - 1; }
};

/// Autoregressive forecast under the behavior model: means through the
/// drift-plus-input model, covariances through A S A^T + Q with A evaluated
/// at the predicted mean. The input-gap covariance is deliberately not
/// folded in; the ambiguity radius accounts for that optimism downstream.
PredictedTrajectory propagate(const GaussianBelief& belief,
                              const ObstacleModel& model,
                              const BehaviorModel& behavior,
                              const Eigen::Matrix4d& Q, int horizon);

/// Scalar Gaussian approximation of the safety loss at one stage.
struct LossDistribution {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Differentiable safety measure s(ego, xi); values <= 0 are safe.
/// Gradient defaults use central differences with step 1e-5 * (1 + |x|).
class SafetyLoss {
 public:
  virtual ~SafetyLoss() = default;

  virtual double value(const Eigen::VectorXd& ego,
                       const Eigen::VectorXd& xi) const = 0;
  virtual Eigen::VectorXd obstacle_gradient(const Eigen::VectorXd& ego,
                                            const Eigen::VectorXd& xi) const;
  virtual Eigen::VectorXd ego_gradient(const Eigen::VectorXd& ego,
                                       const Eigen::VectorXd& xi) const;
};

/// s = -|p_ego - p_obstacle|^2 on the two position components. Analytic
/// gradients.
class SquaredDistanceLoss final : public SafetyLoss {
 public:
  double value(const Eigen::VectorXd& ego,
               const Eigen::VectorXd& xi) const override;
  Eigen::VectorXd obstacle_gradient(const Eigen::VectorXd& ego,
                                    const Eigen::VectorXd& xi) const override;
  Eigen::VectorXd ego_gradient(const Eigen::VectorXd& ego,
                               const Eigen::VectorXd& xi) const override;
};

/// First-order projection of state uncertainty into the loss:
/// mean = s(ego, mu), stddev = sqrt(grad^T Sigma grad). Negative variance
/// from covariance-repair artifacts is clipped at zero.
LossDistribution loss_distribution(const Eigen::VectorXd& ego,
                                   const Eigen::Vector4d& xi_mean,
                                   const Eigen::Matrix4d& xi_cov,
                                   const SafetyLoss& loss);

inline LossDistribution loss_distribution(const EgoState& ego,
                                          const Eigen::Vector4d& xi_mean,
                                          const Eigen::Matrix4d& xi_cov,
                                          const SafetyLoss& loss) {
  return loss_distribution(Eigen::VectorXd(ego.vec()), xi_mean, xi_cov, loss);
}

}  // namespace sied
