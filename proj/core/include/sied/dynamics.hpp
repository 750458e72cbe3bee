#pragma once

#include <Eigen/Dense>
#include <random>

#include "sied/numerics.hpp"

namespace sied {

/// Ego vehicle state: position [m], heading [rad], speed [m/s].
struct EgoState {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
  double v = 0.0;

  Eigen::Vector4d vec() const { return {x, y, phi, v}; }
  static EgoState from_vec(const Eigen::Vector4d& s) {
    return {s(0), s(1), s(2), s(3)};
  }
};

/// Ego control input: acceleration [m/s^2] and steering angle [rad].
struct EgoInput {
  double a = 0.0;
  double delta = 0.0;

  Eigen::Vector2d vec() const { return {a, delta}; }
  static EgoInput from_vec(const Eigen::Vector2d& u) { return {u(0), u(1)}; }
};

/// Obstacle state, same layout as EgoState.
struct ObstacleState {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
  double v = 0.0;

  Eigen::Vector4d vec() const { return {x, y, phi, v}; }
  static ObstacleState from_vec(const Eigen::Vector4d& s) {
    return {s(0), s(1), s(2), s(3)};
  }
};

/// Obstacle control input: acceleration [m/s^2] and slip angle [rad].
/// The slip angle is treated directly as an input so the dynamics stay
/// linear in the input around the zero-input trajectory.
struct ObstacleInput {
  double a = 0.0;
  double beta = 0.0;

  Eigen::Vector2d vec() const { return {a, beta}; }
  static ObstacleInput from_vec(const Eigen::Vector2d& d) {
    return {d(0), d(1)};
  }
};

/// Slip angle of the kinematic bicycle: atan(tan(delta) / 2).
double slip_angle(double delta);

/// Process/measurement noise covariances and the observation matrix.
struct NoiseModel {
  Eigen::Matrix4d Q = Eigen::Matrix4d::Identity();    ///< process, sym PSD
  Eigen::Matrix4d R = Eigen::Matrix4d::Identity();    ///< measurement, sym PD
  Eigen::Matrix4d Phi = Eigen::Matrix4d::Identity();  ///< observation matrix

  /// Throws std::invalid_argument when Q is not PSD or R is not PD.
  void validate() const;
};

/// Draws correlated Gaussian vectors from a covariance factor. Uses the
/// Cholesky factor when the covariance is PD and falls back to an
/// eigendecomposition with negative eigenvalues clipped at zero otherwise.
class GaussianSampler {
 public:
  explicit GaussianSampler(const Eigen::MatrixXd& cov);

  Eigen::VectorXd sample(std::mt19937_64& rng) const;

 private:
  Eigen::MatrixXd factor_;
};

/// zeta = Phi * state + noise.
Eigen::Vector4d observe(const ObstacleState& s, const Eigen::Vector4d& noise,
                        const Eigen::Matrix4d& Phi);

/// Discrete-time kinematic bicycle shared by the ego and obstacle vehicles.
///
/// State: [x, y, phi, v]. With slip angle beta and acceleration a the
/// forward-Euler step over Ts is
///     x'   = x + Ts * v * cos(phi + beta)
///     y'   = y + Ts * v * sin(phi + beta)
///     phi' = phi + Ts * v * sin(beta) / Lc
///     v'   = v + Ts * a
class BicycleKinematics {
 public:
  BicycleKinematics(double ts, double car_length);

  /// One step with (a, beta) inputs. Pure; no noise.
  Eigen::Vector4d step(const Eigen::Vector4d& s, double a, double beta) const;

  /// Ego step; beta derived from the steering angle. Rejects non-finite
  /// state or input with std::invalid_argument.
  EgoState ego_step(const EgoState& s, const EgoInput& u) const;

  /// Jacobians of ego_step w.r.t. state and (a, delta) input.
  void ego_jacobians(const EgoState& s, const EgoInput& u, Eigen::Matrix4d* A,
                     Eigen::Matrix<double, 4, 2>* B) const;

  /// Full nonlinear obstacle step plus additive process noise w.
  ObstacleState obstacle_step(const ObstacleState& s, const ObstacleInput& d,
                              const Eigen::Vector4d& w) const;

  double ts() const { return ts_; }
  double car_length() const { return car_length_; }

 private:
  double ts_;
  double car_length_;
};

/// Obstacle dynamics as seen by the estimator and predictor: a drift map
/// (the zero-input step) plus a linear-in-input term, with analytic
/// linearizations of both.
class ObstacleModel {
 public:
  virtual ~ObstacleModel() = default;

  /// g(xi): the zero-input step.
  virtual Eigen::Vector4d drift(const Eigen::Vector4d& xi) const = 0;

  /// A = d g / d xi at xi.
  virtual Eigen::Matrix4d state_jacobian(const Eigen::Vector4d& xi) const = 0;

  /// B = d step / d input at xi, input = 0. Raises RankDeficiencyError when
  /// the columns are not independent (v = 0 for the bicycle).
  virtual Eigen::Matrix<double, 4, 2> input_jacobian(
      const Eigen::Vector4d& xi) const = 0;

  /// g(xi) + B(xi) * d, the model used for prediction.
  Eigen::Vector4d model_step(const Eigen::Vector4d& xi,
                             const Eigen::Vector2d& d) const;
};

/// Bicycle obstacle model with analytic Jacobians.
class BicycleObstacleModel final : public ObstacleModel {
 public:
  /// Shape of the input Jacobian. kDiscreteConsistent carries the Ts factor
  /// in every row, matching finite differences of the discrete step.
  /// kUnscaledPositionRows omits Ts in the two position rows.
  enum class InputMatrixForm { kDiscreteConsistent, kUnscaledPositionRows };

  explicit BicycleObstacleModel(
      BicycleKinematics kinematics,
      InputMatrixForm form = InputMatrixForm::kDiscreteConsistent);

  Eigen::Vector4d drift(const Eigen::Vector4d& xi) const override;
  Eigen::Matrix4d state_jacobian(const Eigen::Vector4d& xi) const override;
  Eigen::Matrix<double, 4, 2> input_jacobian(
      const Eigen::Vector4d& xi) const override;

  const BicycleKinematics& kinematics() const { return kinematics_; }

 private:
  BicycleKinematics kinematics_;
  InputMatrixForm form_;
};

}  // namespace sied
