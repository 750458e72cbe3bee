#pragma once

#include <Eigen/Dense>

#include "sied/dynamics.hpp"
#include "sied/numerics.hpp"

namespace sied {

/// Gaussian state estimate. Covariance stays symmetric PSD through every
/// recursion (symmetrize, clip eigenvalues in (-1e-9, 0), hard error beyond
/// the repair budget).
struct GaussianBelief {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
};

/// Estimated gap between the obstacle's true input and the behavior model's
/// output, with its covariance.
struct InputGapEstimate {
  Eigen::Vector2d gap = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
};

struct SsieGains {
  Eigen::Matrix<double, 2, 4> gap_gain = Eigen::Matrix<double, 2, 4>::Zero();
  Eigen::Matrix4d state_gain = Eigen::Matrix4d::Zero();
};

struct SsieDiagnostics {
  bool regularized_innovation = false;  ///< Tikhonov fallback in the L solve
};

struct SsieStepResult {
  GaussianBelief posterior;
  InputGapEstimate gap;
  GaussianBelief prior;              ///< one-step prediction before update
  SsieGains gains;
  Eigen::Matrix4d innovation_cov = Eigen::Matrix4d::Zero();
  SsieDiagnostics diagnostics;
};

// Dimension-generic recursions. These are the raw formulas; the filter class
// below composes them for the 4-state obstacle.

/// Innovation covariance Phi A S A^T Phi^T + Phi Q Phi^T + R.
/// Result is symmetrized; fails if its min eigenvalue < 1e-12 * trace.
Eigen::MatrixXd innovation_cov(const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& sigma_prev,
                               const Eigen::MatrixXd& Phi,
                               const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& R);

/// Minimum-variance unbiased gap gain
///     M = (B^T Phi^T P^-1 Phi B)^-1 B^T Phi^T P^-1.
/// Satisfies M Phi B = I within 1e-9; raises RankDeficiencyError when
/// Phi B loses column rank.
Eigen::MatrixXd gap_gain(const Eigen::MatrixXd& B, const Eigen::MatrixXd& Phi,
                         const Eigen::MatrixXd& pbreve);

/// State prediction error covariance
///     (I-BMPhi) A S A^T (I-BMPhi)^T + (I-BMPhi) Q (I-BMPhi)^T + BMRM^TB^T.
Eigen::MatrixXd prediction_cov(const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& sigma_prev,
                               const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& M,
                               const Eigen::MatrixXd& Phi,
                               const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& R);

/// Trace-optimal update gain
///     L = (S Phi^T - BMR)(R + Phi S Phi^T - Phi BMR - R M^T B^T Phi^T)^-1.
/// The bracket can be exactly singular (fully observed square case); a
/// Tikhonov shift is applied when its condition number exceeds 1e12 and
/// *regularized is set.
Eigen::MatrixXd state_gain(const Eigen::MatrixXd& sigma_prior,
                           const Eigen::MatrixXd& B, const Eigen::MatrixXd& M,
                           const Eigen::MatrixXd& Phi,
                           const Eigen::MatrixXd& R,
                           bool* regularized = nullptr);

/// Posterior covariance including both measurement cross terms:
///     (I-LPhi) S (I-LPhi)^T + LRL^T
///   + (I-LPhi) BMRL^T + L R M^T B^T (I-LPhi)^T.
Eigen::MatrixXd posterior_cov(const Eigen::MatrixXd& sigma_prior,
                              const Eigen::MatrixXd& L,
                              const Eigen::MatrixXd& B,
                              const Eigen::MatrixXd& M,
                              const Eigen::MatrixXd& Phi,
                              const Eigen::MatrixXd& R);

/// Simultaneous state and input-gap filter for the 4-state obstacle.
///
/// One step: linearize at the previous posterior, estimate the input gap
/// from the innovation against the behavior-model prediction, fold the gap
/// back into the state prediction, then apply the trace-optimal update.
/// The mean estimate is unbiased regardless of the gap, unlike ekf_step
/// which trusts the behavior model's input.
///
/// Pure function of its inputs; a session (belief plus cached model input)
/// is single-owner.
class SsieFilter {
 public:
  SsieFilter(const ObstacleModel& model, const NoiseModel& noise);

  /// Full SSIE step: gap estimation, state prediction, state estimation.
  SsieStepResult step(const GaussianBelief& prev, const ObstacleInput& d_model,
                      const Eigen::Vector4d& zeta) const;

  /// Classical EKF baseline that takes the behavior-model input at face
  /// value. Joseph-form covariance update.
  GaussianBelief ekf_step(const GaussianBelief& prev,
                          const ObstacleInput& d_model,
                          const Eigen::Vector4d& zeta) const;

  // Components at an explicit linearization, exposed for composition and
  // for the M = 0 / L = 0 test hooks.

  InputGapEstimate estimate_input_gap(const GaussianBelief& prev,
                                      const ObstacleInput& d_model,
                                      const Eigen::Vector4d& zeta,
                                      const Eigen::Matrix<double, 2, 4>& M,
                                      const Eigen::Matrix<double, 4, 2>& B,
                                      const Eigen::Matrix4d& pbreve) const;

  GaussianBelief predict_state(const GaussianBelief& prev,
                               const ObstacleInput& d_model,
                               const InputGapEstimate& gap,
                               const Eigen::Matrix<double, 2, 4>& M,
                               const Eigen::Matrix4d& A,
                               const Eigen::Matrix<double, 4, 2>& B) const;

  GaussianBelief update_state(const GaussianBelief& prior,
                              const Eigen::Vector4d& zeta,
                              const Eigen::Matrix4d& L,
                              const Eigen::Matrix<double, 4, 2>& B,
                              const Eigen::Matrix<double, 2, 4>& M) const;

  const NoiseModel& noise() const { return noise_; }
  const ObstacleModel& model() const { return model_; }

 private:
  const ObstacleModel& model_;
  NoiseModel noise_;
};

}  // namespace sied
