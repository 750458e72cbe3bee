#include "sied/estimation.hpp"

#include <cmath>
#include <stdexcept>

namespace sied {

namespace {

// Repair budget for the prediction/update covariance recursions.
constexpr double kCovRepairTol = 1e-6;

void check_dims(const Eigen::MatrixXd& m, Eigen::Index rows,
                Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument(std::string(name) + ": dimension mismatch");
  }
}

}  // namespace

Eigen::MatrixXd innovation_cov(const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& sigma_prev,
                               const Eigen::MatrixXd& Phi,
                               const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& R) {
  const Eigen::Index n = A.rows();
  check_dims(sigma_prev, n, n, "innovation_cov: sigma_prev");
  check_dims(Q, n, n, "innovation_cov: Q");
  const Eigen::MatrixXd pa = Phi * A;
  Eigen::MatrixXd p = symmetrized(pa * sigma_prev * pa.transpose() +
                                  Phi * Q * Phi.transpose() + R);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p);
  if (eig.eigenvalues().minCoeff() < 1e-12 * p.trace()) {
    throw CovarianceError("innovation_cov: result not positive definite");
  }
  return p;
}

Eigen::MatrixXd gap_gain(const Eigen::MatrixXd& B, const Eigen::MatrixXd& Phi,
                         const Eigen::MatrixXd& pbreve) {
  const Eigen::MatrixXd H = Phi * B;  // n_zeta x n_d
  Eigen::LLT<Eigen::MatrixXd> pllt(symmetrized(pbreve));
  if (pllt.info() != Eigen::Success) {
    throw CovarianceError("gap_gain: innovation covariance not PD");
  }
  const Eigen::MatrixXd pinv_h = pllt.solve(H);
  const Eigen::MatrixXd gram = H.transpose() * pinv_h;  // B^T Phi^T P^-1 Phi B
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  lu.setThreshold(1e-10);
  if (lu.rank() < gram.rows()) {
    throw RankDeficiencyError("gap_gain: Phi * B has deficient column rank");
  }
  const Eigen::MatrixXd M = lu.solve(pinv_h.transpose());
  const Eigen::MatrixXd residual =
      M * H - Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
  if (residual.cwiseAbs().maxCoeff() > 1e-9) {
    throw RankDeficiencyError("gap_gain: unbiasedness constraint violated");
  }
  return M;
}

Eigen::MatrixXd prediction_cov(const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& sigma_prev,
                               const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& M,
                               const Eigen::MatrixXd& Phi,
                               const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& R) {
  const Eigen::Index n = A.rows();
  const Eigen::MatrixXd corr =
      Eigen::MatrixXd::Identity(n, n) - B * M * Phi;  // I - BMPhi
  const Eigen::MatrixXd ca = corr * A;
  const Eigen::MatrixXd bm = B * M;
  Eigen::MatrixXd cov = ca * sigma_prev * ca.transpose() +
                        corr * Q * corr.transpose() +
                        bm * R * bm.transpose();
  return repair_covariance(cov, kCovRepairTol, "prediction_cov");
}

Eigen::MatrixXd state_gain(const Eigen::MatrixXd& sigma_prior,
                           const Eigen::MatrixXd& B, const Eigen::MatrixXd& M,
                           const Eigen::MatrixXd& Phi, const Eigen::MatrixXd& R,
                           bool* regularized) {
  const Eigen::MatrixXd bmr = B * M * R;
  const Eigen::MatrixXd bracket = R + Phi * sigma_prior * Phi.transpose() -
                                  Phi * bmr - bmr.transpose() * Phi.transpose();
  const Eigen::MatrixXd numerator = sigma_prior * Phi.transpose() - bmr;
  // L * bracket = numerator, solved through the transposed system.
  return solve_symmetric(bracket, numerator.transpose(), regularized)
      .transpose();
}

Eigen::MatrixXd posterior_cov(const Eigen::MatrixXd& sigma_prior,
                              const Eigen::MatrixXd& L,
                              const Eigen::MatrixXd& B,
                              const Eigen::MatrixXd& M,
                              const Eigen::MatrixXd& Phi,
                              const Eigen::MatrixXd& R) {
  const Eigen::Index n = sigma_prior.rows();
  const Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(n, n) - L * Phi;
  const Eigen::MatrixXd cross = corr * B * M * R * L.transpose();
  Eigen::MatrixXd cov = corr * sigma_prior * corr.transpose() +
                        L * R * L.transpose() + cross + cross.transpose();
  return repair_covariance(cov, kCovRepairTol, "posterior_cov");
}

SsieFilter::SsieFilter(const ObstacleModel& model, const NoiseModel& noise)
    : model_(model), noise_(noise) {
  noise_.validate();
}

InputGapEstimate SsieFilter::estimate_input_gap(
    const GaussianBelief& prev, const ObstacleInput& d_model,
    const Eigen::Vector4d& zeta, const Eigen::Matrix<double, 2, 4>& M,
    const Eigen::Matrix<double, 4, 2>& B, const Eigen::Matrix4d& pbreve) const {
  const Eigen::Vector4d zeta_pred =
      noise_.Phi * (model_.drift(prev.mean) + B * d_model.vec());
  InputGapEstimate gap;
  gap.gap = M * (zeta - zeta_pred);
  gap.cov = repair_covariance(M * pbreve * M.transpose(), 1e-9,
                              "estimate_input_gap");
  return gap;
}

GaussianBelief SsieFilter::predict_state(
    const GaussianBelief& prev, const ObstacleInput& d_model,
    const InputGapEstimate& gap, const Eigen::Matrix<double, 2, 4>& M,
    const Eigen::Matrix4d& A, const Eigen::Matrix<double, 4, 2>& B) const {
  GaussianBelief prior;
  prior.mean = model_.drift(prev.mean) + B * (d_model.vec() + gap.gap);
  prior.cov = prediction_cov(A, prev.cov, B, M, noise_.Phi, noise_.Q, noise_.R);
  return prior;
}

GaussianBelief SsieFilter::update_state(
    const GaussianBelief& prior, const Eigen::Vector4d& zeta,
    const Eigen::Matrix4d& L, const Eigen::Matrix<double, 4, 2>& B,
    const Eigen::Matrix<double, 2, 4>& M) const {
  GaussianBelief post;
  post.mean = prior.mean + L * (zeta - noise_.Phi * prior.mean);
  post.cov = posterior_cov(prior.cov, L, B, M, noise_.Phi, noise_.R);
  return post;
}

SsieStepResult SsieFilter::step(const GaussianBelief& prev,
                                const ObstacleInput& d_model,
                                const Eigen::Vector4d& zeta) const {
  SsieStepResult r;
  const Eigen::Matrix4d A = model_.state_jacobian(prev.mean);
  const Eigen::Matrix<double, 4, 2> B = model_.input_jacobian(prev.mean);
  r.innovation_cov =
      innovation_cov(A, prev.cov, noise_.Phi, noise_.Q, noise_.R);
  r.gains.gap_gain = gap_gain(B, noise_.Phi, r.innovation_cov);
  r.gap = estimate_input_gap(prev, d_model, zeta, r.gains.gap_gain, B,
                             r.innovation_cov);
  r.prior = predict_state(prev, d_model, r.gap, r.gains.gap_gain, A, B);
  r.gains.state_gain =
      state_gain(r.prior.cov, B, r.gains.gap_gain, noise_.Phi, noise_.R,
                 &r.diagnostics.regularized_innovation);
  r.posterior =
      update_state(r.prior, zeta, r.gains.state_gain, B, r.gains.gap_gain);
  return r;
}

GaussianBelief SsieFilter::ekf_step(const GaussianBelief& prev,
                                    const ObstacleInput& d_model,
                                    const Eigen::Vector4d& zeta) const {
  const Eigen::Matrix4d A = model_.state_jacobian(prev.mean);
  const Eigen::Vector4d prior_mean = model_.model_step(prev.mean, d_model.vec());
  const Eigen::Matrix4d prior_cov = repair_covariance(
      A * prev.cov * A.transpose() + noise_.Q, kCovRepairTol, "ekf prior");

  const Eigen::Matrix4d bracket =
      noise_.R + noise_.Phi * prior_cov * noise_.Phi.transpose();
  const Eigen::Matrix4d K =
      solve_symmetric(bracket, (prior_cov * noise_.Phi.transpose()).transpose())
          .transpose();

  GaussianBelief post;
  post.mean = prior_mean + K * (zeta - noise_.Phi * prior_mean);
  const Eigen::Matrix4d corr = Eigen::Matrix4d::Identity() - K * noise_.Phi;
  post.cov = repair_covariance(
      corr * prior_cov * corr.transpose() + K * noise_.R * K.transpose(),
      kCovRepairTol, "ekf posterior");
  return post;
}

}  // namespace sied
