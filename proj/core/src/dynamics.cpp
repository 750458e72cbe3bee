#include "sied/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace sied {

double slip_angle(double delta) { return std::atan(0.5 * std::tan(delta)); }

void NoiseModel::validate() const {
  if (!Q.allFinite() || !R.allFinite() || !Phi.allFinite()) {
    throw std::invalid_argument("NoiseModel: non-finite entries");
  }
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9 ||
      (R - R.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("NoiseModel: Q and R must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eq(symmetrized(Q));
  if (eq.eigenvalues().minCoeff() < -1e-12) {
    throw std::invalid_argument("NoiseModel: Q must be PSD");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> er(symmetrized(R));
  if (er.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("NoiseModel: R must be positive definite");
  }
}

GaussianSampler::GaussianSampler(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(symmetrized(cov));
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
    return;
  }
  // PSD-singular covariance: scale eigenvectors by sqrt of clipped spectrum.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized(cov));
  Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  factor_ = eig.eigenvectors() * clipped.cwiseSqrt().asDiagonal();
}

Eigen::VectorXd GaussianSampler::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(factor_.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z(i) = normal(rng);
  }
  return factor_ * z;
}

Eigen::Vector4d observe(const ObstacleState& s, const Eigen::Vector4d& noise,
                        const Eigen::Matrix4d& Phi) {
  return Phi * s.vec() + noise;
}

BicycleKinematics::BicycleKinematics(double ts, double car_length)
    : ts_(ts), car_length_(car_length) {
  if (!(ts > 0.0) || !(car_length > 0.0)) {
    throw std::invalid_argument("BicycleKinematics: ts and car length > 0");
  }
}

Eigen::Vector4d BicycleKinematics::step(const Eigen::Vector4d& s, double a,
                                        double beta) const {
  const double phi = s(2);
  const double v = s(3);
  Eigen::Vector4d next;
  next(0) = s(0) + ts_ * v * std::cos(phi + beta);
  next(1) = s(1) + ts_ * v * std::sin(phi + beta);
  next(2) = phi + ts_ * v * std::sin(beta) / car_length_;
  next(3) = v + ts_ * a;
  return next;
}

EgoState BicycleKinematics::ego_step(const EgoState& s,
                                     const EgoInput& u) const {
  if (!s.vec().allFinite() || !u.vec().allFinite()) {
    throw std::invalid_argument("ego_step: non-finite state or input");
  }
  return EgoState::from_vec(step(s.vec(), u.a, slip_angle(u.delta)));
}

void BicycleKinematics::ego_jacobians(const EgoState& s, const EgoInput& u,
                                      Eigen::Matrix4d* A,
                                      Eigen::Matrix<double, 4, 2>* B) const {
  const double beta = slip_angle(u.delta);
  const double c = std::cos(s.phi + beta);
  const double sn = std::sin(s.phi + beta);
  if (A != nullptr) {
    A->setIdentity();
    (*A)(0, 2) = -ts_ * s.v * sn;
    (*A)(0, 3) = ts_ * c;
    (*A)(1, 2) = ts_ * s.v * c;
    (*A)(1, 3) = ts_ * sn;
    (*A)(2, 3) = ts_ * std::sin(beta) / car_length_;
  }
  if (B != nullptr) {
    // d beta / d delta via the slip relation.
    const double t = std::tan(u.delta);
    const double sec2 = 1.0 + t * t;
    const double dbeta = 0.5 * sec2 / (1.0 + 0.25 * t * t);
    B->setZero();
    (*B)(0, 1) = -ts_ * s.v * sn * dbeta;
    (*B)(1, 1) = ts_ * s.v * c * dbeta;
    (*B)(2, 1) = ts_ * s.v * std::cos(beta) / car_length_ * dbeta;
    (*B)(3, 0) = ts_;
  }
}

ObstacleState BicycleKinematics::obstacle_step(const ObstacleState& s,
                                               const ObstacleInput& d,
                                               const Eigen::Vector4d& w) const {
  if (!s.vec().allFinite() || !d.vec().allFinite() || !w.allFinite()) {
    throw std::invalid_argument("obstacle_step: non-finite argument");
  }
  return ObstacleState::from_vec(step(s.vec(), d.a, d.beta) + w);
}

Eigen::Vector4d ObstacleModel::model_step(const Eigen::Vector4d& xi,
                                          const Eigen::Vector2d& d) const {
  if (d.isZero(0.0)) {
    return drift(xi);
  }
  return drift(xi) + input_jacobian(xi) * d;
}

BicycleObstacleModel::BicycleObstacleModel(BicycleKinematics kinematics,
                                           InputMatrixForm form)
    : kinematics_(kinematics), form_(form) {}

Eigen::Vector4d BicycleObstacleModel::drift(const Eigen::Vector4d& xi) const {
  return kinematics_.step(xi, 0.0, 0.0);
}

Eigen::Matrix4d BicycleObstacleModel::state_jacobian(
    const Eigen::Vector4d& xi) const {
  const double ts = kinematics_.ts();
  const double phi = xi(2);
  const double v = xi(3);
  Eigen::Matrix4d A = Eigen::Matrix4d::Identity();
  A(0, 2) = -ts * v * std::sin(phi);
  A(0, 3) = ts * std::cos(phi);
  A(1, 2) = ts * v * std::cos(phi);
  A(1, 3) = ts * std::sin(phi);
  // heading row: d phi' / d v = Ts * sin(beta)/Lc = 0 at beta = 0
  return A;
}

Eigen::Matrix<double, 4, 2> BicycleObstacleModel::input_jacobian(
    const Eigen::Vector4d& xi) const {
  const double ts = kinematics_.ts();
  const double phi = xi(2);
  const double v = xi(3);
  if (v == 0.0) {
    throw RankDeficiencyError(
        "input_jacobian: slip column vanishes at v = 0");
  }
  const double pos_scale =
      form_ == InputMatrixForm::kDiscreteConsistent ? ts : 1.0;
  Eigen::Matrix<double, 4, 2> B = Eigen::Matrix<double, 4, 2>::Zero();
  B(0, 1) = -pos_scale * v * std::sin(phi);
  B(1, 1) = pos_scale * v * std::cos(phi);
  B(2, 1) = ts * v / kinematics_.car_length();
  B(3, 0) = ts;
  return B;
}

}  // namespace sied
