#include <doctest.h>

#include <random>

#include "sied/prediction.hpp"
#include "support/oracles.hpp"

using namespace sied;

namespace {

class ConstantBehavior final : public BehaviorModel {
 public:
  explicit ConstantBehavior(ObstacleInput d) : d_(d) {}
  ObstacleInput predict(const GaussianBelief&) const override { return d_; }

 private:
  ObstacleInput d_;
};

// delegates value() so the base-class finite-difference gradient runs
class FdOnlyLoss final : public SafetyLoss {
 public:
  double value(const Eigen::VectorXd& ego,
               const Eigen::VectorXd& xi) const override {
    return inner_.value(ego, xi);
  }

 private:
  SquaredDistanceLoss inner_;
};

}  // namespace

TEST_SUITE("prediction") {

TEST_CASE("stationary obstacle under zero-input behavior stays put") {
  const BicycleKinematics kin(0.1, 4.611);
  const BicycleObstacleModel model(kin);
  GaussianBelief belief;
  belief.mean = Eigen::Vector4d(5.0, -3.0, 0.8, 0.0);  // v = 0
  belief.cov = 0.1 * Eigen::Matrix4d::Identity();
  const ConstantBehavior behavior({0.0, 0.0});
  const PredictedTrajectory traj =
      propagate(belief, model, behavior, 0.01 * Eigen::Matrix4d::Identity(), 10);
  REQUIRE(traj.horizon() == 10);
  for (const auto& mean : traj.means) {
    CHECK((mean - belief.mean).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("first predicted mean is the one-step model rollout") {
  const BicycleKinematics kin(0.1, 4.611);
  const BicycleObstacleModel model(kin);
  GaussianBelief belief;
  belief.mean = Eigen::Vector4d(1.0, 2.0, 0.2, 8.0);
  belief.cov = 0.05 * Eigen::Matrix4d::Identity();
  const ObstacleInput d{0.5, 0.08};
  const ConstantBehavior behavior(d);
  const PredictedTrajectory traj =
      propagate(belief, model, behavior, 0.01 * Eigen::Matrix4d::Identity(), 1);
  CHECK((traj.means[0] - belief.mean).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::Vector4d expected = model.model_step(belief.mean, d.vec());
  CHECK((traj.means[1] - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("two-step covariance matches the hand-composed recursion") {
  std::mt19937_64 rng(21);
  const Eigen::Matrix4d A = oracles::random_matrix(rng, 4, 4);
  const Eigen::Matrix<double, 4, 2> B =
      oracles::random_full_column_rank(rng, 4, 2);
  const oracles::LinearObstacleModel model(A, B);
  const Eigen::Matrix4d Q = oracles::random_spd(rng, 4, 0.1, 0.5);

  GaussianBelief belief;
  belief.mean = Eigen::Vector4d(1.0, 0.0, 0.0, 2.0);
  belief.cov = oracles::random_spd(rng, 4, 0.1, 1.0);
  const ConstantBehavior behavior({0.0, 0.0});

  const PredictedTrajectory traj = propagate(belief, model, behavior, Q, 2);
  const Eigen::MatrixXd step1 =
      oracles::mul(oracles::mul(A, belief.cov), oracles::tr(A)) + Q;
  const Eigen::MatrixXd step2 =
      oracles::mul(oracles::mul(A, step1), oracles::tr(A)) + Q;
  CHECK((traj.covs[2] - 0.5 * (step2 + oracles::tr(step2)))
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("trace grows along the horizon for expansive dynamics") {
  const Eigen::Matrix4d A = 1.02 * Eigen::Matrix4d::Identity();
  const Eigen::Matrix<double, 4, 2> B = [] {
    Eigen::Matrix<double, 4, 2> b = Eigen::Matrix<double, 4, 2>::Zero();
    b(3, 0) = 0.1;
    b(2, 1) = 0.1;
    return b;
  }();
  const oracles::LinearObstacleModel model(A, B);
  GaussianBelief belief;
  belief.cov = 0.2 * Eigen::Matrix4d::Identity();
  const ConstantBehavior behavior({0.0, 0.0});
  const PredictedTrajectory traj = propagate(
      belief, model, behavior, 0.05 * Eigen::Matrix4d::Identity(), 20);
  for (int l = 1; l <= 20; ++l) {
    CHECK(traj.covs[l].trace() > traj.covs[l - 1].trace());
  }
}

TEST_CASE("loss distribution with zero covariance is deterministic") {
  const SquaredDistanceLoss loss;
  const Eigen::VectorXd ego = Eigen::Vector4d(0.0, 0.0, 0.0, 0.0);
  const LossDistribution dist = loss_distribution(
      ego, Eigen::Vector4d(3.0, 4.0, 0.0, 0.0), Eigen::Matrix4d::Zero(), loss);
  CHECK(dist.stddev == 0.0);
  CHECK(dist.mean == doctest::Approx(-25.0));
}

TEST_CASE("loss distribution tracks sampled statistics in the linear regime") {
  const SquaredDistanceLoss loss;
  const Eigen::VectorXd ego = Eigen::Vector4d(0.0, 0.0, 0.0, 0.0);
  const Eigen::Vector4d mean(6.0, -8.0, 0.0, 0.0);
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  cov(0, 0) = 0.01;
  cov(1, 1) = 0.02;
  cov(0, 1) = cov(1, 0) = 0.004;

  const LossDistribution dist = loss_distribution(ego, mean, cov, loss);

  std::mt19937_64 rng(22);
  const GaussianSampler sampler(cov);
  const int n = 200000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector4d xi = mean + sampler.sample(rng).head<4>();
    const double s = loss.value(ego, xi);
    acc += s;
    acc2 += s * s;
  }
  const double emp_mean = acc / n;
  const double emp_std = std::sqrt(acc2 / n - emp_mean * emp_mean);
  CHECK(std::abs(emp_mean - dist.mean) / std::abs(dist.mean) < 0.05);
  CHECK(std::abs(emp_std - dist.stddev) / dist.stddev < 0.05);
}

TEST_CASE("loss spread is invariant under rotations fixing the gradient") {
  const SquaredDistanceLoss loss;
  std::mt19937_64 rng(23);
  const Eigen::VectorXd ego = Eigen::Vector4d(1.0, -2.0, 0.0, 0.0);
  const Eigen::Vector4d mean(5.0, 3.0, 0.4, 6.0);
  const Eigen::Matrix4d cov = oracles::random_spd(rng, 4, 0.1, 2.0);
  const Eigen::Vector4d g = loss.obstacle_gradient(ego, mean);

  // orthonormal basis with u1 along the gradient
  Eigen::MatrixXd basis(4, 4);
  basis.col(0) = g.normalized();
  int filled = 1;
  while (filled < 4) {
    Eigen::Vector4d cand = oracles::random_matrix(rng, 4, 1);
    for (int i = 0; i < filled; ++i) {
      cand -= basis.col(i).dot(cand) * basis.col(i);
    }
    if (cand.norm() > 1e-3) {
      basis.col(filled++) = cand.normalized();
    }
  }
  const double baseline = loss_distribution(ego, mean, cov, loss).stddev;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd g3 = oracles::random_matrix(rng, 3, 3);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g3);
    Eigen::MatrixXd rot3 = qr.householderQ();
    Eigen::Matrix4d block = Eigen::Matrix4d::Identity();
    block.bottomRightCorner(3, 3) = rot3;
    const Eigen::Matrix4d rot = basis * block * basis.transpose();
    CHECK(((rot * g) - g).cwiseAbs().maxCoeff() < 1e-9);
    const double rotated =
        loss_distribution(ego, mean, rot * cov * rot.transpose(), loss).stddev;
    CHECK(rotated == doctest::Approx(baseline).epsilon(1e-9));
  }
}

TEST_CASE("analytic loss gradients match finite differences") {
  const SquaredDistanceLoss analytic;
  const FdOnlyLoss fd;
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd ego =
        Eigen::Vector4d(u(rng), u(rng), u(rng), u(rng));
    Eigen::Vector4d xi(u(rng), u(rng), u(rng), u(rng));
    if ((ego.head<2>() - xi.head<2>()).norm() < 0.5) {
      xi(0) += 2.0;  // keep away from the stationary point
    }
    const Eigen::VectorXd ga = analytic.obstacle_gradient(ego, xi);
    const Eigen::VectorXd gf = fd.obstacle_gradient(ego, xi);
    CHECK((ga - gf).cwiseAbs().maxCoeff() /
              std::max(1.0, ga.cwiseAbs().maxCoeff()) < 1e-6);
    const Eigen::VectorXd ea = analytic.ego_gradient(ego, xi);
    const Eigen::VectorXd ef = fd.ego_gradient(ego, xi);
    CHECK((ea - ef).cwiseAbs().maxCoeff() /
              std::max(1.0, ea.cwiseAbs().maxCoeff()) < 1e-6);
  }
}

}  // TEST_SUITE
