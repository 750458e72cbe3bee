#include <doctest.h>

#include <random>

#include "sied/mpc.hpp"
#include "support/oracles.hpp"

using namespace sied;

namespace {

// loose-bounds double-integrator tracking problem
OcpProblem toy_problem(const oracles::DoubleIntegratorModel& model,
                       std::vector<Eigen::VectorXd>& refs_storage, int L) {
  OcpProblem p;
  p.model = &model;
  p.initial_state = Eigen::Vector2d(0.0, 0.0);
  p.previous_input = Eigen::VectorXd::Constant(1, 0.3);
  p.horizon = L;
  p.state_weight = Eigen::Vector2d(1.0, 0.1).asDiagonal();
  p.rate_weight = Eigen::MatrixXd::Constant(1, 1, 0.5);
  p.terminal_weight = Eigen::Vector2d(2.0, 0.2).asDiagonal();
  refs_storage.clear();
  for (int l = 0; l <= L; ++l) {
    refs_storage.push_back(Eigen::Vector2d(0.1 * l, 1.0));
  }
  p.reference = refs_storage;
  p.bounds.lower = Eigen::VectorXd::Constant(1, -1e9);
  p.bounds.upper = Eigen::VectorXd::Constant(1, 1e9);
  p.bounds.rate =
      Eigen::VectorXd::Constant(1, std::numeric_limits<double>::infinity());
  return p;
}

const BicycleKinematics kin(0.1, 4.611);
const BicycleControlModel ego_model(kin);
const SquaredDistanceLoss loss;

OcpConfig bike_config(int L = 20) {
  OcpConfig cfg;
  cfg.horizon = L;
  cfg.reference.clear();
  for (int l = 0; l <= L; ++l) {
    // straight northbound reference at 8 m/s
    cfg.reference.push_back(Eigen::Vector4d(2.5, 0.8 * l, M_PI / 2.0, 8.0));
  }
  return cfg;
}

PredictedTrajectory static_obstacle(const Eigen::Vector4d& mean, int L,
                                    double var = 0.0) {
  PredictedTrajectory traj;
  for (int l = 0; l <= L; ++l) {
    traj.means.push_back(mean);
    traj.covs.push_back(var * Eigen::Matrix4d::Identity());
  }
  return traj;
}

}  // namespace

TEST_SUITE("mpc") {

TEST_CASE("toy tracking problem matches the dense KKT oracle") {
  const oracles::DoubleIntegratorModel model(0.1);
  std::vector<Eigen::VectorXd> refs;
  const int L = 20;
  const OcpProblem p = toy_problem(model, refs, L);

  const OcpSolver solver;
  const OcpSolution sol = solver.solve(p);
  CHECK(sol.status == SolveStatus::kOptimal);
  CHECK(sol.kkt_residual < 1e-6);

  Eigen::MatrixXd A, B;
  model.jacobians(p.initial_state, Eigen::VectorXd::Zero(1), &A, &B);
  const oracles::QpSolution qp = oracles::kkt_tracking_qp(
      A, B, p.initial_state, p.previous_input, p.state_weight, p.rate_weight,
      p.terminal_weight, refs, L);

  for (int l = 0; l < L; ++l) {
    CHECK(std::abs(sol.inputs[l](0) - qp.inputs(l)) < 1e-4);
  }
  CHECK(sol.cost == doctest::Approx(qp.cost).epsilon(1e-6));
}

TEST_CASE("rolled-out states satisfy the dynamics to machine precision") {
  const oracles::DoubleIntegratorModel model(0.1);
  std::vector<Eigen::VectorXd> refs;
  const OcpProblem p = toy_problem(model, refs, 15);
  const OcpSolution sol = OcpSolver().solve(p);
  for (int l = 0; l < 15; ++l) {
    const Eigen::VectorXd next = model.step(sol.states[l], sol.inputs[l]);
    CHECK((next - sol.states[l + 1]).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("warm start at the optimum is a fixed point") {
  const oracles::DoubleIntegratorModel model(0.1);
  std::vector<Eigen::VectorXd> refs;
  const OcpProblem p = toy_problem(model, refs, 20);
  const OcpSolver solver;
  const OcpSolution first = solver.solve(p);
  const OcpSolution second = solver.solve(p, &first);
  CHECK(second.iterations <= 2);
  CHECK(std::abs(second.cost - first.cost) < 1e-8);
}

TEST_CASE("receding-horizon shift repeats the last input") {
  std::vector<Eigen::VectorXd> inputs;
  for (int i = 0; i < 4; ++i) {
    inputs.push_back(Eigen::VectorXd::Constant(1, static_cast<double>(i)));
  }
  const auto shifted = shift_inputs(inputs);
  REQUIRE(shifted.size() == 4);
  CHECK(shifted[0](0) == 1.0);
  CHECK(shifted[2](0) == 3.0);
  CHECK(shifted[3](0) == 3.0);
}

TEST_CASE("constraint row equals the closed-form risk bound") {
  const OcpConfig cfg = bike_config();
  const Eigen::Vector4d obs_mean(2.0, 10.0, -M_PI / 2.0, 8.0);
  Eigen::Matrix4d obs_cov = Eigen::Matrix4d::Zero();
  obs_cov(0, 0) = 0.4;
  obs_cov(1, 1) = 0.6;
  obs_cov(0, 1) = obs_cov(1, 0) = 0.1;
  PredictedTrajectory traj = static_obstacle(obs_mean, cfg.horizon);
  for (auto& c : traj.covs) c = obs_cov;

  const double theta = 1.7;
  const EgoState ego{2.5, 0.0, M_PI / 2.0, 8.0};
  const OcpProblem p =
      assemble(ego, traj, theta, cfg, ego_model, loss, EgoInput{});

  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-15.0, 15.0);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd x = Eigen::Vector4d(u(rng), u(rng), 1.2, 7.0);
    const int l = 1 + static_cast<int>(std::abs(u(rng))) % cfg.horizon;
    const LossDistribution dist = loss_distribution(x, obs_mean, obs_cov, loss);
    const double expected = dr_cvar_bound(dist, theta, cfg.alpha);
    CHECK(p.constraint_value(l, x) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("zero radius and zero covariance reduce to the deterministic row") {
  const OcpConfig cfg = bike_config();
  const Eigen::Vector4d obs_mean(0.0, 12.0, 0.0, 5.0);
  const PredictedTrajectory traj = static_obstacle(obs_mean, cfg.horizon, 0.0);
  const EgoState ego{2.5, 0.0, M_PI / 2.0, 8.0};
  const OcpProblem p =
      assemble(ego, traj, 0.0, cfg, ego_model, loss, EgoInput{});
  const Eigen::VectorXd x = Eigen::Vector4d(1.0, 9.0, 1.0, 6.0);
  CHECK(p.constraint_value(5, x) ==
        doctest::Approx(loss.value(x, obs_mean)).epsilon(1e-12));
}

TEST_CASE("mean-mpc rows drop the risk terms, structure is unchanged") {
  const OcpConfig cfg = bike_config();
  const Eigen::Vector4d obs_mean(2.0, 14.0, -M_PI / 2.0, 8.0);
  PredictedTrajectory traj = static_obstacle(obs_mean, cfg.horizon, 0.3);
  const EgoState ego{2.5, 0.0, M_PI / 2.0, 8.0};

  const OcpProblem dr =
      assemble(ego, traj, 0.0, cfg, ego_model, loss, EgoInput{});
  const OcpProblem mean =
      mean_mpc_assemble(ego, traj, cfg, ego_model, loss, EgoInput{});

  CHECK(mean.horizon == dr.horizon);
  CHECK(mean.reference.size() == dr.reference.size());
  CHECK(mean.safety.size() == dr.safety.size());
  CHECK(mean.gamma == 0.0);
  CHECK(mean.theta_margin == 0.0);

  // with zero covariance and theta = 0 the two agree row by row
  PredictedTrajectory flat = static_obstacle(obs_mean, cfg.horizon, 0.0);
  const OcpProblem dr0 =
      assemble(ego, flat, 0.0, cfg, ego_model, loss, EgoInput{});
  const OcpProblem mean0 =
      mean_mpc_assemble(ego, flat, cfg, ego_model, loss, EgoInput{});
  const Eigen::VectorXd probe = Eigen::Vector4d(1.5, 8.0, 1.3, 7.5);
  for (int l = 1; l <= cfg.horizon; ++l) {
    CHECK(dr0.constraint_value(l, probe) ==
          doctest::Approx(mean0.constraint_value(l, probe)).epsilon(1e-12));
  }
}

TEST_CASE("no obstacle solves to the unconstrained tracking optimum") {
  OcpConfig cfg = bike_config(15);
  const EgoState ego{2.5, 0.0, M_PI / 2.0, 8.0};
  const OcpProblem tracking =
      tracking_assemble(ego, cfg, ego_model, EgoInput{0.0, 0.0});
  const OcpSolution track_sol = OcpSolver().solve(tracking);

  // obstacle far away: identical solution
  const PredictedTrajectory far =
      static_obstacle(Eigen::Vector4d(500.0, 500.0, 0.0, 0.0), cfg.horizon);
  const OcpProblem with_far =
      assemble(ego, far, 1.0, cfg, ego_model, loss, EgoInput{0.0, 0.0});
  const OcpSolution far_sol = OcpSolver().solve(with_far);

  CHECK(track_sol.status == SolveStatus::kOptimal);
  CHECK(far_sol.status == SolveStatus::kOptimal);
  for (int l = 0; l < cfg.horizon; ++l) {
    CHECK((track_sol.inputs[l] - far_sol.inputs[l]).cwiseAbs().maxCoeff() <
          1e-6);
  }
}

TEST_CASE("infeasibly tight rows report relaxed status and positive slack") {
  OcpConfig cfg = bike_config(10);
  const EgoState ego{2.5, 0.0, M_PI / 2.0, 8.0};
  // obstacle parked on the reference with an enormous margin requirement
  PredictedTrajectory traj =
      static_obstacle(Eigen::Vector4d(2.5, 4.0, M_PI / 2.0, 0.0), cfg.horizon);
  const OcpProblem p =
      assemble(ego, traj, 100.0, cfg, ego_model, loss, EgoInput{});
  const OcpSolution sol = OcpSolver().solve(p);
  CHECK(sol.slack > 0.0);
  CHECK((sol.status == SolveStatus::kInfeasibleRelaxed ||
         sol.status == SolveStatus::kMaxIterations));
}

TEST_CASE("returned inputs always respect bounds and the steering rate") {
  OcpConfig cfg = bike_config(25);
  // aggressive reference: hard left turn at high speed
  cfg.reference.clear();
  for (int l = 0; l <= 25; ++l) {
    cfg.reference.push_back(
        Eigen::Vector4d(2.5 - 2.0 * l, 0.8 * l, M_PI, 12.0));
  }
  const EgoState ego{2.5, 0.0, M_PI / 2.0, 8.0};
  const PredictedTrajectory traj =
      static_obstacle(Eigen::Vector4d(-5.0, 10.0, 0.0, 3.0), cfg.horizon, 0.5);
  const EgoInput prev{0.0, 0.01};
  const OcpProblem p = assemble(ego, traj, 3.0, cfg, ego_model, loss, prev);
  const OcpSolution sol = OcpSolver().solve(p);

  double last_delta = prev.delta;
  for (const auto& u : sol.inputs) {
    CHECK(std::abs(u(0)) <= 3.0 + 1e-12);
    CHECK(std::abs(u(1)) <= 1.22 + 1e-12);
    CHECK(std::abs(u(1) - last_delta) <= 0.05 + 1e-12);
    last_delta = u(1);
  }
}

TEST_CASE("solution improves on the projected initial iterate") {
  OcpConfig cfg = bike_config(20);
  const EgoState ego{0.0, 0.0, 0.3, 6.0};
  const PredictedTrajectory traj =
      static_obstacle(Eigen::Vector4d(3.0, 8.0, 0.0, 2.0), cfg.horizon, 0.2);
  const OcpProblem p =
      assemble(ego, traj, 2.0, cfg, ego_model, loss, EgoInput{});
  const OcpSolution sol = OcpSolver().solve(p);

  // evaluate the zero-input iterate the solver starts from
  Eigen::VectorXd x = ego.vec();
  double zero_cost = 0.0;
  Eigen::Vector2d u_prev(0.0, 0.0);
  for (int l = 0; l < cfg.horizon; ++l) {
    const Eigen::Vector4d err = x - Eigen::Vector4d(cfg.reference[l]);
    zero_cost += err.dot(cfg.state_weight * err);
    x = ego_model.step(x, Eigen::Vector2d(0.0, 0.0));
  }
  const Eigen::Vector4d terr = x - Eigen::Vector4d(cfg.reference[cfg.horizon]);
  zero_cost += terr.dot(cfg.terminal_weight * terr);
  CHECK(sol.cost < zero_cost);
}

TEST_CASE("mean planner passes closer to the obstacle than the robust one") {
  OcpConfig cfg = bike_config(40);
  const EgoState ego{2.5, 0.0, M_PI / 2.0, 8.0};
  // head-on: obstacle sits right on the reference path ahead
  PredictedTrajectory traj = static_obstacle(
      Eigen::Vector4d(2.5, 20.0, -M_PI / 2.0, 0.0), cfg.horizon, 0.4);
  const OcpProblem robust =
      assemble(ego, traj, 4.0, cfg, ego_model, loss, EgoInput{});
  const OcpProblem mean =
      mean_mpc_assemble(ego, traj, cfg, ego_model, loss, EgoInput{});

  const auto min_distance = [&](const OcpSolution& sol) {
    double best = 1e300;
    for (const auto& x : sol.states) {
      best = std::min(best,
                      std::hypot(x(0) - 2.5, x(1) - 20.0));
    }
    return best;
  };
  const OcpSolution sol_robust = OcpSolver().solve(robust);
  const OcpSolution sol_mean = OcpSolver().solve(mean);
  CHECK(min_distance(sol_mean) <= min_distance(sol_robust) + 1e-9);
}

TEST_CASE("reference shorter than the horizon is rejected") {
  OcpConfig cfg = bike_config(20);
  cfg.reference.resize(10);
  const EgoState ego{2.5, 0.0, M_PI / 2.0, 8.0};
  const PredictedTrajectory traj =
      static_obstacle(Eigen::Vector4d(0.0, 0.0, 0.0, 0.0), 20);
  CHECK_THROWS_AS(assemble(ego, traj, 1.0, cfg, ego_model, loss, EgoInput{}),
                  std::invalid_argument);
}

TEST_CASE("prediction shorter than the horizon is rejected") {
  OcpConfig cfg = bike_config(20);
  const EgoState ego{2.5, 0.0, M_PI / 2.0, 8.0};
  const PredictedTrajectory traj =
      static_obstacle(Eigen::Vector4d(0.0, 0.0, 0.0, 0.0), 5);
  CHECK_THROWS_AS(assemble(ego, traj, 1.0, cfg, ego_model, loss, EgoInput{}),
                  std::invalid_argument);
}

}  // TEST_SUITE
