#include <benchmark/benchmark.h>

#include <random>

#include "sied/mpc.hpp"
#include "sied/sim.hpp"

using namespace sied;

namespace {

const BicycleKinematics kKin(0.1, 4.611);
const BicycleObstacleModel kObstacle(kKin);

NoiseModel bench_noise() {
  NoiseModel n;
  n.Q = Eigen::Vector4d(0.01, 0.01, 5e-4, 5e-4).asDiagonal();
  n.R = Eigen::Vector4d(0.01, 0.01, 5e-4, 5e-4).asDiagonal();
  return n;
}

void BM_SsieStep(benchmark::State& state) {
  const SsieFilter filter(kObstacle, bench_noise());
  GaussianBelief belief;
  belief.mean = Eigen::Vector4d(0.0, 10.0, -1.2, 8.0);
  belief.cov = 0.05 * Eigen::Matrix4d::Identity();
  const Eigen::Vector4d zeta(0.1, 9.2, -1.18, 8.05);
  for (auto _ : state) {
    auto res = filter.step(belief, {0.0, 0.0}, zeta);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(BM_SsieStep);

void BM_EkfStep(benchmark::State& state) {
  const SsieFilter filter(kObstacle, bench_noise());
  GaussianBelief belief;
  belief.mean = Eigen::Vector4d(0.0, 10.0, -1.2, 8.0);
  belief.cov = 0.05 * Eigen::Matrix4d::Identity();
  const Eigen::Vector4d zeta(0.1, 9.2, -1.18, 8.05);
  for (auto _ : state) {
    auto post = filter.ekf_step(belief, {0.0, 0.0}, zeta);
    benchmark::DoNotOptimize(post);
  }
}
BENCHMARK(BM_EkfStep);

void BM_Propagate(benchmark::State& state) {
  const CsavBehavior behavior;
  GaussianBelief belief;
  belief.mean = Eigen::Vector4d(0.0, 10.0, -1.2, 8.0);
  belief.cov = 0.05 * Eigen::Matrix4d::Identity();
  const Eigen::Matrix4d q = bench_noise().Q;
  for (auto _ : state) {
    auto traj =
        propagate(belief, kObstacle, behavior, q, state.range(0));
    benchmark::DoNotOptimize(traj);
  }
}
BENCHMARK(BM_Propagate)->Arg(10)->Arg(50);

void BM_SolveTracking(benchmark::State& state) {
  const BicycleControlModel control(kKin);
  OcpConfig cfg;
  cfg.horizon = static_cast<int>(state.range(0));
  for (int l = 0; l <= cfg.horizon; ++l) {
    cfg.reference.push_back(Eigen::Vector4d(2.5, 0.8 * l, M_PI / 2, 8.0));
  }
  const EgoState ego{2.0, -1.0, M_PI / 2 + 0.1, 7.0};
  const OcpProblem p = tracking_assemble(ego, cfg, control, EgoInput{});
  const OcpSolver solver;
  for (auto _ : state) {
    auto sol = solver.solve(p);
    benchmark::DoNotOptimize(sol);
  }
}
BENCHMARK(BM_SolveTracking)->Arg(20)->Arg(50);

void BM_SolveConstrained(benchmark::State& state) {
  const BicycleControlModel control(kKin);
  const SquaredDistanceLoss loss;
  OcpConfig cfg;
  cfg.horizon = 50;
  for (int l = 0; l <= cfg.horizon; ++l) {
    cfg.reference.push_back(Eigen::Vector4d(2.5, 0.8 * l, M_PI / 2, 8.0));
  }
  PredictedTrajectory traj;
  for (int l = 0; l <= cfg.horizon; ++l) {
    traj.means.push_back(Eigen::Vector4d(2.5, 25.0 - 0.8 * l, -M_PI / 2, 8.0));
    traj.covs.push_back(0.05 * (l + 1) * Eigen::Matrix4d::Identity());
  }
  const EgoState ego{2.5, 0.0, M_PI / 2, 8.0};
  const OcpProblem p =
      assemble(ego, traj, 3.0, cfg, control, loss, EgoInput{});
  const OcpSolver solver;
  for (auto _ : state) {
    auto sol = solver.solve(p);
    benchmark::DoNotOptimize(sol);
  }
}
BENCHMARK(BM_SolveConstrained);

}  // namespace

BENCHMARK_MAIN();
