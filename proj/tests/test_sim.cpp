#include <doctest.h>

#include <cstdio>

#include "sied/sim.hpp"
#include "support/oracles.hpp"

using namespace sied;

#ifndef SIED_SCENARIO_DIR
#define SIED_SCENARIO_DIR "scenarios"
#endif

namespace {

// small, fast closed-loop configuration; obstacle far off to the side
ScenarioConfig small_config() {
  ScenarioConfig cfg;
  cfg.schema = 1;
  cfg.name = "unit";
  cfg.steps = 40;
  cfg.ts = 0.1;
  cfg.horizon = 15;
  cfg.window = 10;
  cfg.ego_init = {0.0, 0.0, 0.0, 6.0};
  cfg.obstacle_init = {200.0, 200.0, 0.0, 4.0};
  cfg.obstacle_prior.mean = cfg.obstacle_init.vec();
  cfg.obstacle_prior.cov = 0.01 * Eigen::Matrix4d::Identity();
  cfg.noise.Q = Eigen::Vector4d(0.01, 0.01, 5e-4, 5e-4).asDiagonal();
  cfg.noise.R = Eigen::Vector4d(0.01, 0.01, 5e-4, 5e-4).asDiagonal();
  cfg.true_process_cov = Eigen::Matrix4d::Zero();
  cfg.true_measurement_cov = Eigen::Matrix4d::Zero();
  cfg.reference.clear();
  const double total = (cfg.steps + cfg.horizon + 2) * cfg.ts;
  cfg.reference.push_back({0.0, Eigen::Vector4d(0.0, 0.0, 0.0, 6.0)});
  cfg.reference.push_back(
      {total, Eigen::Vector4d(6.0 * total, 0.0, 0.0, 6.0)});
  cfg.truth_schedule = {{0.0, 0.0, 0.0}};
  return cfg;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("csav predicts zero input for any belief") {
  const CsavBehavior behavior(CsavMode::kZero);
  GaussianBelief belief;
  belief.mean = Eigen::Vector4d(3.0, -7.0, 2.0, 22.0);
  belief.cov = 5.0 * Eigen::Matrix4d::Identity();
  const ObstacleInput d = behavior.predict(belief);
  CHECK(d.a == 0.0);
  CHECK(d.beta == 0.0);
}

TEST_CASE("hold variant repeats the held input") {
  CsavBehavior behavior(CsavMode::kHoldLastEstimate);
  CHECK(behavior.predict({}).beta == 0.0);
  behavior.hold({0.5, -0.2});
  CHECK(behavior.predict({}).a == doctest::Approx(0.5));
  CHECK(behavior.predict({}).beta == doctest::Approx(-0.2));
}

TEST_CASE("collision check boundary convention") {
  CHECK(collision_check({0.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0}, 1.0));
  // distance exactly 2 * radius is not a collision
  CHECK_FALSE(
      collision_check({0.0, 0.0, 0.0, 0.0}, {2.0, 0.0, 0.0, 0.0}, 1.0));
  // half car length, 5 m apart
  CHECK_FALSE(
      collision_check({0.0, 0.0, 0.0, 0.0}, {5.0, 0.0, 0.0, 0.0}, 2.3055));
  CHECK_THROWS_AS(
      collision_check({0.0, 0.0, 0.0, 0.0}, {5.0, 0.0, 0.0, 0.0}, 0.0),
      std::invalid_argument);
}

TEST_CASE("noise-free unconflicted episode tracks the reference") {
  const ScenarioConfig cfg = small_config();
  const EpisodeLog log = run_episode(cfg, Method::kSied, 3);
  REQUIRE(static_cast<int>(log.steps.size()) == cfg.steps);
  CHECK_FALSE(log.collision);
  CHECK_FALSE(log.aborted);
  const StepRecord& last = log.steps.back();
  const Eigen::Vector4d ref = reference_at(cfg.reference, last.t);
  const double pos_err = std::hypot(last.ego(0) - ref(0), last.ego(1) - ref(1));
  CHECK(pos_err < 0.1);
}

TEST_CASE("same seed reproduces the log bit for bit") {
  const ScenarioConfig cfg = small_config();
  const EpisodeLog a = run_episode(cfg, Method::kSied, 17);
  const EpisodeLog b = run_episode(cfg, Method::kSied, 17);
  CHECK(logs_equal_deterministic(a, b));
  const EpisodeLog c = run_episode(cfg, Method::kSied, 18);
  CHECK_FALSE(logs_equal_deterministic(a, c));
}

TEST_CASE("straight-truth scenario keeps the radius small") {
  ScenarioConfig cfg =
      load_scenario(std::string(SIED_SCENARIO_DIR) + "/straight.cfg");
  cfg.steps = 60;  // enough for the window statistics
  const EpisodeLog log = run_episode(cfg, Method::kSied, 5);
  REQUIRE(!log.steps.empty());
  double mean_theta = 0.0;
  for (const auto& rec : log.steps) mean_theta += rec.theta;
  mean_theta /= static_cast<double>(log.steps.size());
  CHECK(mean_theta < 0.05 * cfg.risk.theta_max);
}

TEST_CASE("gap estimate tracks the scripted slip segment by segment") {
  const ScenarioConfig cfg =
      load_scenario(std::string(SIED_SCENARIO_DIR) + "/intersection.cfg");
  const FilterTrace trace = run_filter_comparison(cfg, 11);
  // average the estimated slip gap over each scripted nonzero segment,
  // skipping a short transient after each switch
  int checked = 0;
  for (std::size_t s = 0; s < cfg.truth_schedule.size(); ++s) {
    const TruthSegment& seg = cfg.truth_schedule[s];
    if (seg.beta == 0.0) continue;
    const double t_end = s + 1 < cfg.truth_schedule.size()
                             ? cfg.truth_schedule[s + 1].t_start
                             : cfg.steps * cfg.ts;
    const int first = static_cast<int>(seg.t_start / cfg.ts) + 4;
    const int last = std::min(static_cast<int>(t_end / cfg.ts), cfg.steps);
    if (last - first < 4) continue;
    double mean_beta = 0.0;
    int count = 0;
    for (int k = first; k <= last; ++k) {
      mean_beta += trace.gap_estimates[k - 1](1);
      ++count;
    }
    mean_beta /= count;
    CHECK(std::abs(mean_beta - seg.beta) < 0.15);
    ++checked;
  }
  CHECK(checked >= 1);
}

TEST_CASE("radius trace follows the scripted gap") {
  const ScenarioConfig cfg =
      load_scenario(std::string(SIED_SCENARIO_DIR) + "/intersection.cfg");
  const FilterTrace trace = run_filter_comparison(cfg, 7);
  const double corr = oracles::pearson(trace.theta, trace.true_gap_norm);
  CHECK(corr > 0.5);
}

TEST_CASE("episode csv round trips into an identical summary") {
  const ScenarioConfig cfg = small_config();
  const EpisodeLog log = run_episode(cfg, Method::kSied, 23);
  const std::string path = "unit_roundtrip.csv";
  write_episode_csv(path, log);
  const EpisodeLog parsed = read_episode_csv(path);
  std::remove(path.c_str());

  CHECK(parsed.method == log.method);
  CHECK(parsed.seed == log.seed);
  CHECK(parsed.steps.size() == log.steps.size());

  const auto a = aggregate({log});
  const auto b = aggregate({parsed});
  REQUIRE(a.size() == 1);
  REQUIRE(b.size() == 1);
  CHECK(a[0].avoidance_rate == b[0].avoidance_rate);
  CHECK((a[0].estimation_rmse - b[0].estimation_rmse).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(a[0].cost_mean == b[0].cost_mean);
  CHECK(a[0].cost_std == b[0].cost_std);
  CHECK(a[0].solve_time_mean == b[0].solve_time_mean);
}

TEST_CASE("aggregate degenerate cases") {
  const ScenarioConfig cfg = small_config();
  const EpisodeLog log = run_episode(cfg, Method::kSied, 9);
  const auto summaries = aggregate({log});
  REQUIRE(summaries.size() == 1);
  CHECK(summaries[0].avoidance_rate == 1.0);
  CHECK(summaries[0].episodes == 1);
  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
}

TEST_CASE("mean-MPC group normalizes timing to one") {
  ScenarioConfig cfg = small_config();
  cfg.steps = 10;
  std::vector<EpisodeLog> logs;
  logs.push_back(run_episode(cfg, Method::kMean, 1));
  logs.push_back(run_episode(cfg, Method::kDr, 1));
  const auto summaries = aggregate(logs);
  REQUIRE(summaries.size() == 2);
  for (const auto& s : summaries) {
    if (s.method == Method::kMean) {
      CHECK(s.solve_time_normalized == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("input bounds hold through a full episode") {
  const ScenarioConfig cfg =
      load_scenario(std::string(SIED_SCENARIO_DIR) + "/intersection.cfg");
  ScenarioConfig short_cfg = cfg;
  short_cfg.steps = 70;
  const EpisodeLog log = run_episode(short_cfg, Method::kSied, 2);
  double last_delta = short_cfg.ego_input_init.delta;
  for (const auto& rec : log.steps) {
    CHECK(std::abs(rec.input(0)) <= short_cfg.accel_limit + 1e-12);
    CHECK(std::abs(rec.input(1)) <= short_cfg.steer_limit + 1e-12);
    CHECK(std::abs(rec.input(1) - last_delta) <=
          short_cfg.steer_rate_limit + 1e-12);
    last_delta = rec.input(1);
  }
}

TEST_CASE("turning window matches the schedule") {
  ScenarioConfig cfg = small_config();
  cfg.truth_schedule = {{0.0, 0.0, 0.0}, {1.0, 0.0, 0.2}, {2.0, 0.0, 0.0}};
  const auto [first, last] = turning_window(cfg);
  CHECK(first == 11);
  CHECK(last == 20);
  cfg.truth_schedule = {{0.0, 0.0, 0.0}};
  const auto whole = turning_window(cfg);
  CHECK(whole.first == 1);
  CHECK(whole.second == cfg.steps);
}

}  // TEST_SUITE
