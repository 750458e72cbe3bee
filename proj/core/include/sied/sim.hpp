#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sied/scenario.hpp"

namespace sied {

/// Constant Steering And Velocity behavior model: zero acceleration, zero
/// steering change from the nominal straight path. The hold variant repeats
/// the latest gap-corrected input estimate instead.
class CsavBehavior final : public BehaviorModel {
 public:
  explicit CsavBehavior(CsavMode mode = CsavMode::kZero) : mode_(mode) {}

  ObstacleInput predict(const GaussianBelief& belief) const override;

  /// Feed the latest gap-corrected input (used only in hold mode).
  void hold(const ObstacleInput& input) { held_ = input; }

 private:
  CsavMode mode_;
  ObstacleInput held_;
};

/// One row of the episode log. solve_seconds is wall time and is excluded
/// from determinism comparisons; everything else is reproducible bit for
/// bit from (scenario, method, seed).
struct StepRecord {
  int step = 0;
  double t = 0.0;
  Eigen::Vector4d truth = Eigen::Vector4d::Zero();
  Eigen::Vector4d observation = Eigen::Vector4d::Zero();
  Eigen::Vector4d belief_mean = Eigen::Vector4d::Zero();
  Eigen::Vector4d belief_var = Eigen::Vector4d::Zero();  ///< cov diagonal
  Eigen::Vector2d gap = Eigen::Vector2d::Zero();
  Eigen::Vector3d gap_cov = Eigen::Vector3d::Zero();  ///< (aa, ab, bb)
  double confidence = 0.0;
  double theta = 0.0;
  Eigen::Vector4d ego = Eigen::Vector4d::Zero();
  Eigen::Vector2d input = Eigen::Vector2d::Zero();
  double stage_cost = 0.0;  ///< realized tracking + input-rate cost
  double ocp_cost = 0.0;    ///< optimal objective of this step's solve
  std::string solver_status = "optimal";
  int iterations = 0;
  double solve_seconds = 0.0;
  double distance = 0.0;  ///< center distance to the obstacle
};

struct EpisodeLog {
  std::string scenario;
  Method method = Method::kSied;
  std::uint64_t seed = 0;
  double collision_radius = 0.0;
  bool collision = false;
  bool aborted = false;
  double min_distance = 0.0;
  std::vector<StepRecord> steps;
};

/// Disc approximation: collision iff center distance < 2 * radius (strict).
bool collision_check(const EgoState& ego, const ObstacleState& obs,
                     double radius);

/// Closed-loop episode: observe, filter (SSIE or EKF per method), update the
/// confidence window, pick the ambiguity radius per method, forecast, solve
/// the receding-horizon problem, apply the first input. Deterministic given
/// (scenario, method, seed); the noise streams do not depend on the method,
/// so equal seeds pair episodes across methods.
EpisodeLog run_episode(const ScenarioConfig& cfg, Method method,
                       std::uint64_t seed);

/// Field-by-field equality ignoring solve_seconds (wall time).
bool logs_equal_deterministic(const EpisodeLog& a, const EpisodeLog& b);

struct MethodSummary {
  Method method = Method::kSied;
  int episodes = 0;
  double avoidance_rate = 0.0;
  Eigen::Vector4d estimation_rmse = Eigen::Vector4d::Zero();
  double cost_mean = 0.0;
  double cost_std = 0.0;
  double solve_time_mean = 0.0;
  double solve_time_normalized = 0.0;  ///< 1.0 for the mean-MPC group
};

/// Group logs by method and summarize. Inputs are rounded to the episode-log
/// serialization precision first, so summaries from in-memory logs and from
/// re-parsed CSV files agree exactly.
std::vector<MethodSummary> aggregate(const std::vector<EpisodeLog>& logs);

void write_episode_csv(const std::string& path, const EpisodeLog& log);
EpisodeLog read_episode_csv(const std::string& path);
void write_summary_csv(const std::string& path,
                       const std::vector<MethodSummary>& summaries);

/// Offline estimator comparison on one generated obstacle stream (the truth
/// is scripted and control-independent, so this matches what any episode
/// with the same seed observes).
struct FilterTrace {
  std::vector<Eigen::Vector4d> truth;
  std::vector<Eigen::Vector4d> ssie_error;
  std::vector<Eigen::Vector4d> ekf_error;
  std::vector<Eigen::Vector2d> gap_estimates;
  std::vector<double> theta;          ///< radius trace driven by the window
  std::vector<double> true_gap_norm;  ///< |scripted input| per step
};

FilterTrace run_filter_comparison(const ScenarioConfig& cfg,
                                  std::uint64_t seed);

/// [first, last] step indices where the scripted input is nonzero; the whole
/// episode when the schedule never deviates.
std::pair<int, int> turning_window(const ScenarioConfig& cfg);

}  // namespace sied
