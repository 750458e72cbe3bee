#pragma once

#include <istream>
#include <string>
#include <vector>

#include "sied/dynamics.hpp"
#include "sied/estimation.hpp"
#include "sied/mpc.hpp"
#include "sied/risk.hpp"

namespace sied {

/// Scenario file syntax error with a 1-based line number.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

/// Goal-trajectory sample: time plus [x, y, phi, v].
struct Waypoint {
  double t = 0.0;
  Eigen::Vector4d state = Eigen::Vector4d::Zero();
};

/// Scripted true obstacle input, active from t_start until the next segment.
struct TruthSegment {
  double t_start = 0.0;
  double a = 0.0;
  double beta = 0.0;
};

enum class Method { kMean, kDr, kSied };

const char* to_string(Method method);
Method method_from_string(const std::string& name);

/// Behavior-model variant: predict zero input, or hold the latest
/// gap-corrected input estimate.
enum class CsavMode { kZero, kHoldLastEstimate };

/// Full description of one closed-loop experiment. Loaded from a plain-text
/// file of `key = value` entries grouped in [sections]; see the shipped
/// scenario files for the schema (versioned by the top-level `schema` key).
struct ScenarioConfig {
  int schema = 1;
  std::string name;

  int steps = 100;
  double ts = 0.1;
  double car_length = 4.611;
  double collision_radius = 4.611 / 2.0;

  EgoState ego_init;
  EgoInput ego_input_init;
  ObstacleState obstacle_init;
  GaussianBelief obstacle_prior;

  NoiseModel noise;
  /// Covariances of the noise actually injected by the simulator. They
  /// default to the modeled ones; setting them smaller makes the modeled
  /// covariances conservative, which is what keeps the confidence score
  /// near zero while the behavior model holds.
  Eigen::Matrix4d true_process_cov = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d true_measurement_cov = Eigen::Matrix4d::Identity();

  RiskParams risk;
  int window = 30;

  int horizon = 50;
  Eigen::Vector4d state_weight = {1.0, 1.0, 10.0, 0.2};
  Eigen::Vector2d rate_weight = {0.2, 4.0};
  double accel_limit = 3.0;
  double steer_limit = 1.22;
  double steer_rate_limit = 0.05;
  double penalty_weight = 1e4;

  CsavMode csav_mode = CsavMode::kZero;

  std::vector<Waypoint> reference;
  std::vector<TruthSegment> truth_schedule;

  /// OcpConfig with the reference resolved at episode time elsewhere.
  OcpConfig ocp_config() const;
};

struct ValidationIssue {
  std::string field;
  std::string message;
};

/// Schema and invariant check; empty result means valid.
std::vector<ValidationIssue> validate(const ScenarioConfig& cfg);

/// Parse without validating. Throws ScenarioError on syntax or unknown keys.
ScenarioConfig parse_scenario(std::istream& in);

/// Load from a file. Throws std::runtime_error if unreadable, ScenarioError
/// on bad syntax.
ScenarioConfig load_scenario(const std::string& path);

/// Piecewise-linear interpolation of the goal trajectory; clamps outside
/// the waypoint range.
Eigen::Vector4d reference_at(const std::vector<Waypoint>& waypoints, double t);

/// Scripted input active at time t (constant within segments).
ObstacleInput truth_input_at(const std::vector<TruthSegment>& schedule,
                             double t);

}  // namespace sied
