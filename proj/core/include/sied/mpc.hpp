#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "sied/dynamics.hpp"
#include "sied/prediction.hpp"
#include "sied/risk.hpp"

namespace sied {

/// Controlled discrete-time system for the shooting solver.
class ControlModel {
 public:
  virtual ~ControlModel() = default;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual Eigen::VectorXd step(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u) const = 0;
  virtual void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         Eigen::MatrixXd* A, Eigen::MatrixXd* B) const = 0;
};

/// Ego bicycle wrapped for the solver.
class BicycleControlModel final : public ControlModel {
 public:
  explicit BicycleControlModel(BicycleKinematics kinematics)
      : kinematics_(kinematics) {}

  int state_dim() const override { return 4; }
  int input_dim() const override { return 2; }
  Eigen::VectorXd step(const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u) const override;
  void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                 Eigen::MatrixXd* A, Eigen::MatrixXd* B) const override;

  const BicycleKinematics& kinematics() const { return kinematics_; }

 private:
  BicycleKinematics kinematics_;
};

/// Elementwise box and rate limits on the inputs. Rate entries may be
/// +infinity for unconstrained channels; the rate chain starts at u_prev.
struct InputBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd rate;
};

/// Receding-horizon problem parameters.
struct OcpConfig {
  int horizon = 50;
  Eigen::Matrix4d state_weight =
      Eigen::Vector4d(1.0, 1.0, 10.0, 0.2).asDiagonal();
  Eigen::Matrix2d rate_weight = Eigen::Vector2d(0.2, 4.0).asDiagonal();
  Eigen::Matrix4d terminal_weight = Eigen::Matrix4d::Identity();
  double accel_limit = 3.0;        ///< |a| bound, m/s^2
  double steer_limit = 1.22;       ///< |delta| bound, rad
  double steer_rate_limit = 0.05;  ///< |delta_k - delta_{k-1}| bound, rad
  double alpha = 0.85;             ///< CVaR level for the safety rows
  double penalty_weight = 1e4;     ///< one-sided quadratic constraint penalty
  std::vector<Eigen::Vector4d> reference;  ///< stage targets, length >= L+1
};

/// Per-stage obstacle forecast consumed by the safety rows.
struct SafetyStage {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
};

/// Assembled shooting problem: tracking objective, input bounds, and the
/// per-stage risk constraint
///     c_l(x) = mean_s + gamma * stddev_s + theta * sqrt(1 + gamma^2) <= 0
/// handled as a one-sided quadratic penalty. The stage-0 row is evaluated
/// for reporting only (the initial state is not a decision variable).
struct OcpProblem {
  const ControlModel* model = nullptr;
  Eigen::VectorXd initial_state;
  Eigen::VectorXd previous_input;
  int horizon = 0;
  Eigen::MatrixXd state_weight;
  Eigen::MatrixXd rate_weight;
  Eigen::MatrixXd terminal_weight;
  std::vector<Eigen::VectorXd> reference;  ///< length horizon + 1
  InputBounds bounds;
  double penalty_weight = 1e4;

  const SafetyLoss* loss = nullptr;     ///< null: no safety rows
  std::vector<SafetyStage> safety;      ///< length horizon + 1 when loss set
  double gamma = 0.0;
  double theta_margin = 0.0;            ///< theta * sqrt(1 + gamma^2)

  /// Risk-constraint value at stage l for ego state x.
  double constraint_value(int l, const Eigen::VectorXd& x) const;
  /// d constraint / d x. Analytic mean term; central differences on the
  /// stddev term.
  Eigen::VectorXd constraint_gradient(int l, const Eigen::VectorXd& x) const;

  /// Penalized residual for the c_l(x) <= 0 row, written in distance units:
  ///     psi = max(0, sqrt(max(0, c + d^2)) - d),
  /// with d the planar distance between the ego and the stage mean. Zero
  /// exactly where c <= 0, so the feasible set is unchanged, but the
  /// gradient stays bounded in deep violation where the raw c has a flat
  /// top. Assumes the first two state components are planar position.
  double penalty_residual(int l, const Eigen::VectorXd& x) const;
  /// Gradient of the radial residual. With include_feasible the boundary
  /// gradient is returned even where c <= 0 (used for active-set
  /// stabilization in the solver model).
  Eigen::VectorXd penalty_residual_gradient(
      int l, const Eigen::VectorXd& x, bool include_feasible = false) const;

  bool has_safety() const { return loss != nullptr && !safety.empty(); }
};

enum class SolveStatus { kOptimal, kMaxIterations, kInfeasibleRelaxed };

const char* to_string(SolveStatus status);

struct OcpSolution {
  std::vector<Eigen::VectorXd> inputs;  ///< length horizon
  std::vector<Eigen::VectorXd> states;  ///< length horizon + 1, rolled out
  double cost = 0.0;                    ///< tracking objective (no penalty)
  SolveStatus status = SolveStatus::kOptimal;
  int iterations = 0;
  double slack = 0.0;              ///< max violation over stages 1..L
  double initial_violation = 0.0;  ///< stage-0 row, reporting only
  double kkt_residual = 0.0;
};

/// Projected Gauss-Newton over the input sequence with Armijo backtracking.
/// Inputs are kept feasible by projection at every iterate, so returned
/// inputs respect the bounds regardless of status.
class OcpSolver {
 public:
  struct Options {
    int max_iterations = 500;
    double kkt_tolerance = 1e-6;
    double armijo_slope = 1e-4;
    double backtrack_factor = 0.5;
    int max_backtracks = 14;
    double slack_tolerance = 1e-6;
    /// Stop once a violated problem gains less than progress_rtol of the
    /// merit over progress_window accepted iterations (reported max_iter).
    int progress_window = 12;
    double progress_rtol = 1e-2;
  };

  OcpSolver() = default;
  explicit OcpSolver(Options options) : options_(options) {}

  /// The warm start's inputs seed the first iterate verbatim (projected).
  /// Throws std::runtime_error if the iteration produces non-finite values.
  OcpSolution solve(const OcpProblem& problem,
                    const OcpSolution* warm_start = nullptr) const;

  const Options& options() const { return options_; }

 private:
  Options options_;
};

/// Receding-horizon initializer: drop the first input, repeat the last.
std::vector<Eigen::VectorXd> shift_inputs(
    const std::vector<Eigen::VectorXd>& inputs);

/// Build the risk-constrained problem from the obstacle forecast.
/// theta scales the distribution-shift margin; cfg.alpha sets gamma.
OcpProblem assemble(const EgoState& ego, const PredictedTrajectory& prediction,
                    double theta, const OcpConfig& cfg,
                    const ControlModel& model, const SafetyLoss& loss,
                    const EgoInput& previous_input);

/// Deterministic baseline: identical cost structure, constraint rows reduce
/// to mean_s <= 0 (gamma and theta terms dropped).
OcpProblem mean_mpc_assemble(const EgoState& ego,
                             const PredictedTrajectory& prediction,
                             const OcpConfig& cfg, const ControlModel& model,
                             const SafetyLoss& loss,
                             const EgoInput& previous_input);

/// Tracking-only problem (no obstacle).
OcpProblem tracking_assemble(const EgoState& ego, const OcpConfig& cfg,
                             const ControlModel& model,
                             const EgoInput& previous_input);

}  // namespace sied
