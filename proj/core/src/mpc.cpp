#include "sied/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sied {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd matrix_sqrt(const Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized(w));
  Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * clipped.cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace

Eigen::VectorXd BicycleControlModel::step(const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& u) const {
  return kinematics_
      .ego_step(EgoState::from_vec(x), EgoInput::from_vec(u))
      .vec();
}

void BicycleControlModel::jacobians(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& u,
                                    Eigen::MatrixXd* A,
                                    Eigen::MatrixXd* B) const {
  Eigen::Matrix4d a;
  Eigen::Matrix<double, 4, 2> b;
  kinematics_.ego_jacobians(EgoState::from_vec(x), EgoInput::from_vec(u), &a,
                            &b);
  if (A != nullptr) *A = a;
  if (B != nullptr) *B = b;
}

double OcpProblem::constraint_value(int l, const Eigen::VectorXd& x) const {
  const LossDistribution dist =
      loss_distribution(x, safety[l].mean, safety[l].cov, *loss);
  return dist.mean + gamma * dist.stddev + theta_margin;
}

Eigen::VectorXd OcpProblem::constraint_gradient(
    int l, const Eigen::VectorXd& x) const {
  Eigen::VectorXd grad = loss->ego_gradient(x, safety[l].mean);
  if (gamma != 0.0) {
    // stddev term by central differences on the projected loss spread
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double h = 1e-6 * (1.0 + std::abs(x(i)));
      probe(i) = x(i) + h;
      const double hi =
          loss_distribution(probe, safety[l].mean, safety[l].cov, *loss).stddev;
      probe(i) = x(i) - h;
      const double lo =
          loss_distribution(probe, safety[l].mean, safety[l].cov, *loss).stddev;
      probe(i) = x(i);
      grad(i) += gamma * (hi - lo) / (2.0 * h);
    }
  }
  return grad;
}

double OcpProblem::penalty_residual(int l, const Eigen::VectorXd& x) const {
  const double c = constraint_value(l, x);
  if (c <= 0.0) {
    return 0.0;
  }
  const double d = (x.head<2>() - safety[l].mean.head<2>()).norm();
  return std::sqrt(std::max(c + d * d, 0.0)) - d;
}

Eigen::VectorXd OcpProblem::penalty_residual_gradient(
    int l, const Eigen::VectorXd& x, bool include_feasible) const {
  const double c = constraint_value(l, x);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(x.size());
  if (c <= 0.0 && !include_feasible) {
    return grad;
  }
  const Eigen::Vector2d offset = x.head<2>() - safety[l].mean.head<2>();
  const double d = offset.norm();
  const double safe_radius = std::sqrt(std::max(c + d * d, 0.0));
  Eigen::VectorXd d_grad = Eigen::VectorXd::Zero(x.size());
  if (d > 1e-9) {
    d_grad.head<2>() = offset / d;
  }
  grad = constraint_gradient(l, x);
  if (safe_radius > 1e-12) {
    grad = (grad + 2.0 * d * d_grad) / (2.0 * safe_radius) - d_grad;
  }
  return grad;
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kMaxIterations:
      return "max_iter";
    case SolveStatus::kInfeasibleRelaxed:
      return "infeasible_relaxed";
  }
  return "unknown";
}

namespace {

// The solver's decision variable: rate-limited channels are parametrized by
// their per-stage increments, which turns the rate constraint into an exact
// per-variable box; absolute channels stay as-is. The amplitude limit on an
// incremental channel is still a chain, but it binds rarely.
struct VariableMap {
  const OcpProblem* p = nullptr;
  std::vector<bool> incremental;

  explicit VariableMap(const OcpProblem& problem) : p(&problem) {
    const int m = problem.model->input_dim();
    incremental.resize(m);
    for (int i = 0; i < m; ++i) {
      incremental[i] = std::isfinite(problem.bounds.rate(i));
    }
  }

  Eigen::VectorXd to_inputs(const Eigen::VectorXd& v) const {
    const int m = p->model->input_dim();
    Eigen::VectorXd u = v;
    Eigen::VectorXd prev = p->previous_input;
    for (int l = 0; l < p->horizon; ++l) {
      for (int i = 0; i < m; ++i) {
        if (incremental[i]) {
          u(l * m + i) = prev(i) + v(l * m + i);
        }
        prev(i) = u(l * m + i);
      }
    }
    return u;
  }

  Eigen::VectorXd from_inputs(const Eigen::VectorXd& u) const {
    const int m = p->model->input_dim();
    Eigen::VectorXd v = u;
    Eigen::VectorXd prev = p->previous_input;
    for (int l = 0; l < p->horizon; ++l) {
      for (int i = 0; i < m; ++i) {
        if (incremental[i]) {
          v(l * m + i) = u(l * m + i) - prev(i);
        }
        prev(i) = u(l * m + i);
      }
    }
    return v;
  }

  // Project v to feasibility and return the matching input sequence.
  // Increment boxes are exact; the amplitude chain clips on top.
  Eigen::VectorXd project(Eigen::VectorXd* v) const {
    const int m = p->model->input_dim();
    Eigen::VectorXd u(v->size());
    Eigen::VectorXd prev = p->previous_input;
    for (int l = 0; l < p->horizon; ++l) {
      for (int i = 0; i < m; ++i) {
        double& vi = (*v)(l * m + i);
        double ui;
        if (incremental[i]) {
          vi = std::clamp(vi, -p->bounds.rate(i), p->bounds.rate(i));
          ui = prev(i) + vi;
          const double clipped =
              std::clamp(ui, p->bounds.lower(i), p->bounds.upper(i));
          if (clipped != ui) {
            ui = clipped;
            vi = ui - prev(i);
          }
        } else {
          vi = std::clamp(vi, p->bounds.lower(i), p->bounds.upper(i));
          ui = vi;
        }
        u(l * m + i) = ui;
        prev(i) = ui;
      }
    }
    return u;
  }

  // d u / d v is a per-channel prefix sum; J_v = J_u * T turns into suffix
  // sums over the incremental channels' columns.
  void convert_jacobian(Eigen::MatrixXd* jac) const {
    const int m = p->model->input_dim();
    for (int i = 0; i < m; ++i) {
      if (!incremental[i]) continue;
      for (int l = p->horizon - 2; l >= 0; --l) {
        jac->col(l * m + i) += jac->col((l + 1) * m + i);
      }
    }
  }
};

struct Evaluation {
  double merit = 0.0;     // tracking cost + penalty
  double cost = 0.0;      // tracking cost only
  double slack = 0.0;     // max violation over stages 1..L
  std::vector<Eigen::VectorXd> states;
};

Evaluation evaluate(const OcpProblem& p, const Eigen::VectorXd& u_flat,
                    const Eigen::MatrixXd& s_root,
                    const Eigen::MatrixXd& t_root,
                    const Eigen::MatrixXd& p_root) {
  const int m = p.model->input_dim();
  Evaluation ev;
  ev.states.reserve(p.horizon + 1);
  ev.states.push_back(p.initial_state);

  Eigen::VectorXd u_prev = p.previous_input;
  for (int l = 0; l < p.horizon; ++l) {
    const Eigen::VectorXd u = u_flat.segment(l * m, m);
    ev.cost += (s_root * (ev.states[l] - p.reference[l])).squaredNorm();
    ev.cost += (t_root * (u - u_prev)).squaredNorm();
    ev.states.push_back(p.model->step(ev.states[l], u));
    u_prev = u;
  }
  ev.cost +=
      (p_root * (ev.states[p.horizon] - p.reference[p.horizon])).squaredNorm();

  ev.merit = ev.cost;
  if (p.has_safety()) {
    for (int l = 1; l <= p.horizon; ++l) {
      const double c = p.constraint_value(l, ev.states[l]);
      if (c > ev.slack) ev.slack = c;
      if (c > 0.0) {
        const double psi = p.penalty_residual(l, ev.states[l]);
        ev.merit += p.penalty_weight * psi * psi;
      }
    }
    ev.slack = std::max(ev.slack, 0.0);
  }
  if (!std::isfinite(ev.merit)) {
    throw std::runtime_error("ocp solve: non-finite objective");
  }
  return ev;
}

// Residual vector and Jacobian w.r.t. the flat input sequence.
void linearize(const OcpProblem& p, const Eigen::VectorXd& u_flat,
               const Evaluation& ev, const Eigen::MatrixXd& s_root,
               const Eigen::MatrixXd& t_root, const Eigen::MatrixXd& p_root,
               Eigen::VectorXd* residual, Eigen::MatrixXd* jac) {
  const int n = p.model->state_dim();
  const int m = p.model->input_dim();
  const int L = p.horizon;
  const int n_pen = p.has_safety() ? L : 0;
  const int rows = n * (L + 1) + m * L + n_pen;

  residual->setZero(rows);
  jac->setZero(rows, m * L);

  // dx_l / dU, updated stage by stage; columns beyond l*m stay zero, so all
  // products run on the leading block only
  Eigen::MatrixXd sens = Eigen::MatrixXd::Zero(n, m * L);
  Eigen::MatrixXd A(n, n), B(n, m);
  const double pen_root = std::sqrt(p.penalty_weight);

  Eigen::VectorXd u_prev = p.previous_input;
  int row = 0;
  const int rate_base = n * (L + 1);
  const int pen_base = rate_base + m * L;

  for (int l = 0; l <= L; ++l) {
    const int width = l * m;
    const Eigen::MatrixXd& w = (l == L) ? p_root : s_root;
    residual->segment(row, n) = w * (ev.states[l] - p.reference[l]);
    if (width > 0) {
      jac->block(row, 0, n, width).noalias() = w * sens.leftCols(width);
    }
    row += n;

    if (p.has_safety() && l >= 1) {
      const double psi = p.penalty_residual(l, ev.states[l]);
      // near-active rows keep their gradient in the model (residual zero):
      // the boundary curvature stays in the Hessian and the active set
      // stops flickering between iterates
      const double d =
          (ev.states[l].head<2>() - p.safety[l].mean.head<2>()).norm();
      const double margin =
          std::sqrt(std::max(p.constraint_value(l, ev.states[l]) + d * d,
                             0.0)) -
          d;
      if (psi > 0.0 || margin > -0.5) {
        (*residual)(pen_base + l - 1) = pen_root * std::max(psi, 0.0);
        jac->block(pen_base + l - 1, 0, 1, width).noalias() =
            pen_root *
            (p.penalty_residual_gradient(l, ev.states[l], true).transpose() *
             sens.leftCols(width));
      }
    }

    if (l == L) break;

    const Eigen::VectorXd u = u_flat.segment(l * m, m);
    residual->segment(rate_base + l * m, m) = t_root * (u - u_prev);
    jac->block(rate_base + l * m, l * m, m, m) = t_root;
    if (l >= 1) {
      jac->block(rate_base + l * m, (l - 1) * m, m, m) = -t_root;
    }
    u_prev = u;

    p.model->jacobians(ev.states[l], u, &A, &B);
    if (width > 0) {
      sens.leftCols(width) = A * sens.leftCols(width);
    }
    sens.middleCols(width, m).noalias() += B;
  }
}

}  // namespace

std::vector<Eigen::VectorXd> shift_inputs(
    const std::vector<Eigen::VectorXd>& inputs) {
  if (inputs.empty()) return {};
  std::vector<Eigen::VectorXd> shifted(inputs.begin() + 1, inputs.end());
  shifted.push_back(inputs.back());
  return shifted;
}

OcpSolution OcpSolver::solve(const OcpProblem& p,
                             const OcpSolution* warm_start) const {
  if (p.model == nullptr || p.horizon < 1) {
    throw std::invalid_argument("ocp solve: malformed problem");
  }
  if (static_cast<int>(p.reference.size()) < p.horizon + 1) {
    throw std::invalid_argument("ocp solve: reference shorter than horizon");
  }
  if (p.has_safety() &&
      static_cast<int>(p.safety.size()) < p.horizon + 1) {
    throw std::invalid_argument("ocp solve: safety stages shorter than horizon");
  }
  const int m = p.model->input_dim();
  const int L = p.horizon;

  const Eigen::MatrixXd s_root = matrix_sqrt(p.state_weight);
  const Eigen::MatrixXd t_root = matrix_sqrt(p.rate_weight);
  const Eigen::MatrixXd p_root = matrix_sqrt(p.terminal_weight);

  const VariableMap vars(p);
  Eigen::VectorXd u_init = Eigen::VectorXd::Zero(m * L);
  if (warm_start != nullptr &&
      static_cast<int>(warm_start->inputs.size()) == L) {
    for (int l = 0; l < L; ++l) {
      u_init.segment(l * m, m) = warm_start->inputs[l];
    }
  }
  Eigen::VectorXd v = vars.from_inputs(u_init);
  Eigen::VectorXd u = vars.project(&v);

  Evaluation ev = evaluate(p, u, s_root, t_root, p_root);
  Eigen::VectorXd residual;
  Eigen::MatrixXd jac;

  int iterations = 0;
  double kkt = kInf;
  bool converged = false;
  double damping = 1e-4;
  // slow-progress window: the penalty curvature Gauss-Newton cannot
  // represent caps the per-iteration gain on violated problems, so those
  // stop early; feasible solves only stop at numerical stagnation
  double window_merit = ev.merit;
  int window_count = 0;

  for (int it = 0; it < options_.max_iterations; ++it) {
    linearize(p, u, ev, s_root, t_root, p_root, &residual, &jac);
    vars.convert_jacobian(&jac);
    const Eigen::VectorXd grad = 2.0 * (jac.transpose() * residual);

    Eigen::VectorXd probe = v - grad;
    vars.project(&probe);
    kkt = (v - probe).cwiseAbs().maxCoeff();
    if (kkt < options_.kkt_tolerance) {
      converged = true;
      break;
    }

    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(jac.cols(), jac.cols());
    hess.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
    hess.triangularView<Eigen::StrictlyUpper>() =
        hess.transpose().triangularView<Eigen::StrictlyUpper>();
    // Marquardt scaling: damp each channel relative to its own curvature
    for (Eigen::Index i = 0; i < hess.rows(); ++i) {
      hess(i, i) += damping * std::max(hess(i, i), 1e-8);
    }
    Eigen::VectorXd direction = hess.ldlt().solve(-0.5 * grad);
    if (!direction.allFinite()) {
      throw std::runtime_error("ocp solve: non-finite search direction");
    }

    bool accepted = false;
    double accepted_step = 0.0;
    double step = 1.0;
    for (int bt = 0; bt < options_.max_backtracks && !accepted; ++bt) {
      Eigen::VectorXd trial_v = v + step * direction;
      const Eigen::VectorXd trial_u = vars.project(&trial_v);
      const double slope = grad.dot(trial_v - v);
      if (slope < 0.0) {
        Evaluation trial_ev = evaluate(p, trial_u, s_root, t_root, p_root);
        if (trial_ev.merit <= ev.merit + options_.armijo_slope * slope) {
          v = trial_v;
          u = trial_u;
          ev = std::move(trial_ev);
          accepted = true;
          accepted_step = step;
        }
      }
      step *= options_.backtrack_factor;
    }
    ++iterations;
    if (!accepted) {
      damping = std::min(damping * 100.0, 1e12);
      if (damping >= 1e12) break;
    } else if (accepted_step >= 1.0) {
      damping = std::max(damping / 3.0, 1e-8);
    } else if (accepted_step < 0.25) {
      damping = std::min(damping * 5.0, 1e12);
    }
    if (++window_count >= options_.progress_window) {
      const double gain = window_merit - ev.merit;
      const double rtol = ev.slack > options_.slack_tolerance
                              ? options_.progress_rtol
                              : 0.1 * options_.progress_rtol;
      if (gain < rtol * std::abs(window_merit)) {
        break;
      }
      window_merit = ev.merit;
      window_count = 0;
    }
  }

  OcpSolution sol;
  sol.states = ev.states;
  sol.inputs.reserve(L);
  for (int l = 0; l < L; ++l) {
    sol.inputs.push_back(u.segment(l * m, m));
  }
  sol.cost = ev.cost;
  sol.iterations = iterations;
  sol.kkt_residual = kkt;
  sol.slack = ev.slack;
  if (p.has_safety()) {
    sol.initial_violation =
        std::max(0.0, p.constraint_value(0, p.initial_state));
  }
  if (!converged) {
    sol.status = SolveStatus::kMaxIterations;
  } else if (sol.slack > options_.slack_tolerance) {
    sol.status = SolveStatus::kInfeasibleRelaxed;
  } else {
    sol.status = SolveStatus::kOptimal;
  }
  return sol;
}

namespace {

OcpProblem base_problem(const EgoState& ego, const OcpConfig& cfg,
                        const ControlModel& model,
                        const EgoInput& previous_input) {
  if (static_cast<int>(cfg.reference.size()) < cfg.horizon + 1) {
    throw std::invalid_argument(
        "assemble: reference must cover horizon + 1 stages");
  }
  OcpProblem p;
  p.model = &model;
  p.initial_state = ego.vec();
  p.previous_input = previous_input.vec();
  p.horizon = cfg.horizon;
  p.state_weight = cfg.state_weight;
  p.rate_weight = cfg.rate_weight;
  p.terminal_weight = cfg.terminal_weight;
  p.reference.assign(cfg.reference.begin(),
                     cfg.reference.begin() + cfg.horizon + 1);
  p.bounds.lower = Eigen::Vector2d(-cfg.accel_limit, -cfg.steer_limit);
  p.bounds.upper = Eigen::Vector2d(cfg.accel_limit, cfg.steer_limit);
  p.bounds.rate = Eigen::Vector2d(kInf, cfg.steer_rate_limit);
  p.penalty_weight = cfg.penalty_weight;
  return p;
}

void attach_safety(OcpProblem* p, const PredictedTrajectory& prediction,
                   const SafetyLoss& loss, double gamma, double theta) {
  if (prediction.horizon() < p->horizon) {
    throw std::invalid_argument(
        "assemble: prediction shorter than the horizon");
  }
  p->loss = &loss;
  p->gamma = gamma;
  p->theta_margin = theta * std::sqrt(1.0 + gamma * gamma);
  p->safety.resize(p->horizon + 1);
  for (int l = 0; l <= p->horizon; ++l) {
    p->safety[l].mean = prediction.means[l];
    p->safety[l].cov = prediction.covs[l];
  }
}

}  // namespace

OcpProblem assemble(const EgoState& ego, const PredictedTrajectory& prediction,
                    double theta, const OcpConfig& cfg,
                    const ControlModel& model, const SafetyLoss& loss,
                    const EgoInput& previous_input) {
  OcpProblem p = base_problem(ego, cfg, model, previous_input);
  attach_safety(&p, prediction, loss, cvar_gamma(cfg.alpha), theta);
  return p;
}

OcpProblem mean_mpc_assemble(const EgoState& ego,
                             const PredictedTrajectory& prediction,
                             const OcpConfig& cfg, const ControlModel& model,
                             const SafetyLoss& loss,
                             const EgoInput& previous_input) {
  OcpProblem p = base_problem(ego, cfg, model, previous_input);
  attach_safety(&p, prediction, loss, /*gamma=*/0.0, /*theta=*/0.0);
  return p;
}

OcpProblem tracking_assemble(const EgoState& ego, const OcpConfig& cfg,
                             const ControlModel& model,
                             const EgoInput& previous_input) {
  return base_problem(ego, cfg, model, previous_input);
}

}  // namespace sied
