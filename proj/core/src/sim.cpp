#include "sied/sim.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace sied {

namespace {

constexpr const char* kCsvHeader =
    "step,t,obs_x,obs_y,obs_phi,obs_v,zeta_x,zeta_y,zeta_phi,zeta_v,"
    "est_x,est_y,est_phi,est_v,var_x,var_y,var_phi,var_v,"
    "gap_a,gap_beta,gapcov_aa,gapcov_ab,gapcov_bb,confidence,theta,"
    "ego_x,ego_y,ego_phi,ego_v,u_a,u_delta,stage_cost,ocp_cost,"
    "solver_status,iterations,solve_time,distance";

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

Eigen::Vector4d quantize4(const Eigen::Vector4d& v) {
  Eigen::Vector4d out;
  for (int i = 0; i < 4; ++i) out(i) = quantize_to_log_precision(v(i));
  return out;
}

}  // namespace

ObstacleInput CsavBehavior::predict(const GaussianBelief& belief) const {
  (void)belief;  // constant-velocity model: the state does not matter
  if (mode_ == CsavMode::kHoldLastEstimate) {
    return held_;
  }
  return ObstacleInput{0.0, 0.0};
}

bool collision_check(const EgoState& ego, const ObstacleState& obs,
                     double radius) {
  if (!(radius > 0.0)) {
    throw std::invalid_argument("collision_check: radius must be > 0");
  }
  const double dx = ego.x - obs.x;
  const double dy = ego.y - obs.y;
  return std::hypot(dx, dy) < 2.0 * radius;
}

EpisodeLog run_episode(const ScenarioConfig& cfg, Method method,
                       std::uint64_t seed) {
  const BicycleKinematics kin(cfg.ts, cfg.car_length);
  const BicycleObstacleModel obs_model(kin);
  const SsieFilter filter(obs_model, cfg.noise);
  CsavBehavior behavior(cfg.csav_mode);
  const BicycleControlModel control(kin);
  const SquaredDistanceLoss loss;
  OcpConfig ocp_cfg = cfg.ocp_config();
  const OcpSolver solver;
  ConfidenceWindow window(cfg.window);

  // Noise streams drawn up front in a fixed order; they depend only on the
  // seed, so episodes with equal seeds are paired across methods.
  std::mt19937_64 rng(seed);
  const GaussianSampler process_noise(cfg.true_process_cov);
  const GaussianSampler measurement_noise(cfg.true_measurement_cov);
  std::vector<Eigen::Vector4d> omega(cfg.steps);
  std::vector<Eigen::Vector4d> nu(cfg.steps);
  for (int k = 0; k < cfg.steps; ++k) {
    omega[k] = process_noise.sample(rng);
    nu[k] = measurement_noise.sample(rng);
  }

  EpisodeLog log;
  log.scenario = cfg.name;
  log.method = method;
  log.seed = seed;
  log.collision_radius = cfg.collision_radius;
  log.min_distance = std::numeric_limits<double>::infinity();
  log.steps.reserve(cfg.steps);

  ObstacleState truth = cfg.obstacle_init;
  GaussianBelief belief = cfg.obstacle_prior;
  EgoState ego = cfg.ego_init;
  EgoInput applied = cfg.ego_input_init;
  OcpSolution warm;
  bool have_warm = false;

  for (int k = 1; k <= cfg.steps; ++k) {
    StepRecord rec;
    rec.step = k;
    rec.t = k * cfg.ts;

    // World advances from time k-1 to k; the input chosen at the previous
    // tick acts over this interval.
    const ObstacleInput d_true =
        truth_input_at(cfg.truth_schedule, (k - 1) * cfg.ts);
    truth = kin.obstacle_step(truth, d_true, omega[k - 1]);
    ego = kin.ego_step(ego, applied);
    const Eigen::Vector4d zeta = observe(truth, nu[k - 1], cfg.noise.Phi);

    double theta = 0.0;
    try {
      const ObstacleInput d_model = behavior.predict(belief);
      if (method == Method::kSied) {
        const SsieStepResult res = filter.step(belief, d_model, zeta);
        belief = res.posterior;
        window.push(res.gap);
        rec.gap = res.gap.gap;
        rec.gap_cov =
            Eigen::Vector3d(res.gap.cov(0, 0), res.gap.cov(0, 1),
                            res.gap.cov(1, 1));
        rec.confidence = window.confidence();
        theta = ambiguity_radius(rec.confidence, cfg.risk);
        if (cfg.csav_mode == CsavMode::kHoldLastEstimate) {
          behavior.hold(
              ObstacleInput::from_vec(d_model.vec() + res.gap.gap));
        }
      } else {
        belief = filter.ekf_step(belief, d_model, zeta);
        theta = method == Method::kDr ? cfg.risk.theta_max : 0.0;
      }
    } catch (const std::exception&) {
      // Filter breakdown leaves no usable belief; stop with a partial log.
      log.aborted = true;
      break;
    }
    rec.theta = theta;

    const PredictedTrajectory prediction =
        propagate(belief, obs_model, behavior, cfg.noise.Q, cfg.horizon);

    ocp_cfg.reference.clear();
    ocp_cfg.reference.reserve(cfg.horizon + 1);
    for (int l = 0; l <= cfg.horizon; ++l) {
      ocp_cfg.reference.push_back(
          reference_at(cfg.reference, (k + l) * cfg.ts));
    }

    EgoInput chosen;
    try {
      OcpProblem problem =
          method == Method::kMean
              ? mean_mpc_assemble(ego, prediction, ocp_cfg, control, loss,
                                  applied)
              : assemble(ego, prediction, theta, ocp_cfg, control, loss,
                         applied);
      const auto start = std::chrono::steady_clock::now();
      const OcpSolution sol =
          solver.solve(problem, have_warm ? &warm : nullptr);
      const auto stop = std::chrono::steady_clock::now();
      rec.solve_seconds =
          std::chrono::duration<double>(stop - start).count();
      chosen = EgoInput::from_vec(sol.inputs.front());
      rec.ocp_cost = sol.cost;
      rec.solver_status = to_string(sol.status);
      rec.iterations = sol.iterations;
      warm.inputs = shift_inputs(sol.inputs);
      have_warm = true;
    } catch (const std::exception&) {
      // Hard solver failure: brake at the limit, hold the steering angle.
      chosen = EgoInput{-cfg.accel_limit, applied.delta};
      rec.solver_status = "failed";
      have_warm = false;
    }

    const Eigen::Vector4d ref_now = reference_at(cfg.reference, k * cfg.ts);
    const Eigen::Vector4d track_err = ego.vec() - ref_now;
    const Eigen::Vector2d du = chosen.vec() - applied.vec();
    rec.stage_cost = track_err.dot(cfg.state_weight.asDiagonal() * track_err) +
                     du.dot(cfg.rate_weight.asDiagonal() * du);

    rec.truth = truth.vec();
    rec.observation = zeta;
    rec.belief_mean = belief.mean;
    rec.belief_var = belief.cov.diagonal();
    rec.ego = ego.vec();
    rec.input = chosen.vec();
    rec.distance = std::hypot(ego.x - truth.x, ego.y - truth.y);

    log.min_distance = std::min(log.min_distance, rec.distance);
    if (collision_check(ego, truth, cfg.collision_radius)) {
      log.collision = true;
    }
    log.steps.push_back(std::move(rec));
    applied = chosen;
  }
  return log;
}

bool logs_equal_deterministic(const EpisodeLog& a, const EpisodeLog& b) {
  if (a.scenario != b.scenario || a.method != b.method || a.seed != b.seed ||
      a.collision_radius != b.collision_radius ||
      a.collision != b.collision || a.aborted != b.aborted ||
      a.min_distance != b.min_distance || a.steps.size() != b.steps.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const StepRecord& x = a.steps[i];
    const StepRecord& y = b.steps[i];
    if (x.step != y.step || x.t != y.t || x.truth != y.truth ||
        x.observation != y.observation || x.belief_mean != y.belief_mean ||
        x.belief_var != y.belief_var || x.gap != y.gap ||
        x.gap_cov != y.gap_cov || x.confidence != y.confidence ||
        x.theta != y.theta || x.ego != y.ego || x.input != y.input ||
        x.stage_cost != y.stage_cost || x.ocp_cost != y.ocp_cost ||
        x.solver_status != y.solver_status || x.iterations != y.iterations ||
        x.distance != y.distance) {
      return false;
    }
  }
  return true;
}

std::vector<MethodSummary> aggregate(const std::vector<EpisodeLog>& logs) {
  if (logs.empty()) {
    throw std::invalid_argument("aggregate: at least one log required");
  }
  std::map<Method, std::vector<const EpisodeLog*>> groups;
  for (const EpisodeLog& log : logs) {
    groups[log.method].push_back(&log);
  }

  std::vector<MethodSummary> out;
  for (const auto& [method, members] : groups) {
    MethodSummary s;
    s.method = method;
    s.episodes = static_cast<int>(members.size());

    int collisions = 0;
    Eigen::Vector4d sq_err = Eigen::Vector4d::Zero();
    std::size_t n_steps = 0;
    double cost_sum = 0.0, cost_sq = 0.0, time_sum = 0.0;
    for (const EpisodeLog* log : members) {
      if (log->collision) ++collisions;
      for (const StepRecord& rec : log->steps) {
        const Eigen::Vector4d err =
            quantize4(rec.belief_mean) - quantize4(rec.truth);
        sq_err += err.cwiseProduct(err);
        const double c = quantize_to_log_precision(rec.ocp_cost);
        cost_sum += c;
        cost_sq += c * c;
        time_sum += quantize_to_log_precision(rec.solve_seconds);
        ++n_steps;
      }
    }
    s.avoidance_rate =
        1.0 - static_cast<double>(collisions) / s.episodes;
    if (n_steps > 0) {
      s.estimation_rmse =
          (sq_err / static_cast<double>(n_steps)).cwiseSqrt();
      s.cost_mean = cost_sum / static_cast<double>(n_steps);
      const double var =
          std::max(0.0, cost_sq / static_cast<double>(n_steps) -
                            s.cost_mean * s.cost_mean);
      s.cost_std = std::sqrt(var);
      s.solve_time_mean = time_sum / static_cast<double>(n_steps);
    }
    out.push_back(s);
  }

  double denom = out.front().solve_time_mean;
  for (const MethodSummary& s : out) {
    if (s.method == Method::kMean) denom = s.solve_time_mean;
  }
  for (MethodSummary& s : out) {
    s.solve_time_normalized =
        denom > 0.0 ? s.solve_time_mean / denom : 1.0;
  }
  return out;
}

void write_episode_csv(const std::string& path, const EpisodeLog& log) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  std::string name = log.scenario.empty() ? "unnamed" : log.scenario;
  for (char& c : name) {
    if (c == ' ') c = '_';
  }
  out << "# schema=1 scenario=" << name << " method=" << to_string(log.method)
      << " seed=" << log.seed
      << " collision_radius=" << fmt9(log.collision_radius)
      << " collision=" << (log.collision ? 1 : 0)
      << " aborted=" << (log.aborted ? 1 : 0) << "\n";
  out << kCsvHeader << "\n";
  for (const StepRecord& r : log.steps) {
    out << r.step << ',' << fmt9(r.t);
    for (int i = 0; i < 4; ++i) out << ',' << fmt9(r.truth(i));
    for (int i = 0; i < 4; ++i) out << ',' << fmt9(r.observation(i));
    for (int i = 0; i < 4; ++i) out << ',' << fmt9(r.belief_mean(i));
    for (int i = 0; i < 4; ++i) out << ',' << fmt9(r.belief_var(i));
    out << ',' << fmt9(r.gap(0)) << ',' << fmt9(r.gap(1));
    for (int i = 0; i < 3; ++i) out << ',' << fmt9(r.gap_cov(i));
    out << ',' << fmt9(r.confidence) << ',' << fmt9(r.theta);
    for (int i = 0; i < 4; ++i) out << ',' << fmt9(r.ego(i));
    out << ',' << fmt9(r.input(0)) << ',' << fmt9(r.input(1));
    out << ',' << fmt9(r.stage_cost) << ',' << fmt9(r.ocp_cost);
    out << ',' << r.solver_status << ',' << r.iterations << ','
        << fmt9(r.solve_seconds) << ',' << fmt9(r.distance);
    out << "\n";
  }
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) {
    parts.push_back(item);
  }
  return parts;
}

double to_double(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) {
    throw std::runtime_error("episode csv: bad number in " + context);
  }
  return v;
}

}  // namespace

EpisodeLog read_episode_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line) || line.empty() || line.front() != '#') {
    throw std::runtime_error("episode csv: missing metadata line");
  }
  EpisodeLog log;
  bool meta_collision = false;
  {
    std::stringstream ss(line.substr(1));
    std::string token;
    while (ss >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "scenario") log.scenario = value;
      if (key == "method") log.method = method_from_string(value);
      if (key == "seed") log.seed = std::stoull(value);
      if (key == "collision_radius")
        log.collision_radius = to_double(value, "metadata");
      if (key == "collision") meta_collision = value == "1";
      if (key == "aborted") log.aborted = value == "1";
    }
  }
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::runtime_error("episode csv: unexpected header");
  }
  log.min_distance = std::numeric_limits<double>::infinity();
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 37) {
      throw std::runtime_error("episode csv: expected 37 columns at line " +
                               std::to_string(lineno));
    }
    const std::string ctx = "line " + std::to_string(lineno);
    StepRecord r;
    int i = 0;
    r.step = static_cast<int>(to_double(f[i++], ctx));
    r.t = to_double(f[i++], ctx);
    for (int j = 0; j < 4; ++j) r.truth(j) = to_double(f[i++], ctx);
    for (int j = 0; j < 4; ++j) r.observation(j) = to_double(f[i++], ctx);
    for (int j = 0; j < 4; ++j) r.belief_mean(j) = to_double(f[i++], ctx);
    for (int j = 0; j < 4; ++j) r.belief_var(j) = to_double(f[i++], ctx);
    for (int j = 0; j < 2; ++j) r.gap(j) = to_double(f[i++], ctx);
    for (int j = 0; j < 3; ++j) r.gap_cov(j) = to_double(f[i++], ctx);
    r.confidence = to_double(f[i++], ctx);
    r.theta = to_double(f[i++], ctx);
    for (int j = 0; j < 4; ++j) r.ego(j) = to_double(f[i++], ctx);
    for (int j = 0; j < 2; ++j) r.input(j) = to_double(f[i++], ctx);
    r.stage_cost = to_double(f[i++], ctx);
    r.ocp_cost = to_double(f[i++], ctx);
    r.solver_status = f[i++];
    r.iterations = static_cast<int>(to_double(f[i++], ctx));
    r.solve_seconds = to_double(f[i++], ctx);
    r.distance = to_double(f[i++], ctx);
    log.min_distance = std::min(log.min_distance, r.distance);
    if (r.distance < 2.0 * log.collision_radius) {
      log.collision = true;
    }
    log.steps.push_back(std::move(r));
  }
  if (log.collision != meta_collision) {
    throw std::runtime_error(
        "episode csv: collision flag inconsistent with distances");
  }
  return log;
}

void write_summary_csv(const std::string& path,
                       const std::vector<MethodSummary>& summaries) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  out << "method,episodes,avoidance_rate,rmse_x,rmse_y,rmse_phi,rmse_v,"
         "cost_mean,cost_std,solve_time_mean,solve_time_normalized\n";
  for (const MethodSummary& s : summaries) {
    out << to_string(s.method) << ',' << s.episodes << ','
        << fmt9(s.avoidance_rate);
    for (int i = 0; i < 4; ++i) out << ',' << fmt9(s.estimation_rmse(i));
    out << ',' << fmt9(s.cost_mean) << ',' << fmt9(s.cost_std) << ','
        << fmt9(s.solve_time_mean) << ',' << fmt9(s.solve_time_normalized)
        << "\n";
  }
}

FilterTrace run_filter_comparison(const ScenarioConfig& cfg,
                                  std::uint64_t seed) {
  const BicycleKinematics kin(cfg.ts, cfg.car_length);
  const BicycleObstacleModel obs_model(kin);
  const SsieFilter filter(obs_model, cfg.noise);
  CsavBehavior behavior_ssie(cfg.csav_mode);
  CsavBehavior behavior_ekf(cfg.csav_mode);  // its hold input never updates
  ConfidenceWindow window(cfg.window);

  // Same draw order as run_episode, so the generated obstacle stream is the
  // one any episode with this seed observes.
  std::mt19937_64 rng(seed);
  const GaussianSampler process_noise(cfg.true_process_cov);
  const GaussianSampler measurement_noise(cfg.true_measurement_cov);

  FilterTrace trace;
  ObstacleState truth = cfg.obstacle_init;
  GaussianBelief ssie_belief = cfg.obstacle_prior;
  GaussianBelief ekf_belief = cfg.obstacle_prior;

  for (int k = 1; k <= cfg.steps; ++k) {
    const Eigen::Vector4d omega = process_noise.sample(rng);
    const Eigen::Vector4d nu = measurement_noise.sample(rng);
    const ObstacleInput d_true =
        truth_input_at(cfg.truth_schedule, (k - 1) * cfg.ts);
    truth = kin.obstacle_step(truth, d_true, omega);
    const Eigen::Vector4d zeta = observe(truth, nu, cfg.noise.Phi);

    const SsieStepResult res =
        filter.step(ssie_belief, behavior_ssie.predict(ssie_belief), zeta);
    ssie_belief = res.posterior;
    window.push(res.gap);
    if (cfg.csav_mode == CsavMode::kHoldLastEstimate) {
      behavior_ssie.hold(ObstacleInput::from_vec(res.gap.gap));
    }
    ekf_belief =
        filter.ekf_step(ekf_belief, behavior_ekf.predict(ekf_belief), zeta);

    trace.truth.push_back(truth.vec());
    trace.ssie_error.push_back(ssie_belief.mean - truth.vec());
    trace.ekf_error.push_back(ekf_belief.mean - truth.vec());
    trace.gap_estimates.push_back(res.gap.gap);
    trace.theta.push_back(ambiguity_radius(window.confidence(), cfg.risk));
    trace.true_gap_norm.push_back(d_true.vec().norm());
  }
  return trace;
}

std::pair<int, int> turning_window(const ScenarioConfig& cfg) {
  int first = -1;
  int last = -1;
  for (int k = 1; k <= cfg.steps; ++k) {
    const ObstacleInput d =
        truth_input_at(cfg.truth_schedule, (k - 1) * cfg.ts);
    if (d.a != 0.0 || d.beta != 0.0) {
      if (first < 0) first = k;
      last = k;
    }
  }
  if (first < 0) {
    return {1, cfg.steps};
  }
  return {first, last};
}

}  // namespace sied
