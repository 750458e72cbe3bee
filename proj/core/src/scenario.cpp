#include "sied/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace sied {

const char* to_string(Method method) {
  switch (method) {
    case Method::kMean:
      return "mean";
    case Method::kDr:
      return "dr";
    case Method::kSied:
      return "sied";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "mean") return Method::kMean;
  if (name == "dr") return Method::kDr;
  if (name == "sied") return Method::kSied;
  throw std::invalid_argument("unknown method '" + name + "'");
}

OcpConfig ScenarioConfig::ocp_config() const {
  OcpConfig cfg;
  cfg.horizon = horizon;
  cfg.state_weight = state_weight.asDiagonal();
  cfg.rate_weight = rate_weight.asDiagonal();
  cfg.terminal_weight = Eigen::Matrix4d::Identity();
  cfg.accel_limit = accel_limit;
  cfg.steer_limit = steer_limit;
  cfg.steer_rate_limit = steer_rate_limit;
  cfg.alpha = risk.alpha;
  cfg.penalty_weight = penalty_weight;
  return cfg;
}

namespace {

struct RawValue {
  int line = 0;
  std::string text;                 // scalar or quoted string
  std::vector<double> numbers;      // array form
  bool is_array = false;
};

struct RawScenario {
  // key: "section.name"; repeated keys collect into the vector
  std::map<std::string, std::vector<RawValue>> entries;
};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, int line) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    throw ScenarioError(line, "expected a number, got '" + text + "'");
  }
  return v;
}

RawValue parse_value(const std::string& text, int line) {
  RawValue v;
  v.line = line;
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') {
      throw ScenarioError(line, "unterminated array");
    }
    v.is_array = true;
    std::stringstream ss(text.substr(1, text.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) {
        throw ScenarioError(line, "empty array element");
      }
      v.numbers.push_back(parse_number(item, line));
    }
    return v;
  }
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
    v.text = text.substr(1, text.size() - 2);
    return v;
  }
  v.text = text;
  return v;
}

RawScenario parse_raw(std::istream& in) {
  RawScenario raw;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ScenarioError(lineno, "unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw ScenarioError(lineno, "empty section name");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ScenarioError(lineno, "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ScenarioError(lineno, "empty key");
    }
    if (value.empty()) {
      throw ScenarioError(lineno, "missing value for '" + key + "'");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    raw.entries[full].push_back(parse_value(value, lineno));
  }
  return raw;
}

class Extractor {
 public:
  explicit Extractor(RawScenario raw) : raw_(std::move(raw)) {}

  bool has(const std::string& key) const { return raw_.entries.count(key) > 0; }

  const RawValue& single(const std::string& key) {
    auto it = raw_.entries.find(key);
    if (it == raw_.entries.end()) {
      throw ScenarioError(0, "missing required key '" + key + "'");
    }
    if (it->second.size() != 1) {
      throw ScenarioError(it->second[1].line, "duplicate key '" + key + "'");
    }
    used_.insert(key);
    return it->second.front();
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const RawValue& v = single(key);
    if (v.is_array) {
      throw ScenarioError(v.line, "'" + key + "' must be a scalar");
    }
    return parse_number(v.text, v.line);
  }

  int integer(const std::string& key, int fallback) {
    const double d = number(key, fallback);
    return static_cast<int>(std::llround(d));
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const RawValue& v = single(key);
    if (v.is_array) {
      throw ScenarioError(v.line, "'" + key + "' must be a string");
    }
    return v.text;
  }

  Eigen::VectorXd array(const std::string& key, int size) {
    const RawValue& v = single(key);
    if (!v.is_array || static_cast<int>(v.numbers.size()) != size) {
      throw ScenarioError(v.line, "'" + key + "' must be an array of " +
                                      std::to_string(size) + " numbers");
    }
    return Eigen::Map<const Eigen::VectorXd>(v.numbers.data(), size);
  }

  Eigen::VectorXd array(const std::string& key, int size,
                        const Eigen::VectorXd& fallback) {
    if (!has(key)) return fallback;
    return array(key, size);
  }

  /// Diagonal (n entries) or full row-major (n*n entries) square matrix.
  Eigen::MatrixXd square_matrix(const std::string& key, int n,
                                const Eigen::MatrixXd& fallback) {
    if (!has(key)) return fallback;
    const RawValue& v = single(key);
    if (v.is_array && static_cast<int>(v.numbers.size()) == n) {
      Eigen::VectorXd d =
          Eigen::Map<const Eigen::VectorXd>(v.numbers.data(), n);
      return d.asDiagonal();
    }
    if (v.is_array && static_cast<int>(v.numbers.size()) == n * n) {
      Eigen::MatrixXd m(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) m(r, c) = v.numbers[r * n + c];
      return m;
    }
    throw ScenarioError(v.line, "'" + key + "' must hold " +
                                    std::to_string(n) + " (diagonal) or " +
                                    std::to_string(n * n) +
                                    " (row-major) numbers");
  }

  std::vector<RawValue> repeated(const std::string& key) {
    auto it = raw_.entries.find(key);
    if (it == raw_.entries.end()) return {};
    used_.insert(key);
    return it->second;
  }

  void reject_unknown() const {
    for (const auto& [key, values] : raw_.entries) {
      if (used_.count(key) == 0) {
        throw ScenarioError(values.front().line, "unknown key '" + key + "'");
      }
    }
  }

 private:
  RawScenario raw_;
  std::set<std::string> used_;
};

}  // namespace

ScenarioConfig parse_scenario(std::istream& in) {
  Extractor ex(parse_raw(in));
  ScenarioConfig cfg;

  cfg.schema = ex.integer("schema", 0);
  cfg.name = ex.text("name", "");

  cfg.steps = ex.integer("sim.steps", cfg.steps);
  cfg.ts = ex.number("sim.ts", cfg.ts);
  cfg.car_length = ex.number("sim.car_length", cfg.car_length);
  cfg.collision_radius =
      ex.number("sim.collision_radius", cfg.car_length / 2.0);

  cfg.ego_init = EgoState::from_vec(
      ex.array("ego.init", 4, Eigen::Vector4d::Zero()));
  cfg.ego_input_init = EgoInput::from_vec(
      ex.array("ego.input_init", 2, Eigen::Vector2d::Zero()));

  cfg.obstacle_init = ObstacleState::from_vec(
      ex.array("obstacle.init", 4, Eigen::Vector4d::Zero()));
  cfg.obstacle_prior.mean =
      ex.array("obstacle.prior_mean", 4, cfg.obstacle_init.vec());
  cfg.obstacle_prior.cov = ex.square_matrix(
      "obstacle.prior_cov", 4, Eigen::Matrix4d::Identity() * 0.1);

  cfg.noise.Q = ex.square_matrix("noise.q", 4, cfg.noise.Q);
  cfg.noise.R = ex.square_matrix("noise.r", 4, cfg.noise.R);
  cfg.noise.Phi = ex.square_matrix("noise.phi", 4, cfg.noise.Phi);
  cfg.true_process_cov = ex.square_matrix("noise.true_q", 4, cfg.noise.Q);
  cfg.true_measurement_cov = ex.square_matrix("noise.true_r", 4, cfg.noise.R);

  cfg.risk.alpha = ex.number("risk.alpha", cfg.risk.alpha);
  cfg.risk.theta_max = ex.number("risk.theta_max", cfg.risk.theta_max);
  cfg.risk.tau = ex.number("risk.tau", cfg.risk.tau);
  cfg.window = ex.integer("risk.window", cfg.window);

  cfg.horizon = ex.integer("mpc.horizon", cfg.horizon);
  cfg.state_weight = ex.array("mpc.state_weight", 4, cfg.state_weight);
  cfg.rate_weight = ex.array("mpc.rate_weight", 2, cfg.rate_weight);
  cfg.accel_limit = ex.number("mpc.accel_limit", cfg.accel_limit);
  cfg.steer_limit = ex.number("mpc.steer_limit", cfg.steer_limit);
  cfg.steer_rate_limit =
      ex.number("mpc.steer_rate_limit", cfg.steer_rate_limit);
  cfg.penalty_weight = ex.number("mpc.penalty_weight", cfg.penalty_weight);

  const std::string csav = ex.text("behavior.csav", "zero");
  if (csav == "zero") {
    cfg.csav_mode = CsavMode::kZero;
  } else if (csav == "hold") {
    cfg.csav_mode = CsavMode::kHoldLastEstimate;
  } else {
    throw ScenarioError(0, "behavior.csav must be 'zero' or 'hold'");
  }

  for (const RawValue& v : ex.repeated("reference.waypoint")) {
    if (!v.is_array || v.numbers.size() != 5) {
      throw ScenarioError(v.line,
                          "waypoint must be [t, x, y, phi, v]");
    }
    Waypoint w;
    w.t = v.numbers[0];
    w.state = Eigen::Vector4d(v.numbers[1], v.numbers[2], v.numbers[3],
                              v.numbers[4]);
    cfg.reference.push_back(w);
  }

  for (const RawValue& v : ex.repeated("truth.segment")) {
    if (!v.is_array || v.numbers.size() != 3) {
      throw ScenarioError(v.line, "segment must be [t_start, a, beta]");
    }
    cfg.truth_schedule.push_back({v.numbers[0], v.numbers[1], v.numbers[2]});
  }

  ex.reject_unknown();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open scenario file '" + path + "'");
  }
  return parse_scenario(in);
}

namespace {

void require(std::vector<ValidationIssue>* issues, bool ok,
             const std::string& field, const std::string& message) {
  if (!ok) {
    issues->push_back({field, message});
  }
}

}  // namespace

std::vector<ValidationIssue> validate(const ScenarioConfig& cfg) {
  std::vector<ValidationIssue> issues;
  require(&issues, cfg.schema == 1, "schema",
          "unsupported schema version " + std::to_string(cfg.schema) +
              " (expected 1)");
  require(&issues, cfg.steps >= 1, "sim.steps", "must be >= 1");
  require(&issues, cfg.ts > 0.0, "sim.ts", "must be > 0");
  require(&issues, cfg.car_length > 0.0, "sim.car_length", "must be > 0");
  require(&issues, cfg.collision_radius > 0.0, "sim.collision_radius",
          "must be > 0");
  require(&issues, cfg.ego_init.vec().allFinite(), "ego.init",
          "must be finite");
  require(&issues, cfg.obstacle_init.vec().allFinite(), "obstacle.init",
          "must be finite");
  require(&issues, cfg.horizon >= 1, "mpc.horizon", "must be >= 1");
  require(&issues, cfg.accel_limit > 0.0, "mpc.accel_limit", "must be > 0");
  require(&issues, cfg.steer_limit > 0.0, "mpc.steer_limit", "must be > 0");
  require(&issues, cfg.steer_rate_limit > 0.0, "mpc.steer_rate_limit",
          "must be > 0");
  require(&issues, cfg.penalty_weight > 0.0, "mpc.penalty_weight",
          "must be > 0");
  require(&issues, (cfg.state_weight.array() >= 0.0).all(),
          "mpc.state_weight", "entries must be >= 0");
  require(&issues, (cfg.rate_weight.array() >= 0.0).all(), "mpc.rate_weight",
          "entries must be >= 0");
  require(&issues, cfg.window >= 1, "risk.window", "must be >= 1");
  require(&issues, cfg.risk.alpha >= 0.0 && cfg.risk.alpha < 1.0,
          "risk.alpha", "must be in [0, 1)");
  require(&issues, cfg.risk.theta_max >= 0.0, "risk.theta_max",
          "must be >= 0");
  require(&issues, cfg.risk.tau >= 0.0, "risk.tau", "must be >= 0");

  try {
    cfg.noise.validate();
  } catch (const std::invalid_argument& e) {
    issues.push_back({"noise", e.what()});
  }
  {
    NoiseModel truth_noise = cfg.noise;
    truth_noise.Q = cfg.true_process_cov;
    truth_noise.R = cfg.true_measurement_cov;
    try {
      truth_noise.validate();
    } catch (const std::invalid_argument& e) {
      issues.push_back({"noise.true_q", e.what()});
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> prior_eig(
      symmetrized(cfg.obstacle_prior.cov));
  require(&issues, prior_eig.eigenvalues().minCoeff() >= -1e-12,
          "obstacle.prior_cov", "must be positive semidefinite");

  require(&issues, !cfg.reference.empty(), "reference.waypoint",
          "at least one waypoint required");
  for (std::size_t i = 1; i < cfg.reference.size(); ++i) {
    require(&issues, cfg.reference[i].t > cfg.reference[i - 1].t,
            "reference.waypoint", "timestamps must strictly increase");
  }
  if (!cfg.reference.empty()) {
    const double needed =
        static_cast<double>(cfg.steps + cfg.horizon) * cfg.ts;
    require(&issues, cfg.reference.back().t >= needed, "reference.waypoint",
            "reference must cover steps + horizon (" + std::to_string(needed) +
                " s)");
  }

  require(&issues, !cfg.truth_schedule.empty(), "truth.segment",
          "at least one segment required");
  for (std::size_t i = 1; i < cfg.truth_schedule.size(); ++i) {
    require(&issues,
            cfg.truth_schedule[i].t_start > cfg.truth_schedule[i - 1].t_start,
            "truth.segment", "segment times must strictly increase");
  }
  if (!cfg.truth_schedule.empty()) {
    require(&issues, cfg.truth_schedule.front().t_start <= 0.0,
            "truth.segment", "first segment must start at t <= 0");
  }
  return issues;
}

Eigen::Vector4d reference_at(const std::vector<Waypoint>& waypoints,
                             double t) {
  if (waypoints.empty()) {
    throw std::invalid_argument("reference_at: no waypoints");
  }
  if (t <= waypoints.front().t) return waypoints.front().state;
  if (t >= waypoints.back().t) return waypoints.back().state;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if (t <= waypoints[i].t) {
      const Waypoint& a = waypoints[i - 1];
      const Waypoint& b = waypoints[i];
      const double s = (t - a.t) / (b.t - a.t);
      return (1.0 - s) * a.state + s * b.state;
    }
  }
  return waypoints.back().state;
}

ObstacleInput truth_input_at(const std::vector<TruthSegment>& schedule,
                             double t) {
  if (schedule.empty()) {
    throw std::invalid_argument("truth_input_at: empty schedule");
  }
  ObstacleInput d{schedule.front().a, schedule.front().beta};
  for (const TruthSegment& seg : schedule) {
    if (seg.t_start <= t) {
      d = {seg.a, seg.beta};
    } else {
      break;
    }
  }
  return d;
}

}  // namespace sied
