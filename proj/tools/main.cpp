// Command-line front end: run seeded episode batches and validate scenarios.
#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <iostream>
#include <thread>

#include "sied/sim.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using namespace sied;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitScenario = 2;
constexpr int kExitRuntime = 3;

const char* method_color(Method m) {
  switch (m) {
    case Method::kMean:
      return "#c05050";
    case Method::kDr:
      return "#3a9a5f";
    case Method::kSied:
      return "#3a63c0";
  }
  return "#888888";
}

struct RunSpec {
  std::string scenario_path;
  std::string method = "sied";
  std::uint64_t seed = 1;
  int runs = 1;
  std::string out_dir = "out";
  int jobs = 0;  // 0: pick from hardware
};

std::vector<Method> selected_methods(const std::string& name) {
  if (name == "all") {
    return {Method::kMean, Method::kDr, Method::kSied};
  }
  return {method_from_string(name)};
}

ScenarioConfig load_checked(const std::string& path) {
  ScenarioConfig cfg = load_scenario(path);
  const auto issues = validate(cfg);
  if (!issues.empty()) {
    for (const auto& issue : issues) {
      std::cerr << path << ": " << issue.field << ": " << issue.message
                << "\n";
    }
    throw ScenarioError(0, "scenario invalid");
  }
  return cfg;
}

std::string episode_filename(Method m, std::uint64_t seed) {
  return std::string(to_string(m)) + "_seed" + std::to_string(seed) + ".csv";
}

// Episodes are independent; a small pool fans them out and writes results
// into preallocated slots so the output order never depends on timing.
std::vector<EpisodeLog> run_batch(const ScenarioConfig& cfg,
                                  const std::vector<Method>& methods,
                                  std::uint64_t base_seed, int runs,
                                  int jobs) {
  struct Job {
    Method method;
    std::uint64_t seed;
  };
  std::vector<Job> work;
  for (Method m : methods) {
    for (int i = 0; i < runs; ++i) {
      work.push_back({m, base_seed + static_cast<std::uint64_t>(i)});
    }
  }
  std::vector<EpisodeLog> logs(work.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_workers = std::min<std::size_t>(
      work.size(), jobs > 0 ? static_cast<unsigned>(jobs) : hw);

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= work.size()) break;
      try {
        logs[idx] = run_episode(cfg, work[idx].method, work[idx].seed);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        error_message = e.what();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failed.load()) {
    throw std::runtime_error("episode failed: " + error_message);
  }
  return logs;
}

void emit_plots(const fs::path& out_dir, const std::vector<EpisodeLog>& logs) {
  // traces come from the first seed of each method
  std::map<Method, const EpisodeLog*> first;
  for (const auto& log : logs) {
    if (!first.count(log.method)) first[log.method] = &log;
  }

  std::vector<plot::Series> est_series;
  std::vector<plot::Series> theta_series;
  std::vector<plot::Series> cost_series;
  for (const auto& [method, log] : first) {
    plot::Series phi_err{std::string(to_string(method)) + " heading err",
                         method_color(method), {}, {}};
    plot::Series theta{to_string(method), method_color(method), {}, {}};
    plot::Series cost{to_string(method), method_color(method), {}, {}};
    for (const auto& rec : log->steps) {
      phi_err.x.push_back(rec.t);
      phi_err.y.push_back(std::abs(rec.belief_mean(2) - rec.truth(2)));
      theta.x.push_back(rec.t);
      theta.y.push_back(rec.theta);
      cost.x.push_back(rec.t);
      cost.y.push_back(rec.ocp_cost);
    }
    est_series.push_back(std::move(phi_err));
    theta_series.push_back(std::move(theta));
    cost_series.push_back(std::move(cost));
  }
  plot::write_line_chart((out_dir / "estimation_error.svg").string(),
                         "Obstacle heading estimation error", "t [s]",
                         "|error| [rad]", est_series);
  plot::write_line_chart((out_dir / "radius_trace.svg").string(),
                         "Ambiguity radius", "t [s]", "theta", theta_series);
  plot::write_line_chart((out_dir / "cost_trace.svg").string(),
                         "Receding-horizon cost per step", "t [s]", "cost",
                         cost_series);

  std::vector<std::pair<std::string, double>> bars;
  for (const auto& s : aggregate(logs)) {
    bars.emplace_back(to_string(s.method), s.solve_time_normalized);
  }
  plot::write_bar_chart((out_dir / "timing.svg").string(),
                        "Mean solve time (normalized)", "relative time",
                        bars);
}

int cmd_run(const RunSpec& spec) {
  ScenarioConfig cfg;
  try {
    cfg = load_checked(spec.scenario_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitScenario;
  }
  try {
    const std::vector<Method> methods = selected_methods(spec.method);
    const fs::path out_dir(spec.out_dir);
    fs::create_directories(out_dir);

    const std::vector<EpisodeLog> logs =
        run_batch(cfg, methods, spec.seed, spec.runs, spec.jobs);
    for (const auto& log : logs) {
      write_episode_csv(
          (out_dir / episode_filename(log.method, log.seed)).string(), log);
    }
    // summary and plots work from the serialized logs
    std::vector<EpisodeLog> parsed;
    parsed.reserve(logs.size());
    for (const auto& log : logs) {
      parsed.push_back(read_episode_csv(
          (out_dir / episode_filename(log.method, log.seed)).string()));
    }
    write_summary_csv((out_dir / "summary.csv").string(), aggregate(parsed));
    emit_plots(out_dir, parsed);

    for (const auto& s : aggregate(parsed)) {
      std::cout << to_string(s.method) << ": episodes " << s.episodes
                << ", avoidance " << s.avoidance_rate << ", cost "
                << s.cost_mean << " +- " << s.cost_std << ", time x"
                << s.solve_time_normalized << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_validate(const std::string& path) {
  try {
    const ScenarioConfig cfg = load_scenario(path);
    const auto issues = validate(cfg);
    if (issues.empty()) {
      std::cout << path << ": valid (scenario '" << cfg.name << "', "
                << cfg.steps << " steps)\n";
      return 0;
    }
    for (const auto& issue : issues) {
      std::cout << path << ": " << issue.field << ": " << issue.message
                << "\n";
    }
    return kExitScenario;
  } catch (const ScenarioError& e) {
    std::cout << path << ":" << e.line() << ": " << e.what() << "\n";
    return kExitScenario;
  } catch (const std::exception& e) {
    std::cout << path << ": " << e.what() << "\n";
    return kExitScenario;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence-scaled distributionally robust MPC simulator"};
  app.require_subcommand(1);

  RunSpec spec;
  CLI::App* run = app.add_subcommand("run", "Run seeded episode batches");
  run->add_option("--scenario", spec.scenario_path, "Scenario file")
      ->required();
  run->add_option("--method", spec.method, "mean | dr | sied | all")
      ->check(CLI::IsMember({"mean", "dr", "sied", "all"}));
  run->add_option("--seed", spec.seed, "Base seed (episode i uses seed+i)");
  run->add_option("--runs", spec.runs, "Episodes per method")
      ->check(CLI::PositiveNumber);
  run->add_option("--out", spec.out_dir, "Output directory");
  run->add_option("--jobs", spec.jobs, "Parallel episodes (default: cores)");

  std::string validate_path;
  CLI::App* val = app.add_subcommand("validate", "Check a scenario file");
  val->add_option("--scenario", validate_path, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (run->parsed()) {
    return cmd_run(spec);
  }
  return cmd_validate(validate_path);
}
