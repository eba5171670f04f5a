// Command-line front end: run a scenario, compare classic and corridor runs, self-check.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mppfc/sim.hpp"

namespace fs = std::filesystem;
using namespace mppfc;

namespace {

constexpr int kExitConstraintViolation = 2;
constexpr int kExitSolverFailures = 3;
constexpr double kViolationTolerance = 1e-6;

std::string read_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioConfig load_run_config(const fs::path& dir) {
  const std::string text = read_file(dir / "config.txt");
  std::string scenario;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("scenario", 0) == 0) {
      scenario = line.substr(line.find('=') + 1);
      scenario.erase(0, scenario.find_first_not_of(' '));
      break;
    }
  }
  return apply_config_text(ScenarioConfig::preset(scenario), text);
}

RunMetrics metrics_from_dir(const fs::path& dir) {
  const ScenarioConfig config = load_run_config(dir);
  SimLog log;
  log.scenario = config.scenario;
  log.corridor = config.corridor();
  for (const CsvRow& row : read_csv(dir / "log.csv")) {
    const auto& v = row.values;
    SimRecord r;
    r.t = v[0];
    StateVector x;
    for (int i = 0; i < kStateDim; ++i) x(i) = v[1 + i];
    r.state = QuadState::from_vector(x);
    InputVector u;
    for (int i = 0; i < kInputDim; ++i) u(i) = v[10 + i];
    r.input = QuadInput::from_vector(u);
    r.z = {v[14], v[15], std::isnan(v[16]) ? 0.0 : v[16], std::isnan(v[17]) ? 0.0 : v[17]};
    r.nu = {v[18], std::isnan(v[19]) ? 0.0 : v[19]};
    r.reference = Vec4(v[20], v[21], v[22], v[23]);
    r.error = Vec4(v[24], v[25], v[26], v[27]);
    r.solve_iters = static_cast<int>(v[28]);
    r.solve_time_ms = v[29];
    r.status = row.status == "converged" ? SolveStatus::converged : SolveStatus::max_iterations;
    log.records.push_back(r);
  }
  return compute_metrics(log, config);
}

int cmd_run(const std::string& scenario, const std::string& config_file, const fs::path& out,
            std::optional<double> thrust_scale, const std::string& sensor, bool verbose) {
  ScenarioConfig config = ScenarioConfig::preset(scenario);
  if (!config_file.empty()) config = apply_config_file(config, config_file);
  if (thrust_scale) config.thrust_scale = *thrust_scale;
  if (!sensor.empty()) config.sensor = parse_sensor_mode(sensor);
  config.validate();

  fs::create_directories(out);
  std::ofstream solver_log;
  if (verbose) {
    solver_log.open(out / "solver.log");
    if (!solver_log) throw std::runtime_error("cannot open " + (out / "solver.log").string());
  }
  const SimResult result = run_scenario(config, verbose ? &solver_log : nullptr);
  export_csv(result.log, out / "log.csv");
  summarize_json(result.metrics, out / "summary.json");
  {
    std::ofstream cfg(out / "config.txt");
    cfg << to_config_text(config);
  }

  const RunMetrics& m = result.metrics;
  std::printf("%s: %d steps, t_end %.2f s, rms %.4f m, mean ez %+.4f m, max|yaw rate| %.4f, "
              "violation %.2e, failures %d, mean iters %.2f, wall %.2f s\n",
              m.scenario.c_str(), m.steps, m.time_to_path_end, m.rms_position_error,
              m.mean_z_error, m.max_abs_yaw_rate, m.constraint_violation_max, m.failures,
              m.mean_solver_iters, m.wall_time);
  std::printf("config hash %016llx\n", static_cast<unsigned long long>(config_hash(config)));

  if (m.constraint_violation_max > kViolationTolerance) return kExitConstraintViolation;
  if (m.failures > 0.05 * m.steps) return kExitSolverFailures;
  return 0;
}

int cmd_compare(const fs::path& classic_dir, const fs::path& corridor_dir) {
  const CorridorComparison c =
      compare_corridor(metrics_from_dir(classic_dir), metrics_from_dir(corridor_dir));
  nlohmann::ordered_json doc;
  doc["classic_time_to_path_end_s"] = c.classic_time;
  doc["corridor_time_to_path_end_s"] = c.corridor_time;
  doc["absolute_reduction_s"] = c.absolute_reduction;
  doc["relative_reduction"] = c.relative_reduction;
  doc["max_abs_s2"] = c.max_abs_s2;
  doc["terminal_abs_s2"] = c.terminal_abs_s2;
  std::cout << doc.dump(2) << '\n';
  return 0;
}

bool check(const char* name, bool ok) {
  std::printf("%-44s %s\n", name, ok ? "ok" : "FAILED");
  return ok;
}

int cmd_validate() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> angle(-0.6, 0.6);
  const ModelParams params;
  bool all = true;

  double ortho = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Mat3 r = rotation_matrix(Vec3(angle(rng), angle(rng), 3.0 * angle(rng)));
    ortho = std::max(ortho, (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff());
  }
  all &= check("rotation orthonormal", ortho < 1e-12);

  QuadState hover;
  hover.position = Vec3(0.3, -0.2, 0.5);
  all &= check("hover equilibrium", dynamics(hover, QuadInput{}, params).norm() < 1e-12);

  QuadState x0;
  x0.velocity = Vec3(0.2, -0.1, 0.05);
  x0.attitude = Vec3(0.1, -0.05, 0.3);
  const QuadInput u{0.02, 0.1, -0.08, 0.3};
  auto integrate = [&](double h) {
    QuadState x = x0;
    for (int i = 0; i < static_cast<int>(std::lround(1.0 / h)); ++i) x = rk4_step(x, u, h, params);
    return x.to_vector();
  };
  const StateVector ref = integrate(1.0 / 5120);
  const double ratio = (integrate(0.025) - ref).norm() / (integrate(0.0125) - ref).norm();
  all &= check("rk4 step-halving ratio in [14, 18]", ratio >= 14.0 && ratio <= 18.0);

  ScenarioConfig hover_cfg = ScenarioConfig::preset("hover");
  hover_cfg.total_time = 3.0;
  const RunMetrics m = run_scenario(hover_cfg).metrics;
  all &= check("hover regulation rms < 0.01 m", m.rms_position_error < 0.01);
  all &= check("hover run within boxes", m.constraint_violation_max <= kViolationTolerance);
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model predictive path-following control of a quadrotor (simulation)"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run one closed-loop scenario");
  std::string scenario, config_file, sensor, out_dir = "out";
  std::optional<double> thrust_scale;
  bool verbose = false;
  run->add_option("--scenario", scenario, "Scenario name")
      ->required()
      ->check(CLI::IsMember({"spiral", "lemniscate", "sinusoid", "sinusoid-corridor", "hover"}));
  run->add_option("--config", config_file, "key = value overrides")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--thrust-scale", thrust_scale, "Plant thrust mismatch factor");
  run->add_option("--sensor", sensor, "Velocity sensor model")->check(CLI::IsMember({"fd", "exact"}));
  run->add_flag("--verbose", verbose, "Write per-solve iteration tables to solver.log");

  auto* compare = app.add_subcommand("compare", "Compare a classic and a corridor sinusoid run");
  std::string classic_dir, corridor_dir;
  compare->add_option("--classic", classic_dir)->required()->check(CLI::ExistingDirectory);
  compare->add_option("--corridor", corridor_dir)->required()->check(CLI::ExistingDirectory);

  auto* validate = app.add_subcommand("validate", "Run model and closed-loop self-checks");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(scenario, config_file, out_dir, thrust_scale, sensor, verbose);
    if (*compare) return cmd_compare(classic_dir, corridor_dir);
    if (*validate) return cmd_validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
