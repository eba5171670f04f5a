#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mppfc/controller.hpp"
#include "mppfc/scenario_config.hpp"

namespace mppfc {

/// Velocity estimate from position samples: consecutive finite differences smoothed by a
/// moving average over the last `window` differences. Until the window is full, the true
/// velocity is passed through.
class VelocitySensor {
 public:
  VelocitySensor(SensorMode mode, double dt, int window = 5, double position_noise = 0.0,
                 std::uint64_t seed = 0);

  /// Returns the measured state for the current sample.
  [[nodiscard]] QuadState sense(const QuadState& plant);

  [[nodiscard]] bool warmed_up() const { return static_cast<int>(diffs_.size()) == window_; }
  void reset();

 private:
  SensorMode mode_;
  double dt_;
  int window_;
  double noise_;
  std::mt19937_64 rng_;
  std::optional<Vec3> last_position_;
  std::deque<Vec3> diffs_;
};

struct SimRecord {
  double t = 0.0;
  QuadState state;  // plant state at t
  QuadInput input;  // applied over [t, t + delta)
  VirtualInput nu;
  PathState z;     // timing-law state at t
  Vec4 reference;  // p(s) at t
  Vec4 error;      // y - p(s), yaw wrapped
  int solve_iters = 0;
  double solve_time_ms = 0.0;
  SolveStatus status = SolveStatus::converged;
  bool clamped = false;  // measurement or timing-law state was clamped this step
};

struct SimLog {
  std::string scenario;
  bool corridor = false;
  std::vector<SimRecord> records;
};

struct RunMetrics {
  std::string scenario;
  std::string path_name;
  bool corridor = false;
  double s_dot_max = 0.0;
  int steps = 0;
  double rms_position_error = 0.0;      // m
  double mean_z_error = 0.0;            // m, signed
  double max_abs_yaw_rate = 0.0;        // rad/s, applied command
  double time_to_path_end = 0.0;        // s, first t with s >= -1e-3; NaN if never reached
  double terminal_position_error = 0.0; // m, at the last record
  double constraint_violation_max = 0.0;
  double mean_solver_iters = 0.0;
  int max_solver_iters = 0;
  double mean_solve_time_ms = 0.0;
  double max_solve_time_ms = 0.0;
  int failures = 0;
  double max_abs_s2 = 0.0;
  double terminal_abs_s2 = 0.0;
  double wall_time = 0.0;  // s
};

struct SimResult {
  SimLog log;
  RunMetrics metrics;
};

inline constexpr double kPathEndThreshold = -1e-3;

/// Closed-loop run: sense, solve, hold the input for one interval while integrating the plant,
/// then advance the timing law. Stops at total_time, or after the output has stayed within
/// 0.02 m of the path end for 1 s. Throws std::runtime_error on a non-finite plant state.
/// With `solver_log`, every solve's iteration table is written there.
[[nodiscard]] SimResult run_scenario(const ScenarioConfig& config,
                                     std::ostream* solver_log = nullptr);

/// One plant interval of length dt with `substeps` RK4 steps. The thrust mismatch acts on the
/// total thrust: the true plant sees thrust_scale * (dT + m_nominal g) with mass m_true.
[[nodiscard]] QuadState plant_step(const QuadState& state, const QuadInput& input, double dt,
                                   const ScenarioConfig& config);

/// Worst violation of the state box over logged states plus the input box over applied inputs.
[[nodiscard]] double constraint_violation(const SimLog& log, const OcpConfig& ocp);

[[nodiscard]] RunMetrics compute_metrics(const SimLog& log, const ScenarioConfig& config);

struct CorridorComparison {
  double classic_time = 0.0;
  double corridor_time = 0.0;
  double absolute_reduction = 0.0;  // s
  double relative_reduction = 0.0;  // fraction of the classic time
  double max_abs_s2 = 0.0;
  double terminal_abs_s2 = 0.0;
};

/// Throws std::invalid_argument unless the classic run is on the sinusoid, the other run is in
/// corridor mode on the same base path and both share s_dot_max.
[[nodiscard]] CorridorComparison compare_corridor(const RunMetrics& classic,
                                                  const RunMetrics& corridor);

/// Exact CSV header of log.csv.
[[nodiscard]] const std::string& csv_header();

void export_csv(const SimLog& log, const std::filesystem::path& file);

/// Parsed log.csv row; corridor-only fields are NaN when empty.
struct CsvRow {
  std::vector<double> values;  // every column except status
  std::string status;
};

[[nodiscard]] std::vector<CsvRow> read_csv(const std::filesystem::path& file);

/// Writes summary.json. Throws std::invalid_argument for a run without steps.
void summarize_json(const RunMetrics& metrics, const std::filesystem::path& file);

}  // namespace mppfc
