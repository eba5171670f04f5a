#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "mppfc/nlp_solver.hpp"
#include "mppfc/path.hpp"
#include "mppfc/quad_dynamics.hpp"
#include "mppfc/transcription.hpp"

namespace mppfc {

enum class SensorMode { exact, finite_difference };

[[nodiscard]] std::string_view to_string(SensorMode mode);
[[nodiscard]] SensorMode parse_sensor_mode(std::string_view text);

/// Everything needed to reproduce one closed-loop run.
struct ScenarioConfig {
  std::string scenario = "spiral";  // spiral | lemniscate | sinusoid | sinusoid-corridor | hover
  double total_time = 40.0;         // s
  int plant_substeps = 5;           // RK4 substeps of the plant per control interval
  double thrust_scale = 1.0;        // plant thrust = thrust_scale * (dT + m g)
  double mass_error = 0.0;          // plant mass = (1 + mass_error) * nominal mass
  SensorMode sensor = SensorMode::exact;
  double position_noise = 0.0;  // half-width of uniform position noise, m
  std::uint64_t seed = 0;
  Vec4 hover_point{0.0, 0.0, 0.5, 0.0};
  Interval s2_bounds{-1.5707963267948966, 1.5707963267948966};

  ModelParams model;
  OcpConfig ocp;
  SolverSettings solver;

  [[nodiscard]] bool corridor() const { return ocp.corridor; }
  [[nodiscard]] double s_dot_max() const { return ocp.s_dot_max; }

  /// Throws std::invalid_argument on an unusable configuration.
  void validate() const;

  /// Builds the path named by `scenario`.
  [[nodiscard]] AnyPath make_path() const;

  /// Defaults for a named scenario. Throws std::invalid_argument for unknown names.
  [[nodiscard]] static ScenarioConfig preset(std::string_view scenario);
};

/// Applies `key = value` lines ('#' starts a comment) on top of `base`. A `scenario` key, if
/// present, must match base.scenario. List values are comma separated.
[[nodiscard]] ScenarioConfig apply_config_text(ScenarioConfig base, std::string_view text);
[[nodiscard]] ScenarioConfig apply_config_file(ScenarioConfig base,
                                               const std::filesystem::path& file);

/// Canonical key/value dump; `apply_config_text(preset(c.scenario), to_config_text(c))`
/// reproduces `c`.
[[nodiscard]] std::string to_config_text(const ScenarioConfig& config);

/// FNV-1a hash of the canonical config text.
[[nodiscard]] std::uint64_t config_hash(const ScenarioConfig& config);

}  // namespace mppfc
