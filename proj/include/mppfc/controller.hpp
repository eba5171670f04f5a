#pragma once

#include <optional>
#include <vector>

#include "mppfc/nlp_solver.hpp"
#include "mppfc/path.hpp"
#include "mppfc/quad_dynamics.hpp"
#include "mppfc/transcription.hpp"

namespace mppfc {

struct StepDiagnostics {
  SolveResult solve;
  bool warm_started = false;
  bool failed = false;
  /// Equality residual of the point handed to the solver.
  double initial_equality_residual = 0.0;
  std::vector<ClampEvent> clamp_events;
  int relaxed_path_end_stages = 0;
  std::vector<QuadState> predicted_states;  // N + 1 entries
  std::vector<PathState> predicted_path;    // N + 1 entries
  std::vector<QuadInput> predicted_inputs;  // N entries
  std::vector<VirtualInput> predicted_virtual_inputs;
};

struct ControlOutput {
  QuadInput input;
  VirtualInput nu;
  StepDiagnostics diagnostics;
};

/// Receding-horizon path-following controller.
///
/// Each step pins the OCP at the measured plant state and the controller's own timing-law
/// state, solves it (warm-started from the shifted previous solution) and returns the first
/// stage. The timing-law state is then advanced in closed form with the applied virtual input.
class MppfcController {
 public:
  MppfcController(AnyPath path, OcpConfig config, SolverSettings settings, ModelParams params);

  [[nodiscard]] ControlOutput control_step(const QuadState& measured);

  /// s <- s + s_dot dt + nu dt^2 / 2, s_dot <- s_dot + nu dt (per chain), then clamped to the
  /// admissible box. Returns the new state; `last_advance_clamped()` reports clamping.
  PathState advance_path_state(const VirtualInput& nu, double dt);

  [[nodiscard]] const PathState& path_state() const { return path_state_; }
  [[nodiscard]] bool last_advance_clamped() const { return last_clamped_; }
  [[nodiscard]] const OcpConfig& config() const { return config_; }
  [[nodiscard]] const AnyPath& path() const { return path_; }
  [[nodiscard]] bool corridor() const { return config_.corridor; }

  /// Overrides the timing-law state (takeover at a non-default parameter, tests).
  void set_path_state(const PathState& z);
  /// Drops the warm-start memory; the next step is solved from a cold start.
  void reset_warm_start() { last_solution_.reset(); }

 private:
  AnyPath path_;
  OcpConfig config_;
  ModelParams params_;
  NlpSolver solver_;
  PathState path_state_;
  std::optional<SolveResult> last_solution_;
  bool last_clamped_ = false;
};

/// Timing-law state at takeover: s = s_initial, s_dot at its floor, corridor offset at rest.
[[nodiscard]] PathState initial_path_state(const AnyPath& path, const OcpConfig& config);

}  // namespace mppfc
