#include "mppfc/controller.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace mppfc {

PathState initial_path_state(const AnyPath& path, const OcpConfig& config) {
  return {base_path(path).s_initial(), config.s_dot_floor, 0.0, 0.0};
}

MppfcController::MppfcController(AnyPath path, OcpConfig config, SolverSettings settings,
                                 ModelParams params)
    : path_(std::move(path)),
      config_(std::move(config)),
      params_(params),
      solver_(settings),
      path_state_(initial_path_state(path_, config_)) {
  config_.validate();
  params_.validate();
  if (config_.corridor != is_corridor(path_)) {
    throw std::invalid_argument("MppfcController: path and config disagree on corridor mode");
  }
}

void MppfcController::set_path_state(const PathState& z) {
  path_state_ = z;
  last_solution_.reset();
}

ControlOutput MppfcController::control_step(const QuadState& measured) {
  if (!measured.is_finite()) throw std::invalid_argument("control_step: measured state not finite");

  const OcpProblem problem = build_ocp(measured, path_state_, path_, config_, params_);
  const DecisionLayout& lay = problem.layout();

  ControlOutput out;
  StepDiagnostics& diag = out.diagnostics;
  diag.clamp_events = problem.clamp_events();
  diag.relaxed_path_end_stages = problem.relaxed_path_end_stages();

  Eigen::VectorXd guess;
  Eigen::VectorXd multipliers;
  if (last_solution_ && last_solution_->status == SolveStatus::converged &&
      last_solution_->decision.size() == lay.size()) {
    guess = warm_start_shift(*last_solution_, problem);
    multipliers = shift_multipliers(*last_solution_, problem);
    diag.warm_started = true;
  } else {
    const std::vector<QuadInput> hover(lay.horizon);
    const std::vector<VirtualInput> coast(lay.horizon);
    guess = project_interior(problem, problem.rollout(hover, coast));
  }
  NlpEvaluation ev;
  problem.evaluate(guess, ev, false);
  diag.initial_equality_residual = ev.constraints.lpNorm<Eigen::Infinity>();

  diag.solve = solver_.solve(problem, guess, multipliers);
  diag.failed = diag.solve.status != SolveStatus::converged;

  const Eigen::VectorXd& w = diag.solve.decision;
  for (int k = 0; k <= lay.horizon; ++k) {
    diag.predicted_states.push_back(problem.state_at(w, k));
    diag.predicted_path.push_back(problem.path_state_at(w, k));
    if (k < lay.horizon) {
      diag.predicted_inputs.push_back(problem.input_at(w, k));
      diag.predicted_virtual_inputs.push_back(problem.virtual_input_at(w, k));
    }
  }
  out.input = diag.predicted_inputs.front();
  out.nu = diag.predicted_virtual_inputs.front();
  last_solution_ = diag.solve;
  return out;
}

PathState MppfcController::advance_path_state(const VirtualInput& nu, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("advance_path_state: dt must be positive");
  PathState z = path_state_;
  z.s += z.s_dot * dt + 0.5 * nu.nu1 * dt * dt;
  z.s_dot += nu.nu1 * dt;
  if (config_.corridor) {
    z.s2 += z.s2_dot * dt + 0.5 * nu.nu2 * dt * dt;
    z.s2_dot += nu.nu2 * dt;
  }

  PathState c = z;
  c.s = std::clamp(c.s, base_path(path_).s_initial(), kPathEnd);
  c.s_dot = std::clamp(c.s_dot, config_.s_dot_floor, config_.s_dot_max);
  if (const auto* corridor = std::get_if<CorridorPathDefinition>(&path_)) {
    c.s2 = corridor->s2_bounds().clamp(c.s2);
  }
  last_clamped_ = c.s != z.s || c.s_dot != z.s_dot || c.s2 != z.s2;
  path_state_ = c;
  return c;
}

}  // namespace mppfc
