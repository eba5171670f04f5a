#include "mppfc/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace mppfc {

VelocitySensor::VelocitySensor(SensorMode mode, double dt, int window, double position_noise,
                               std::uint64_t seed)
    : mode_(mode), dt_(dt), window_(window), noise_(position_noise), rng_(seed) {
  if (!(dt > 0.0) || window < 1 || !(position_noise >= 0.0)) {
    throw std::invalid_argument("VelocitySensor: need dt > 0, window >= 1, noise >= 0");
  }
}

void VelocitySensor::reset() {
  last_position_.reset();
  diffs_.clear();
}

QuadState VelocitySensor::sense(const QuadState& plant) {
  QuadState measured = plant;
  if (noise_ > 0.0) {
    std::uniform_real_distribution<double> dist(-noise_, noise_);
    for (int i = 0; i < 3; ++i) measured.position(i) += dist(rng_);
  }
  if (mode_ == SensorMode::exact) return measured;

  if (last_position_) {
    diffs_.push_back((measured.position - *last_position_) / dt_);
    if (static_cast<int>(diffs_.size()) > window_) diffs_.pop_front();
  }
  last_position_ = measured.position;
  if (warmed_up()) {
    Vec3 sum = Vec3::Zero();
    for (const Vec3& d : diffs_) sum += d;
    measured.velocity = sum / window_;
  }
  return measured;
}

QuadState plant_step(const QuadState& state, const QuadInput& input, double dt,
                     const ScenarioConfig& config) {
  ModelParams truth = config.model;
  truth.mass = (1.0 + config.mass_error) * config.model.mass;
  QuadInput applied = input;
  applied.delta_thrust =
      config.thrust_scale * (input.delta_thrust + config.model.mass * config.model.gravity) -
      truth.mass * truth.gravity;
  QuadState x = state;
  const double h = dt / config.plant_substeps;
  for (int i = 0; i < config.plant_substeps; ++i) x = rk4_step(x, applied, h, truth);
  return x;
}

namespace {

Vec4 reference_at(const AnyPath& path, const PathState& z) {
  if (const auto* c = std::get_if<CorridorPathDefinition>(&path)) return c->eval(z.s, z.s2);
  return std::get<PathDefinition>(path).eval(z.s);
}

double box_violation(double v, double lo, double hi) {
  return std::max({0.0, lo - v, v - hi});
}

}  // namespace

SimResult run_scenario(const ScenarioConfig& config, std::ostream* solver_log) {
  config.validate();
  const auto wall_start = std::chrono::steady_clock::now();
  const AnyPath path = config.make_path();
  MppfcController controller(path, config.ocp, config.solver, config.model);
  VelocitySensor sensor(config.sensor, config.ocp.delta, 5, config.position_noise, config.seed);

  const Vec4 start = reference_at(path, controller.path_state());
  QuadState plant;
  plant.position = start.head<3>();
  plant.attitude(2) = start(3);

  SimResult result;
  result.log.scenario = config.scenario;
  result.log.corridor = config.corridor();

  const double dt = config.ocp.delta;
  const auto steps = static_cast<long>(std::floor(config.total_time / dt + 1e-9));
  double settled_since = std::numeric_limits<double>::quiet_NaN();
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const PathState z = controller.path_state();
    const ControlOutput out = controller.control_step(sensor.sense(plant));
    const SolveResult& solve = out.diagnostics.solve;
    if (solver_log) {
      *solver_log << "step " << k << " t=" << t << (out.diagnostics.warm_started ? " warm" : " cold")
                  << '\n';
      write_iteration_table(*solver_log, solve);
    }

    SimRecord rec;
    rec.t = t;
    rec.state = plant;
    rec.input = out.input;
    rec.nu = out.nu;
    rec.z = z;
    rec.reference = reference_at(path, z);
    rec.error = path_error(output_map(plant), rec.reference);
    rec.solve_iters = solve.iterations;
    rec.solve_time_ms = solve.solve_time * 1e3;
    rec.status = solve.status;

    plant = plant_step(plant, out.input, dt, config);
    if (!plant.is_finite()) {
      throw std::runtime_error("run_scenario: plant state became non-finite at t = " +
                               std::to_string(t));
    }
    controller.advance_path_state(out.nu, dt);
    rec.clamped = !out.diagnostics.clamp_events.empty() || controller.last_advance_clamped();
    result.log.records.push_back(rec);

    // Settling is judged against the nominal path, so a corridor run only ends once the
    // deviation s2 has been taken back.
    const Vec4 settle_error = config.corridor()
                                  ? path_error(output_map(plant), base_path(path).eval(z.s))
                                  : rec.error;
    if (z.s >= kPathEndThreshold && settle_error.norm() < 0.02) {
      if (std::isnan(settled_since)) settled_since = t;
      if (t - settled_since >= 1.0 - 1e-9) break;
    } else {
      settled_since = std::numeric_limits<double>::quiet_NaN();
    }
  }

  result.metrics = compute_metrics(result.log, config);
  result.metrics.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return result;
}

double constraint_violation(const SimLog& log, const OcpConfig& ocp) {
  double worst = 0.0;
  for (const SimRecord& r : log.records) {
    const StateVector x = r.state.to_vector();
    for (int i = 0; i < kStateDim; ++i) {
      worst = std::max(worst, box_violation(x(i), ocp.state_lower(i), ocp.state_upper(i)));
    }
    const InputVector u = r.input.to_vector();
    for (int i = 0; i < kInputDim; ++i) {
      worst = std::max(worst, box_violation(u(i), ocp.input_lower(i), ocp.input_upper(i)));
    }
  }
  return worst;
}

RunMetrics compute_metrics(const SimLog& log, const ScenarioConfig& config) {
  RunMetrics m;
  m.scenario = config.scenario;
  m.path_name = base_path(config.make_path()).name();
  m.corridor = config.corridor();
  m.s_dot_max = config.s_dot_max();
  m.steps = static_cast<int>(log.records.size());
  m.time_to_path_end = std::numeric_limits<double>::quiet_NaN();
  if (log.records.empty()) return m;

  double sq = 0.0, ez = 0.0, iters = 0.0, time_ms = 0.0;
  for (const SimRecord& r : log.records) {
    sq += r.error.head<3>().squaredNorm();
    ez += r.error(2);
    iters += r.solve_iters;
    time_ms += r.solve_time_ms;
    m.max_solver_iters = std::max(m.max_solver_iters, r.solve_iters);
    m.max_solve_time_ms = std::max(m.max_solve_time_ms, r.solve_time_ms);
    m.max_abs_yaw_rate = std::max(m.max_abs_yaw_rate, std::abs(r.input.yaw_rate_cmd));
    m.max_abs_s2 = std::max(m.max_abs_s2, std::abs(r.z.s2));
    if (r.status != SolveStatus::converged) ++m.failures;
    if (std::isnan(m.time_to_path_end) && r.z.s >= kPathEndThreshold) m.time_to_path_end = r.t;
  }
  const double n = static_cast<double>(log.records.size());
  m.rms_position_error = std::sqrt(sq / n);
  m.mean_z_error = ez / n;
  m.mean_solver_iters = iters / n;
  m.mean_solve_time_ms = time_ms / n;
  m.terminal_position_error = log.records.back().error.head<3>().norm();
  m.terminal_abs_s2 = std::abs(log.records.back().z.s2);
  m.constraint_violation_max = constraint_violation(log, config.ocp);
  return m;
}

CorridorComparison compare_corridor(const RunMetrics& classic, const RunMetrics& corridor) {
  if (classic.corridor || classic.path_name != "sinusoid") {
    throw std::invalid_argument("compare_corridor: first run must be the classic sinusoid");
  }
  if (!corridor.corridor || corridor.path_name != classic.path_name) {
    throw std::invalid_argument("compare_corridor: second run must be a sinusoid corridor run");
  }
  if (classic.s_dot_max != corridor.s_dot_max) {
    throw std::invalid_argument("compare_corridor: runs use different s_dot_max");
  }
  if (std::isnan(classic.time_to_path_end) || std::isnan(corridor.time_to_path_end)) {
    throw std::invalid_argument("compare_corridor: a run never reached the path end");
  }
  CorridorComparison c;
  c.classic_time = classic.time_to_path_end;
  c.corridor_time = corridor.time_to_path_end;
  c.absolute_reduction = c.classic_time - c.corridor_time;
  c.relative_reduction = c.absolute_reduction / c.classic_time;
  c.max_abs_s2 = corridor.max_abs_s2;
  c.terminal_abs_s2 = corridor.terminal_abs_s2;
  return c;
}

}  // namespace mppfc
