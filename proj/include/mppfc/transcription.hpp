#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "mppfc/nlp_problem.hpp"
#include "mppfc/path.hpp"
#include "mppfc/quad_dynamics.hpp"

namespace mppfc {

/// Weights, horizon and constraint boxes of the path-following OCP.
///
/// Classic mode penalizes [e(4); velocity(3); s] with q (8x8) and [u(4); nu] with r (5x5).
/// Corridor mode appends s2 and nu2, giving 9x9 and 6x6 weights.
struct OcpConfig {
  bool corridor = false;
  int horizon = 5;
  double delta = 0.05;  // s
  Eigen::MatrixXd q;
  Eigen::MatrixXd r;
  double terminal_weight = 50.0;
  double terminal_weight_s2 = 0.7;

  StateVector state_lower;
  StateVector state_upper;
  InputVector input_lower;
  InputVector input_upper;

  double s_dot_floor = 1e-4;  // realizes s_dot > 0 as a closed bound
  double s_dot_max = 0.04;
  Interval nu_bounds{-0.05, 0.05};
  Interval nu2_bounds{-0.5, 0.5};

  [[nodiscard]] int path_dim() const { return corridor ? 4 : 2; }
  [[nodiscard]] int virtual_dim() const { return corridor ? 2 : 1; }

  /// Throws std::invalid_argument on inconsistent dimensions, non-PD weights or empty boxes.
  void validate() const;

  /// Default weights and arena-scale bounds for the given mode and path speed limit.
  [[nodiscard]] static OcpConfig defaults(bool corridor, double s_dot_max);
};

/// Index bookkeeping for the flattened decision vector.
///
/// Stages are stored back to back: [x_k, z_k, u_k, nu_k] for k = 0..N-1, followed by
/// the terminal [x_N, z_N]. z is [s, s_dot] (classic) or [s1, s2, s1_dot, s2_dot] (corridor).
struct DecisionLayout {
  int horizon = 0;
  int nx = kStateDim;
  int nz = 2;
  int nu = kInputDim;
  int nv = 1;

  [[nodiscard]] int stage_size() const { return nx + nz + nu + nv; }
  [[nodiscard]] int size() const { return horizon * stage_size() + nx + nz; }
  [[nodiscard]] int num_equalities() const { return (horizon + 1) * (nx + nz); }
  [[nodiscard]] int state(int k) const { return k * stage_size(); }
  [[nodiscard]] int path_state(int k) const { return state(k) + nx; }
  [[nodiscard]] int input(int k) const { return path_state(k) + nz; }
  [[nodiscard]] int virtual_input(int k) const { return input(k) + nu; }
};

/// Raised when the pinned initial condition falls outside the configured boxes.
struct ClampEvent {
  std::string variable;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Quadratic stage cost ||[e; xi_dot; path_params]||_Q^2 + ||[u; nu]||_R^2.
/// `path_params` holds s (classic) or [s1, s2] (corridor); `nu` likewise has 1 or 2 entries.
[[nodiscard]] double stage_cost(const Vec4& e, const Vec3& xi_dot,
                                const Eigen::VectorXd& path_params, const QuadInput& u,
                                const Eigen::VectorXd& nu, const OcpConfig& config);

/// q_f * s^2, plus q_f2 * s2^2 in corridor mode.
[[nodiscard]] double terminal_cost(const PathState& z_terminal, const OcpConfig& config);

struct TerminalSetSupport {
  bool implemented = false;
  std::string reason;
};

/// Terminal constraint sets are not part of the formulation; only the quadratic
/// terminal cost is used. Always reports "not implemented".
[[nodiscard]] TerminalSetSupport terminal_sets_stub();

/// Packs a path state into the layout order ([s, s_dot] or [s1, s2, s1_dot, s2_dot]).
[[nodiscard]] Eigen::VectorXd pack_path_state(const PathState& z, bool corridor);
[[nodiscard]] PathState unpack_path_state(const Eigen::VectorXd& z, bool corridor);

/// Exact one-step map of the timing law (RK4 is exact on a double integrator).
[[nodiscard]] Eigen::VectorXd timing_rk4_step(const Eigen::VectorXd& z, const VirtualInput& nu,
                                              double dt, bool corridor);

/// Multiple-shooting transcription of the path-following OCP.
///
/// Objective: sum_k delta * stage_cost_k + terminal_cost, written as ||r(w)||^2 with
/// r_k = sqrt(delta) * chol(Q)^T [e; xi_dot; s] etc.
/// Equalities: pinning rows x_0 - x(t), z_0 - z(t), then shooting gaps
/// x_{k+1} - RK4(x_k, u_k), z_{k+1} - G(z_k, nu_k) for k = 0..N-1.
class OcpProblem final : public LeastSquaresNlp {
 public:
  OcpProblem(const QuadState& x0, const PathState& z0, AnyPath path, OcpConfig config,
             ModelParams params);

  [[nodiscard]] int num_variables() const override { return layout_.size(); }
  [[nodiscard]] int num_equalities() const override { return layout_.num_equalities(); }
  [[nodiscard]] const Eigen::VectorXd& lower_bounds() const override { return lower_; }
  [[nodiscard]] const Eigen::VectorXd& upper_bounds() const override { return upper_; }
  void evaluate(const Eigen::VectorXd& w, NlpEvaluation& out, bool with_jacobians) const override;

  [[nodiscard]] const DecisionLayout& layout() const { return layout_; }
  [[nodiscard]] const OcpConfig& config() const { return config_; }
  [[nodiscard]] const ModelParams& params() const { return params_; }
  [[nodiscard]] const AnyPath& path() const { return path_; }
  [[nodiscard]] bool corridor() const { return config_.corridor; }
  [[nodiscard]] const QuadState& initial_state() const { return x0_; }
  [[nodiscard]] const PathState& initial_path_state() const { return z0_; }

  /// Bound widenings caused by an out-of-box initial condition.
  [[nodiscard]] const std::vector<ClampEvent>& clamp_events() const { return clamp_events_; }
  /// Number of stages whose s upper bound was lifted above 0 so that the timing law can
  /// still brake within the admissible nu range.
  [[nodiscard]] int relaxed_path_end_stages() const { return relaxed_stages_; }

  /// Objective evaluated directly as sum_k stage_cost * delta + terminal_cost.
  [[nodiscard]] double quadrature_cost(const Eigen::VectorXd& w) const;

  [[nodiscard]] QuadState state_at(const Eigen::VectorXd& w, int k) const;
  [[nodiscard]] PathState path_state_at(const Eigen::VectorXd& w, int k) const;
  [[nodiscard]] QuadInput input_at(const Eigen::VectorXd& w, int k) const;
  [[nodiscard]] VirtualInput virtual_input_at(const Eigen::VectorXd& w, int k) const;

  /// Path reference and its s-derivatives at a (possibly slightly out-of-domain) path state.
  [[nodiscard]] Vec4 reference(const PathState& z) const;

  /// Decision vector obtained by forward simulation from the pinned initial condition.
  [[nodiscard]] Eigen::VectorXd rollout(const std::vector<QuadInput>& inputs,
                                        const std::vector<VirtualInput>& virtual_inputs) const;

  /// Writes x_{k+1}, z_{k+1} = model step of (x_k, z_k, u_k, nu_k) into w.
  void propagate_stage(Eigen::VectorXd& w, int k) const;

 private:
  void build_bounds();
  void path_rows(double s1, double s2, Vec4& p, Vec4& dp_ds1) const;

  QuadState x0_;
  PathState z0_;
  AnyPath path_;
  OcpConfig config_;
  ModelParams params_;
  DecisionLayout layout_;
  Eigen::MatrixXd q_factor_;  // upper-triangular U with Q = U^T U
  Eigen::MatrixXd r_factor_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  std::vector<ClampEvent> clamp_events_;
  int relaxed_stages_ = 0;
};

[[nodiscard]] OcpProblem build_ocp(const QuadState& x0, const PathState& z0, const AnyPath& path,
                                   const OcpConfig& config, const ModelParams& params);

}  // namespace mppfc
