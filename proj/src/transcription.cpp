#include "mppfc/transcription.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace mppfc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPinnedClearance = 0.01;

Eigen::MatrixXd upper_cholesky_factor(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(what) + " is not positive definite");
  }
  return llt.matrixU();
}

void check_weight(const Eigen::MatrixXd& m, int dim, const char* what) {
  if (m.rows() != dim || m.cols() != dim) {
    throw std::invalid_argument(std::string(what) + " must be " + std::to_string(dim) + "x" +
                                std::to_string(dim));
  }
  if (!m.allFinite() || !m.isApprox(m.transpose(), 1e-12)) {
    throw std::invalid_argument(std::string(what) + " must be finite and symmetric");
  }
  (void)upper_cholesky_factor(m, what);
}

// Stacks [e; xi_dot; s (; s2)] for the Q-weighted term.
Eigen::VectorXd tracking_vector(const Vec4& e, const Vec3& xi_dot,
                                const Eigen::VectorXd& path_params) {
  Eigen::VectorXd v(7 + path_params.size());
  v << e, xi_dot, path_params;
  return v;
}

}  // namespace

void OcpConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("OcpConfig: horizon must be >= 1");
  if (!(delta > 0.0)) throw std::invalid_argument("OcpConfig: delta must be positive");
  check_weight(q, corridor ? 9 : 8, "OcpConfig.q");
  check_weight(r, corridor ? 6 : 5, "OcpConfig.r");
  if (!(terminal_weight >= 0.0) || !(terminal_weight_s2 >= 0.0)) {
    throw std::invalid_argument("OcpConfig: terminal weights must be >= 0");
  }
  if ((state_lower.array() > state_upper.array()).any() ||
      (input_lower.array() > input_upper.array()).any()) {
    throw std::invalid_argument("OcpConfig: empty state or input box");
  }
  if (!(s_dot_floor > 0.0) || !(s_dot_max > 2.0 * s_dot_floor)) {
    throw std::invalid_argument("OcpConfig: need 0 < s_dot_floor < s_dot_max / 2");
  }
  if (!(nu_bounds.lower < 0.0 && nu_bounds.upper > 0.0)) {
    throw std::invalid_argument("OcpConfig: nu bounds must contain 0 in their interior");
  }
  if (!(nu2_bounds.lower <= 0.0 && nu2_bounds.upper >= 0.0)) {
    throw std::invalid_argument("OcpConfig: nu2 bounds must contain 0");
  }
}

OcpConfig OcpConfig::defaults(bool corridor, double s_dot_max) {
  OcpConfig c;
  c.corridor = corridor;
  c.s_dot_max = s_dot_max;

  Eigen::VectorXd qd(corridor ? 9 : 8);
  Eigen::VectorXd rd(corridor ? 6 : 5);
  if (corridor) {
    qd << 80, 80, 60, 2000, 1, 1, 1, 5, 0.7;
    rd << 20, 10, 10, 20, 2, 0.1;
  } else {
    qd << 80, 80, 60, 2000, 1, 1, 1, 5;
    rd << 20, 10, 10, 20, 2;
  }
  c.q = qd.asDiagonal();
  c.r = rd.asDiagonal();

  c.state_lower << -1.5, -1.5, 0.05, -1.0, -1.0, -1.0, -0.35, -0.35, -kInf;
  c.state_upper << 1.5, 1.5, 1.2, 1.0, 1.0, 1.0, 0.35, 0.35, kInf;
  c.input_lower << -0.15, -0.35, -0.35, -0.5;
  c.input_upper << 0.15, 0.35, 0.35, 0.5;
  return c;
}

double stage_cost(const Vec4& e, const Vec3& xi_dot, const Eigen::VectorXd& path_params,
                  const QuadInput& u, const Eigen::VectorXd& nu, const OcpConfig& config) {
  const int np = config.corridor ? 2 : 1;
  if (path_params.size() != np || nu.size() != np) {
    throw std::invalid_argument("stage_cost: path parameter / virtual input dimension mismatch");
  }
  if (config.q.rows() != 7 + np || config.r.rows() != 4 + np) {
    throw std::invalid_argument("stage_cost: weight dimension mismatch");
  }
  const Eigen::VectorXd vq = tracking_vector(e, xi_dot, path_params);
  Eigen::VectorXd vr(4 + np);
  vr << u.to_vector(), nu;
  return vq.dot(config.q * vq) + vr.dot(config.r * vr);
}

double terminal_cost(const PathState& z_terminal, const OcpConfig& config) {
  double c = config.terminal_weight * z_terminal.s * z_terminal.s;
  if (config.corridor) c += config.terminal_weight_s2 * z_terminal.s2 * z_terminal.s2;
  return c;
}

TerminalSetSupport terminal_sets_stub() {
  return {false,
          "terminal constraint sets are not imposed; stability relies on the quadratic "
          "terminal cost only"};
}

Eigen::VectorXd pack_path_state(const PathState& z, bool corridor) {
  if (corridor) return Eigen::Vector4d(z.s, z.s2, z.s_dot, z.s2_dot);
  return Eigen::Vector2d(z.s, z.s_dot);
}

PathState unpack_path_state(const Eigen::VectorXd& z, bool corridor) {
  if (corridor) return {z(0), z(2), z(1), z(3)};
  return {z(0), z(1), 0.0, 0.0};
}

Eigen::VectorXd timing_rk4_step(const Eigen::VectorXd& z, const VirtualInput& nu, double dt,
                                bool corridor) {
  auto rhs = [&](const Eigen::VectorXd& zz) -> Eigen::VectorXd {
    if (corridor) return corridor_timing_law(zz, Eigen::Vector2d(nu.nu1, nu.nu2));
    return timing_law(zz, nu.nu1);
  };
  const Eigen::VectorXd k1 = rhs(z);
  const Eigen::VectorXd k2 = rhs(z + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = rhs(z + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = rhs(z + dt * k3);
  return z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

OcpProblem::OcpProblem(const QuadState& x0, const PathState& z0, AnyPath path, OcpConfig config,
                       ModelParams params)
    : x0_(x0), z0_(z0), path_(std::move(path)), config_(std::move(config)), params_(params) {
  config_.validate();
  params_.validate();
  if (config_.corridor != is_corridor(path_)) {
    throw std::invalid_argument("OcpProblem: corridor config requires a corridor path and vice versa");
  }
  if (!x0_.is_finite()) throw std::invalid_argument("OcpProblem: initial state is not finite");
  layout_.horizon = config_.horizon;
  layout_.nz = config_.path_dim();
  layout_.nv = config_.virtual_dim();
  q_factor_ = upper_cholesky_factor(config_.q, "OcpConfig.q");
  r_factor_ = upper_cholesky_factor(config_.r, "OcpConfig.r");
  build_bounds();
}

void OcpProblem::build_bounds() {
  const int n = layout_.size();
  const int nz = layout_.nz;
  lower_.resize(n);
  upper_.resize(n);

  Eigen::VectorXd z_lower(nz), z_upper(nz);
  const double s_start = base_path(path_).s_initial();
  if (config_.corridor) {
    const Interval s2 = std::get<CorridorPathDefinition>(path_).s2_bounds();
    z_lower << s_start, s2.lower, config_.s_dot_floor, -kInf;
    z_upper << kPathEnd, s2.upper, config_.s_dot_max, kInf;
  } else {
    z_lower << s_start, config_.s_dot_floor;
    z_upper << kPathEnd, config_.s_dot_max;
  }

  for (int k = 0; k <= layout_.horizon; ++k) {
    lower_.segment(layout_.state(k), layout_.nx) = config_.state_lower;
    upper_.segment(layout_.state(k), layout_.nx) = config_.state_upper;
    lower_.segment(layout_.path_state(k), nz) = z_lower;
    upper_.segment(layout_.path_state(k), nz) = z_upper;
    if (k == layout_.horizon) break;
    lower_.segment(layout_.input(k), layout_.nu) = config_.input_lower;
    upper_.segment(layout_.input(k), layout_.nu) = config_.input_upper;
    lower_(layout_.virtual_input(k)) = config_.nu_bounds.lower;
    upper_(layout_.virtual_input(k)) = config_.nu_bounds.upper;
    if (config_.corridor) {
      lower_(layout_.virtual_input(k) + 1) = config_.nu2_bounds.lower;
      upper_(layout_.virtual_input(k) + 1) = config_.nu2_bounds.upper;
    }
  }

  // The pinned initial condition wins over the box: widen stage-0 bounds so that the
  // measurement keeps a clearance of 1% of the box width, and record a clamp event if it was
  // outside. Stage 0 is fixed by the pinning rows, so its bounds only enter through the barrier;
  // a measurement sitting on a bound would otherwise produce huge barrier gradients and
  // multipliers.
  static const char* kStateNames[] = {"x", "y", "z", "vx", "vy", "vz", "roll", "pitch", "yaw"};
  static const char* kClassicNames[] = {"s", "s_dot"};
  static const char* kCorridorNames[] = {"s1", "s2", "s1_dot", "s2_dot"};
  auto widen = [&](int idx, double value, const char* name) {
    double& lo = lower_(idx);
    double& hi = upper_(idx);
    if (value < lo || value > hi) clamp_events_.push_back({name, value, lo, hi});
    const double width = std::isfinite(hi - lo) ? hi - lo : std::max(1.0, std::abs(value));
    const double margin = kPinnedClearance * width;
    lo = std::min(lo, value - margin);
    hi = std::max(hi, value + margin);
  };
  const StateVector xv = x0_.to_vector();
  for (int i = 0; i < layout_.nx; ++i) widen(layout_.state(0) + i, xv(i), kStateNames[i]);
  const Eigen::VectorXd zv = pack_path_state(z0_, config_.corridor);
  for (int i = 0; i < nz; ++i) {
    widen(layout_.path_state(0) + i, zv(i),
          config_.corridor ? kCorridorNames[i] : kClassicNames[i]);
  }

  // s <= 0 combined with s_dot >= floor can be unreachable near the path end when the
  // timing law is still fast. Lift the s upper bound of each stage just above the position
  // reached by a strictly admissible braking manoeuvre.
  const double floor_target = std::min(1.5 * config_.s_dot_floor,
                                       0.5 * (config_.s_dot_floor + config_.s_dot_max));
  const double dt = config_.delta;
  double s = z0_.s;
  double sd = z0_.s_dot;
  for (int k = 1; k <= layout_.horizon; ++k) {
    const double nu = std::clamp((floor_target - sd) / dt, 0.9 * config_.nu_bounds.lower,
                                 0.9 * config_.nu_bounds.upper);
    s += sd * dt + 0.5 * nu * dt * dt;
    sd += nu * dt;
    if (s > -1e-6) {
      upper_(layout_.path_state(k)) = s + 1e-6;
      ++relaxed_stages_;
    }
  }
}

void OcpProblem::path_rows(double s1, double s2, Vec4& p, Vec4& dp_ds1) const {
  const PathDefinition& base = base_path(path_);
  const double s_clamped = std::clamp(s1, base.s_initial(), kPathEnd);
  p = base.eval(s_clamped);
  if (s1 >= base.s_initial() && s1 <= kPathEnd) {
    dp_ds1 = base.eval_derivative(s_clamped);
  } else {
    dp_ds1.setZero();
  }
  if (const auto* c = std::get_if<CorridorPathDefinition>(&path_)) p += s2 * c->direction();
}

Vec4 OcpProblem::reference(const PathState& z) const {
  Vec4 p, dp;
  path_rows(z.s, config_.corridor ? z.s2 : 0.0, p, dp);
  return p;
}

void OcpProblem::evaluate(const Eigen::VectorXd& w, NlpEvaluation& out,
                          bool with_jacobians) const {
  const int n = layout_.size();
  if (w.size() != n) throw std::invalid_argument("OcpProblem::evaluate: wrong decision size");
  const bool corridor = config_.corridor;
  const int nx = layout_.nx, nz = layout_.nz, nu = layout_.nu, nv = layout_.nv;
  const int nq = 7 + nv;  // tracking rows: e(4), xi_dot(3), s (, s2)
  const int nr = nu + nv;
  const int nt = nv;
  const int n_res = layout_.horizon * (nq + nr) + nt;
  const double sqrt_dt = std::sqrt(config_.delta);

  out.residual.setZero(n_res);
  out.constraints.setZero(layout_.num_equalities());
  if (with_jacobians) {
    out.residual_jacobian.setZero(n_res, n);
    out.constraint_jacobian.setZero(layout_.num_equalities(), n);
  }

  Vec4 corridor_dir = Vec4::Zero();
  if (const auto* c = std::get_if<CorridorPathDefinition>(&path_)) corridor_dir = c->direction();

  int row = 0;
  for (int k = 0; k < layout_.horizon; ++k) {
    const int ix = layout_.state(k), iz = layout_.path_state(k);
    const int iu = layout_.input(k);  // [u_k; nu_k] are contiguous
    const double s1 = w(iz);
    const double s2 = corridor ? w(iz + 1) : 0.0;
    Vec4 p, dp;
    path_rows(s1, s2, p, dp);

    Eigen::VectorXd vq(nq);
    vq.head<3>() = w.segment<3>(ix) - p.head<3>();
    vq(3) = wrap_angle(w(ix + 8) - p(3));
    vq.segment<3>(4) = w.segment<3>(ix + 3);
    vq(7) = s1;
    if (corridor) vq(8) = s2;
    out.residual.segment(row, nq) = sqrt_dt * q_factor_ * vq;
    out.residual.segment(row + nq, nr) = sqrt_dt * r_factor_ * w.segment(iu, nr);

    if (with_jacobians) {
      Eigen::MatrixXd dvq = Eigen::MatrixXd::Zero(nq, n);
      dvq.block<3, 3>(0, ix).setIdentity();
      dvq(3, ix + 8) = 1.0;
      dvq.block<4, 1>(0, iz) = -dp;
      if (corridor) dvq.block<4, 1>(0, iz + 1) = -corridor_dir;
      dvq.block<3, 3>(4, ix + 3).setIdentity();
      dvq(7, iz) = 1.0;
      if (corridor) dvq(8, iz + 1) = 1.0;
      out.residual_jacobian.middleRows(row, nq) = sqrt_dt * q_factor_ * dvq;
      out.residual_jacobian.block(row + nq, iu, nr, nr) = sqrt_dt * r_factor_;
    }
    row += nq + nr;
  }
  const int iz_n = layout_.path_state(layout_.horizon);
  out.residual(row) = std::sqrt(config_.terminal_weight) * w(iz_n);
  if (with_jacobians) out.residual_jacobian(row, iz_n) = std::sqrt(config_.terminal_weight);
  if (corridor) {
    out.residual(row + 1) = std::sqrt(config_.terminal_weight_s2) * w(iz_n + 1);
    if (with_jacobians) {
      out.residual_jacobian(row + 1, iz_n + 1) = std::sqrt(config_.terminal_weight_s2);
    }
  }

  // Pinning rows.
  out.constraints.head(nx) = w.segment(layout_.state(0), nx) - x0_.to_vector();
  out.constraints.segment(nx, nz) =
      w.segment(layout_.path_state(0), nz) - pack_path_state(z0_, corridor);
  if (with_jacobians) {
    out.constraint_jacobian.block(0, layout_.state(0), nx + nz, nx + nz).setIdentity();
  }

  // Timing-law transition: z+ = A z + B nu, exact for the double integrator.
  Eigen::MatrixXd za = Eigen::MatrixXd::Identity(nz, nz);
  Eigen::MatrixXd zb = Eigen::MatrixXd::Zero(nz, nv);
  const double dt = config_.delta;
  for (int c = 0; c < nv; ++c) {
    za(c, nv + c) = dt;
    zb(c, c) = 0.5 * dt * dt;
    zb(nv + c, c) = dt;
  }

  StateJacobian fx;
  InputJacobian fu;
  for (int k = 0; k < layout_.horizon; ++k) {
    const int crow = (k + 1) * (nx + nz);
    const int ix = layout_.state(k), iz = layout_.path_state(k);
    const int iu = layout_.input(k), iv = layout_.virtual_input(k);
    const int ix1 = layout_.state(k + 1), iz1 = layout_.path_state(k + 1);
    const StateVector xk = w.segment<kStateDim>(ix);
    const InputVector uk = w.segment<kInputDim>(iu);

    StateVector x_next;
    if (with_jacobians) {
      x_next = rk4_step_with_jacobian(xk, uk, dt, params_, fx, fu);
    } else {
      x_next = rk4_step(xk, uk, dt, params_);
    }
    out.constraints.segment(crow, nx) = w.segment<kStateDim>(ix1) - x_next;

    const VirtualInput vk = virtual_input_at(w, k);
    out.constraints.segment(crow + nx, nz) =
        w.segment(iz1, nz) - timing_rk4_step(w.segment(iz, nz), vk, dt, corridor);

    if (with_jacobians) {
      auto jac = out.constraint_jacobian.middleRows(crow, nx + nz);
      jac.block(0, ix1, nx, nx).setIdentity();
      jac.block(0, ix, nx, nx) = -fx;
      jac.block(0, iu, nx, nu) = -fu;
      jac.block(nx, iz1, nz, nz).setIdentity();
      jac.block(nx, iz, nz, nz) = -za;
      jac.block(nx, iv, nz, nv) = -zb;
    }
  }
}

double OcpProblem::quadrature_cost(const Eigen::VectorXd& w) const {
  const int np = layout_.nv;
  double cost = 0.0;
  for (int k = 0; k < layout_.horizon; ++k) {
    const QuadState x = state_at(w, k);
    const PathState z = path_state_at(w, k);
    const VirtualInput v = virtual_input_at(w, k);
    const Vec4 e = path_error(output_map(x), reference(z));
    Eigen::VectorXd params(np), nu(np);
    if (config_.corridor) {
      params << z.s, z.s2;
      nu << v.nu1, v.nu2;
    } else {
      params << z.s;
      nu << v.nu1;
    }
    cost += config_.delta * stage_cost(e, x.velocity, params, input_at(w, k), nu, config_);
  }
  return cost + terminal_cost(path_state_at(w, layout_.horizon), config_);
}

QuadState OcpProblem::state_at(const Eigen::VectorXd& w, int k) const {
  return QuadState::from_vector(w.segment<kStateDim>(layout_.state(k)));
}

PathState OcpProblem::path_state_at(const Eigen::VectorXd& w, int k) const {
  return unpack_path_state(w.segment(layout_.path_state(k), layout_.nz), config_.corridor);
}

QuadInput OcpProblem::input_at(const Eigen::VectorXd& w, int k) const {
  return QuadInput::from_vector(w.segment<kInputDim>(layout_.input(k)));
}

VirtualInput OcpProblem::virtual_input_at(const Eigen::VectorXd& w, int k) const {
  const int iv = layout_.virtual_input(k);
  return {w(iv), config_.corridor ? w(iv + 1) : 0.0};
}

void OcpProblem::propagate_stage(Eigen::VectorXd& w, int k) const {
  const int nz = layout_.nz;
  w.segment<kStateDim>(layout_.state(k + 1)) =
      rk4_step(StateVector(w.segment<kStateDim>(layout_.state(k))),
               InputVector(w.segment<kInputDim>(layout_.input(k))), config_.delta, params_);
  w.segment(layout_.path_state(k + 1), nz) =
      timing_rk4_step(w.segment(layout_.path_state(k), nz), virtual_input_at(w, k),
                      config_.delta, config_.corridor);
}

Eigen::VectorXd OcpProblem::rollout(const std::vector<QuadInput>& inputs,
                                    const std::vector<VirtualInput>& virtual_inputs) const {
  const auto n = static_cast<std::size_t>(layout_.horizon);
  if (inputs.size() != n || virtual_inputs.size() != n) {
    throw std::invalid_argument("OcpProblem::rollout: need one input per stage");
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(layout_.size());
  w.segment<kStateDim>(layout_.state(0)) = x0_.to_vector();
  w.segment(layout_.path_state(0), layout_.nz) = pack_path_state(z0_, config_.corridor);
  for (int k = 0; k < layout_.horizon; ++k) {
    w.segment<kInputDim>(layout_.input(k)) = inputs[k].to_vector();
    w(layout_.virtual_input(k)) = virtual_inputs[k].nu1;
    if (config_.corridor) w(layout_.virtual_input(k) + 1) = virtual_inputs[k].nu2;
    propagate_stage(w, k);
  }
  return w;
}

OcpProblem build_ocp(const QuadState& x0, const PathState& z0, const AnyPath& path,
                     const OcpConfig& config, const ModelParams& params) {
  return {x0, z0, path, config, params};
}

}  // namespace mppfc
