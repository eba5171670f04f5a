#include "mppfc/quad_dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace mppfc {

StateVector QuadState::to_vector() const {
  StateVector v;
  v << position, velocity, attitude;
  return v;
}

QuadState QuadState::from_vector(const StateVector& v) {
  return {v.segment<3>(0), v.segment<3>(3), v.segment<3>(6)};
}

bool QuadState::is_finite() const { return to_vector().allFinite(); }

InputVector QuadInput::to_vector() const {
  return {delta_thrust, roll_cmd, pitch_cmd, yaw_rate_cmd};
}

QuadInput QuadInput::from_vector(const InputVector& v) { return {v(0), v(1), v(2), v(3)}; }

bool QuadInput::is_finite() const { return to_vector().allFinite(); }

void ModelParams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(mass) || !positive(gravity) || !positive(tau_roll) || !positive(tau_pitch)) {
    throw std::invalid_argument("ModelParams: mass, gravity, tau_roll and tau_pitch must be > 0");
  }
}

Mat3 rotation_matrix(const Vec3& attitude) {
  const double cr = std::cos(attitude(0)), sr = std::sin(attitude(0));
  const double cp = std::cos(attitude(1)), sp = std::sin(attitude(1));
  const double cy = std::cos(attitude(2)), sy = std::sin(attitude(2));
  Mat3 r;
  r << cy * cp, cy * sr * sp - cr * sy, sr * sy + cr * cy * sp,
       cp * sy, cr * cy + sr * sy * sp, cr * sy * sp - cy * sr,
       -sp,     cp * sr,                cr * cp;
  return r;
}

Mat3 rotation_jacobian(const Vec3& attitude) {
  const double cp = std::cos(attitude(1)), sp = std::sin(attitude(1));
  const double cy = std::cos(attitude(2)), sy = std::sin(attitude(2));
  Mat3 j;
  j << cy * cp, -sy, 0.0,
       sy * cp,  cy, 0.0,
       -sp,     0.0, 1.0;
  return j;
}

Vec3 body_angular_velocity(const Vec3& attitude, const Vec3& attitude_rate) {
  const double cr = std::cos(attitude(0)), sr = std::sin(attitude(0));
  const double cp = std::cos(attitude(1)), sp = std::sin(attitude(1));
  Mat3 w;
  w << 1.0, 0.0, -sp,
       0.0,  cr, sr * cp,
       0.0, -sr, cr * cp;
  return w * attitude_rate;
}

namespace {

// Third column of the rotation matrix: the body z-axis in inertial coordinates.
Vec3 thrust_axis(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  return {sr * sy + cr * cy * sp, cr * sy * sp - cy * sr, cr * cp};
}

}  // namespace

StateVector dynamics(const StateVector& x, const InputVector& u, const ModelParams& p) {
  const double thrust = u(0) + p.mass * p.gravity;
  const Vec3 axis = thrust_axis(x(6), x(7), x(8));

  StateVector dx;
  dx.segment<3>(0) = x.segment<3>(3);
  dx.segment<3>(3) = axis * (thrust / p.mass);
  dx(5) -= p.gravity;
  dx(6) = (u(1) - x(6)) / p.tau_roll;
  dx(7) = (u(2) - x(7)) / p.tau_pitch;
  dx(8) = u(3);
  return dx;
}

StateVector dynamics(const QuadState& state, const QuadInput& input, const ModelParams& params) {
  return dynamics(state.to_vector(), input.to_vector(), params);
}

void dynamics_jacobian(const StateVector& x, const InputVector& u, const ModelParams& p,
                       StateJacobian& dfdx, InputJacobian& dfdu) {
  const double cr = std::cos(x(6)), sr = std::sin(x(6));
  const double cp = std::cos(x(7)), sp = std::sin(x(7));
  const double cy = std::cos(x(8)), sy = std::sin(x(8));
  const double thrust_over_mass = (u(0) + p.mass * p.gravity) / p.mass;

  // d(axis)/d(roll, pitch, yaw)
  Mat3 daxis;
  daxis << -sr * cy * sp + cr * sy, cr * cy * cp, -cr * sy * sp + sr * cy,
           -sr * sy * sp - cy * cr, cr * sy * cp,  cr * cy * sp + sy * sr,
           -sr * cp,                -cr * sp,      0.0;

  dfdx.setZero();
  dfdx.block<3, 3>(0, 3).setIdentity();
  dfdx.block<3, 3>(3, 6) = daxis * thrust_over_mass;
  dfdx(6, 6) = -1.0 / p.tau_roll;
  dfdx(7, 7) = -1.0 / p.tau_pitch;

  dfdu.setZero();
  dfdu.block<3, 1>(3, 0) = thrust_axis(x(6), x(7), x(8)) / p.mass;
  dfdu(6, 1) = 1.0 / p.tau_roll;
  dfdu(7, 2) = 1.0 / p.tau_pitch;
  dfdu(8, 3) = 1.0;
}

QuadOutput output_map(const QuadState& state) { return {state.position, state.attitude(2)}; }

StateVector rk4_step(const StateVector& x, const InputVector& u, double dt,
                     const ModelParams& params) {
  const StateVector k1 = dynamics(x, u, params);
  const StateVector k2 = dynamics(x + 0.5 * dt * k1, u, params);
  const StateVector k3 = dynamics(x + 0.5 * dt * k2, u, params);
  const StateVector k4 = dynamics(x + dt * k3, u, params);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

QuadState rk4_step(const QuadState& state, const QuadInput& input, double dt,
                   const ModelParams& params) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  return QuadState::from_vector(rk4_step(state.to_vector(), input.to_vector(), dt, params));
}

StateVector rk4_step_with_jacobian(const StateVector& x, const InputVector& u, double dt,
                                   const ModelParams& params, StateJacobian& dx_next_dx,
                                   InputJacobian& dx_next_du) {
  StateJacobian a;
  InputJacobian b;
  const StateJacobian eye = StateJacobian::Identity();

  const StateVector k1 = dynamics(x, u, params);
  dynamics_jacobian(x, u, params, a, b);
  const StateJacobian k1x = a;
  const InputJacobian k1u = b;

  const StateVector x2 = x + 0.5 * dt * k1;
  const StateVector k2 = dynamics(x2, u, params);
  dynamics_jacobian(x2, u, params, a, b);
  const StateJacobian k2x = a * (eye + 0.5 * dt * k1x);
  const InputJacobian k2u = a * (0.5 * dt * k1u) + b;

  const StateVector x3 = x + 0.5 * dt * k2;
  const StateVector k3 = dynamics(x3, u, params);
  dynamics_jacobian(x3, u, params, a, b);
  const StateJacobian k3x = a * (eye + 0.5 * dt * k2x);
  const InputJacobian k3u = a * (0.5 * dt * k2u) + b;

  const StateVector x4 = x + dt * k3;
  const StateVector k4 = dynamics(x4, u, params);
  dynamics_jacobian(x4, u, params, a, b);
  const StateJacobian k4x = a * (eye + dt * k3x);
  const InputJacobian k4u = a * (dt * k3u) + b;

  dx_next_dx = eye + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  dx_next_du = dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace mppfc
