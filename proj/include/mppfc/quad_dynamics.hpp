#pragma once

#include <Eigen/Core>

namespace mppfc {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kStateDim = 9;
inline constexpr int kInputDim = 4;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using InputVector = Eigen::Matrix<double, kInputDim, 1>;
using StateJacobian = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputJacobian = Eigen::Matrix<double, kStateDim, kInputDim>;

/// State of the attitude-stabilized quadrotor. Stacked as [position; velocity; attitude].
struct QuadState {
  Vec3 position = Vec3::Zero();  // [x, y, z] in m
  Vec3 velocity = Vec3::Zero();  // m/s
  Vec3 attitude = Vec3::Zero();  // [roll, pitch, yaw] in rad

  [[nodiscard]] StateVector to_vector() const;
  [[nodiscard]] static QuadState from_vector(const StateVector& v);
  [[nodiscard]] bool is_finite() const;
};

/// Command sent to the onboard attitude loop.
struct QuadInput {
  double delta_thrust = 0.0;  // N, on top of the hover feed-forward m*g
  double roll_cmd = 0.0;      // rad
  double pitch_cmd = 0.0;     // rad
  double yaw_rate_cmd = 0.0;  // rad/s

  [[nodiscard]] InputVector to_vector() const;
  [[nodiscard]] static QuadInput from_vector(const InputVector& v);
  [[nodiscard]] bool is_finite() const;
};

/// Measured output y = [x, y, z, yaw].
struct QuadOutput {
  Vec3 xyz = Vec3::Zero();
  double yaw = 0.0;

  [[nodiscard]] Vec4 to_vector() const { return {xyz.x(), xyz.y(), xyz.z(), yaw}; }
};

struct ModelParams {
  double mass = 0.033;     // kg, Crazyflie 2.0 takeoff mass
  double gravity = 9.81;   // m/s^2
  double tau_roll = 0.2;   // s, closed-loop roll time constant
  double tau_pitch = 0.2;  // s, closed-loop pitch time constant

  /// Throws std::invalid_argument unless every field is finite and positive.
  void validate() const;
};

/// Body-to-inertial rotation for ZYX Euler angles, R = Rz(yaw) * Ry(pitch) * Rx(roll).
[[nodiscard]] Mat3 rotation_matrix(const Vec3& attitude);

/// Maps Euler-angle rates to the inertial angular velocity, omega_I = J_R * attitude_rate.
///
/// Built from the sum e_z*yaw_rate + Rz(yaw)*e_y*pitch_rate + Rz(yaw)*Ry(pitch)*e_x*roll_rate.
/// The (3,1) entry is -sin(pitch); the (1,2) entry is -sin(yaw).
[[nodiscard]] Mat3 rotation_jacobian(const Vec3& attitude);

/// Angular velocity expressed in the body frame, R^T * J_R * attitude_rate.
[[nodiscard]] Vec3 body_angular_velocity(const Vec3& attitude, const Vec3& attitude_rate);

/// Continuous-time model x_dot = f(x, u): Newton translation plus first-order attitude lags.
[[nodiscard]] StateVector dynamics(const QuadState& state, const QuadInput& input,
                                   const ModelParams& params);
[[nodiscard]] StateVector dynamics(const StateVector& x, const InputVector& u,
                                   const ModelParams& params);

/// Analytic partial derivatives of `dynamics` with respect to state and input.
void dynamics_jacobian(const StateVector& x, const InputVector& u, const ModelParams& params,
                       StateJacobian& dfdx, InputJacobian& dfdu);

[[nodiscard]] QuadOutput output_map(const QuadState& state);

/// One classical RK4 step with the input held constant (zero-order hold).
[[nodiscard]] QuadState rk4_step(const QuadState& state, const QuadInput& input, double dt,
                                 const ModelParams& params);
[[nodiscard]] StateVector rk4_step(const StateVector& x, const InputVector& u, double dt,
                                   const ModelParams& params);

/// RK4 step together with its sensitivities d(x+)/dx and d(x+)/du.
StateVector rk4_step_with_jacobian(const StateVector& x, const InputVector& u, double dt,
                                   const ModelParams& params, StateJacobian& dx_next_dx,
                                   InputJacobian& dx_next_du);

}  // namespace mppfc
