#pragma once

#include <functional>
#include <string>
#include <variant>

#include <Eigen/Core>

#include "mppfc/quad_dynamics.hpp"

namespace mppfc {

inline constexpr double kPathStart = -1.0;
inline constexpr double kPathEnd = 0.0;

/// Closed interval [lower, upper].
struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  [[nodiscard]] bool contains(double v) const { return v >= lower && v <= upper; }
  [[nodiscard]] double clamp(double v) const;
};

/// Geometric path in output space, parameterized by s in [s_initial, 0].
///
/// Immutable after construction. `eval` and `derivative` reject parameters outside the domain.
class PathDefinition {
 public:
  using Curve = std::function<Vec4(double)>;

  PathDefinition(std::string name, Curve eval, Curve derivative, double s_initial = kPathStart);

  [[nodiscard]] Vec4 eval(double s) const;
  [[nodiscard]] Vec4 eval_derivative(double s) const;
  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] double s_initial() const { return s_initial_; }

 private:
  void check_domain(double s) const;

  std::string name_;
  Curve eval_;
  Curve derivative_;
  double s_initial_;
};

/// Path augmented with a second parameter s2 that offsets the output along `direction`.
class CorridorPathDefinition {
 public:
  CorridorPathDefinition(PathDefinition base, Vec4 direction, Interval s2_bounds);

  [[nodiscard]] Vec4 eval(double s1, double s2) const;
  [[nodiscard]] const PathDefinition& base() const { return base_; }
  [[nodiscard]] const Vec4& direction() const { return direction_; }
  [[nodiscard]] const Interval& s2_bounds() const { return s2_bounds_; }
  [[nodiscard]] const std::string& name() const { return name_; }

 private:
  PathDefinition base_;
  Vec4 direction_;
  Interval s2_bounds_;
  std::string name_;
};

using AnyPath = std::variant<PathDefinition, CorridorPathDefinition>;

[[nodiscard]] bool is_corridor(const AnyPath& path);
[[nodiscard]] const PathDefinition& base_path(const AnyPath& path);

/// Timing-law state. Classic mode uses (s, s_dot); corridor mode adds (s2, s2_dot).
struct PathState {
  double s = kPathStart;
  double s_dot = 0.0;
  double s2 = 0.0;
  double s2_dot = 0.0;
};

/// Virtual input driving the timing law; nu2 is only used in corridor mode.
struct VirtualInput {
  double nu1 = 0.0;
  double nu2 = 0.0;
};

// Paths of the three flight scenarios plus a constant point for hover regulation.
[[nodiscard]] Vec4 eval_spiral(double s);
[[nodiscard]] Vec4 eval_lemniscate(double s);
[[nodiscard]] Vec4 eval_sinusoid(double s);
[[nodiscard]] Vec4 eval_corridor(double s1, double s2);

[[nodiscard]] PathDefinition spiral_path();
[[nodiscard]] PathDefinition lemniscate_path();
[[nodiscard]] PathDefinition sinusoid_path();
[[nodiscard]] PathDefinition hover_path(const Vec4& point);
/// Sinusoid with a yaw corridor, s2 in [-pi/2, pi/2] unless overridden.
[[nodiscard]] CorridorPathDefinition sinusoid_corridor_path(Interval s2_bounds);
[[nodiscard]] CorridorPathDefinition sinusoid_corridor_path();

/// Yaw rate of the sinusoid reference when the path is followed exactly: d(p_yaw)/ds * s_dot.
[[nodiscard]] double nominal_yaw_rate(double s, double s_dot);

/// Double integrator s_ddot = nu. Returns [s_dot, nu].
[[nodiscard]] Eigen::Vector2d timing_law(const Eigen::Vector2d& z, double nu);
/// Two decoupled double integrators on z = [s1, s2, s1_dot, s2_dot].
[[nodiscard]] Eigen::Vector4d corridor_timing_law(const Eigen::Vector4d& z,
                                                  const Eigen::Vector2d& nu);

/// Wraps an angle to (-pi, pi].
[[nodiscard]] double wrap_angle(double angle);

/// e = y - p, with the yaw component wrapped to (-pi, pi].
[[nodiscard]] Vec4 path_error(const QuadOutput& y, const Vec4& p);

}  // namespace mppfc
