#include "mppfc/path.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace mppfc {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_unit_domain(double s, const char* what) {
  if (!(s >= kPathStart && s <= kPathEnd)) {
    throw std::out_of_range(std::string(what) + ": path parameter " + std::to_string(s) +
                            " outside [-1, 0]");
  }
}

Vec4 spiral_derivative(double s) {
  const double a = kTwoPi * s;
  return {-0.25 * kTwoPi * std::sin(a), 0.25 * kTwoPi * std::cos(a), 0.4, 0.0};
}

Vec4 lemniscate_derivative(double s) {
  const double a = kTwoPi * s;
  const double c = std::cos(a), sn = std::sin(a);
  const double den = sn * sn + 1.0;
  // x = 0.5 c / den, y = 0.5 sn c / den, with d(den)/da = 2 sn c
  const double dx = 0.5 * (-sn * den - c * 2.0 * sn * c) / (den * den);
  const double dy = 0.5 * ((c * c - sn * sn) * den - sn * c * 2.0 * sn * c) / (den * den);
  return {kTwoPi * dx, kTwoPi * dy, 0.0, 0.0};
}

double sinusoid_yaw_slope(double s) {
  const double a = kTwoPi * s;
  const double c = std::cos(a);
  return 2.0 * kPi * kPi * std::sin(a) / (kPi * kPi * c * c + 1.0);
}

Vec4 sinusoid_derivative(double s) {
  return {0.25 * kTwoPi * std::cos(kTwoPi * s), 0.5, 0.0, sinusoid_yaw_slope(s)};
}

}  // namespace

double Interval::clamp(double v) const { return std::clamp(v, lower, upper); }

PathDefinition::PathDefinition(std::string name, Curve eval, Curve derivative, double s_initial)
    : name_(std::move(name)),
      eval_(std::move(eval)),
      derivative_(std::move(derivative)),
      s_initial_(s_initial) {
  if (!eval_ || !derivative_) throw std::invalid_argument("PathDefinition: empty curve");
  if (!(s_initial_ < kPathEnd)) throw std::invalid_argument("PathDefinition: s_initial must be < 0");
}

void PathDefinition::check_domain(double s) const {
  if (!(s >= s_initial_ && s <= kPathEnd)) {
    throw std::out_of_range("path '" + name_ + "': parameter " + std::to_string(s) +
                            " outside [" + std::to_string(s_initial_) + ", 0]");
  }
}

Vec4 PathDefinition::eval(double s) const {
  check_domain(s);
  return eval_(s);
}

Vec4 PathDefinition::eval_derivative(double s) const {
  check_domain(s);
  return derivative_(s);
}

CorridorPathDefinition::CorridorPathDefinition(PathDefinition base, Vec4 direction,
                                               Interval s2_bounds)
    : base_(std::move(base)),
      direction_(std::move(direction)),
      s2_bounds_(s2_bounds),
      name_(base_.name() + "-corridor") {
  if (!(s2_bounds_.lower <= 0.0 && s2_bounds_.upper >= 0.0)) {
    throw std::invalid_argument("CorridorPathDefinition: s2 bounds must contain 0");
  }
}

Vec4 CorridorPathDefinition::eval(double s1, double s2) const {
  if (!s2_bounds_.contains(s2)) {
    throw std::out_of_range("corridor parameter s2 = " + std::to_string(s2) + " outside bounds");
  }
  return base_.eval(s1) + s2 * direction_;
}

bool is_corridor(const AnyPath& path) {
  return std::holds_alternative<CorridorPathDefinition>(path);
}

const PathDefinition& base_path(const AnyPath& path) {
  if (const auto* c = std::get_if<CorridorPathDefinition>(&path)) return c->base();
  return std::get<PathDefinition>(path);
}

Vec4 eval_spiral(double s) {
  require_unit_domain(s, "spiral");
  const double a = kTwoPi * s;
  return {0.25 * std::cos(a), 0.25 * std::sin(a), 0.65 + 0.4 * s, 0.0};
}

Vec4 eval_lemniscate(double s) {
  require_unit_domain(s, "lemniscate");
  const double a = kTwoPi * s;
  const double c = std::cos(a), sn = std::sin(a);
  const double den = sn * sn + 1.0;
  return {0.5 * c / den, 0.5 * sn * c / den, 0.5, 0.0};
}

Vec4 eval_sinusoid(double s) {
  require_unit_domain(s, "sinusoid");
  const double a = kTwoPi * s;
  return {0.25 * std::sin(a), 0.25 + 0.5 * s, 0.5, std::atan2(0.5, 0.5 * kPi * std::cos(a))};
}

Vec4 eval_corridor(double s1, double s2) {
  if (!(s2 >= -0.5 * kPi && s2 <= 0.5 * kPi)) {
    throw std::out_of_range("corridor: s2 = " + std::to_string(s2) + " outside [-pi/2, pi/2]");
  }
  Vec4 p = eval_sinusoid(s1);
  p(3) += s2;
  return p;
}

PathDefinition spiral_path() { return {"spiral", eval_spiral, spiral_derivative}; }

PathDefinition lemniscate_path() { return {"lemniscate", eval_lemniscate, lemniscate_derivative}; }

PathDefinition sinusoid_path() { return {"sinusoid", eval_sinusoid, sinusoid_derivative}; }

PathDefinition hover_path(const Vec4& point) {
  return {"hover", [point](double) { return point; }, [](double) { return Vec4::Zero().eval(); }};
}

CorridorPathDefinition sinusoid_corridor_path(Interval s2_bounds) {
  return {sinusoid_path(), Vec4(0.0, 0.0, 0.0, 1.0), s2_bounds};
}

CorridorPathDefinition sinusoid_corridor_path() {
  return sinusoid_corridor_path({-0.5 * kPi, 0.5 * kPi});
}

double nominal_yaw_rate(double s, double s_dot) { return sinusoid_yaw_slope(s) * s_dot; }

Eigen::Vector2d timing_law(const Eigen::Vector2d& z, double nu) { return {z(1), nu}; }

Eigen::Vector4d corridor_timing_law(const Eigen::Vector4d& z, const Eigen::Vector2d& nu) {
  return {z(2), z(3), nu(0), nu(1)};
}

double wrap_angle(double angle) {
  double a = std::remainder(angle, kTwoPi);  // [-pi, pi]
  if (a <= -kPi) a += kTwoPi;
  return a;
}

Vec4 path_error(const QuadOutput& y, const Vec4& p) {
  Vec4 e = y.to_vector() - p;
  e(3) = wrap_angle(e(3));
  return e;
}

}  // namespace mppfc
