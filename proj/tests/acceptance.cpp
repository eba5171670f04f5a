// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if
// any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/LU>
#include <Eigen/QR>

#include "mppfc/sim.hpp"

using namespace mppfc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Criterion {
  int id;
  std::string title;
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    notes.push_back((ok ? "  ok    " : "  FAIL  ") + what);
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

void model_checks(Criterion& c) {
  const auto t0 = Clock::now();
  const ModelParams p;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.5, 1.5);

  double ortho = 0.0, body = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Vec3 a(u(rng), 0.9 * u(rng), 2.0 * u(rng));
    const Vec3 rate(u(rng), u(rng), u(rng));
    const Mat3 r = rotation_matrix(a);
    ortho = std::max(ortho, (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff());
    ortho = std::max(ortho, std::abs(r.determinant() - 1.0));
    // Oracle: body rates are the inertial angular velocity rotated into the body frame,
    // with the inertial velocity assembled from the three elementary rotation rates.
    const Mat3 rz = rotation_matrix(Vec3(0, 0, a(2)));
    const Mat3 ry = rotation_matrix(Vec3(0, a(1), 0));
    const Vec3 omega_inertial =
        Vec3::UnitZ() * rate(2) + rz * Vec3::UnitY() * rate(1) + rz * ry * Vec3::UnitX() * rate(0);
    body = std::max(body, (body_angular_velocity(a, rate) - r.transpose() * omega_inertial).norm());
  }
  c.require(ortho < 1e-12, fmt("rotation orthonormal, det 1 (worst %.1e < 1e-12)", ortho));
  c.require(body < 1e-12, fmt("body rates = R^T J_R rate (worst %.1e < 1e-12)", body));

  double hover = 0.0;
  for (int i = 0; i < 100; ++i) {
    QuadState s;
    s.position = Vec3(u(rng), u(rng), 0.5 + 0.2 * u(rng));
    s.attitude(2) = u(rng);
    hover = std::max(hover, dynamics(s, QuadInput{}, p).norm());
  }
  c.require(hover < 1e-12, fmt("hover equilibrium |x_dot| = %.1e", hover));

  StateVector x0;
  x0 << 0, 0, 0.5, 0.2, -0.1, 0.05, 0.1, -0.05, 0.3;
  const InputVector in(0.02, 0.1, -0.08, 0.3);
  auto integrate = [&](double h) {
    StateVector x = x0;
    for (long i = 0; i < std::lround(1.0 / h); ++i) x = rk4_step(x, in, h, p);
    return x;
  };
  const StateVector ref = integrate(1.0 / 5120);
  const double ratio = (integrate(0.025) - ref).norm() / (integrate(0.0125) - ref).norm();
  c.require(ratio >= 14.0 && ratio <= 18.0, fmt("RK4 step-halving ratio %.3f in [14, 18]", ratio));

  const double elapsed = seconds_since(t0);
  c.require(elapsed < 5.0, fmt("model checks ran in %.3f s < 5 s", elapsed));
}

// ---------------------------------------------------------------- criterion 2

FunctionNlp quadratic(const Eigen::VectorXd& a) {
  const auto n = static_cast<int>(a.size());
  return FunctionNlp(
      n, [a](const Eigen::VectorXd& w) -> Eigen::VectorXd { return w - a; },
      [n](const Eigen::VectorXd&) -> Eigen::MatrixXd { return Eigen::MatrixXd::Identity(n, n); });
}

double jacobian_fd_error(const OcpProblem& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Eigen::VectorXd w(p.num_variables());
  for (int i = 0; i < w.size(); ++i) {
    double lo = p.lower_bounds()(i), hi = p.upper_bounds()(i);
    if (!std::isfinite(lo)) lo = -1.0;
    if (!std::isfinite(hi)) hi = 1.0;
    w(i) = lo + u(rng) * (hi - lo);
  }
  const DecisionLayout& lay = p.layout();
  for (int k = 0; k <= lay.horizon; ++k) w(lay.path_state(k)) = -0.95 + 0.9 * u(rng);

  NlpEvaluation ev, a, b;
  p.evaluate(w, ev, true);
  const double h = 1e-6;
  double worst = 0.0;
  for (int j = 0; j < w.size(); ++j) {
    Eigen::VectorXd wp = w, wm = w;
    wp(j) += h;
    wm(j) -= h;
    p.evaluate(wp, a, false);
    p.evaluate(wm, b, false);
    const Eigen::VectorXd fr = (a.residual - b.residual) / (2 * h);
    const Eigen::VectorXd fc = (a.constraints - b.constraints) / (2 * h);
    for (Eigen::Index i = 0; i < fr.size(); ++i) {
      worst = std::max(worst, std::abs(ev.residual_jacobian(i, j) - fr(i)) /
                                  std::max(1.0, std::abs(fr(i))));
    }
    for (Eigen::Index i = 0; i < fc.size(); ++i) {
      worst = std::max(worst, std::abs(ev.constraint_jacobian(i, j) - fc(i)) /
                                  std::max(1.0, std::abs(fc(i))));
    }
  }
  return worst;
}

void solver_checks(Criterion& c) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  NlpSolver solver;

  const Eigen::Vector3d a(1.5, -2.0, 0.25);
  const SolveResult r1 = solver.solve(quadratic(a), Eigen::Vector3d::Zero());
  const double e1 = (r1.decision - a).lpNorm<Eigen::Infinity>();
  c.require(r1.status == SolveStatus::converged && e1 < 1e-8 && r1.iterations == 1,
            fmt("min |w - a|^2: error %.1e < 1e-8 in %g Gauss-Newton step(s)", e1, r1.iterations));

  FunctionNlp bounded = quadratic(Eigen::VectorXd::Constant(1, 2.0));
  bounded.with_bounds(Eigen::VectorXd::Constant(1, -kInf), Eigen::VectorXd::Constant(1, 1.0));
  const SolveResult r2 = solver.solve(bounded, Eigen::VectorXd::Zero(1));
  const double e2 = std::abs(r2.decision(0) - 1.0);
  c.require(r2.status == SolveStatus::converged && e2 < 1e-5,
            fmt("min (w - 2)^2 s.t. w <= 1: |w - 1| = %.1e < 1e-5", e2));

  FunctionNlp line = quadratic(Eigen::Vector2d::Zero());
  line.with_equalities(
      1,
      [](const Eigen::VectorXd& w) -> Eigen::VectorXd {
        return Eigen::VectorXd::Constant(1, w.sum() - 1.0);
      },
      [](const Eigen::VectorXd&) -> Eigen::MatrixXd { return Eigen::MatrixXd::Ones(1, 2); });
  const SolveResult r3 = solver.solve(line, Eigen::Vector2d(3.0, -1.0));
  const double e3 = (r3.decision - Eigen::Vector2d(0.5, 0.5)).lpNorm<Eigen::Infinity>();
  c.require(r3.status == SolveStatus::converged && e3 < 1e-8,
            fmt("min |w|^2 s.t. w1 + w2 = 1: error %.1e < 1e-8", e3));

  std::mt19937_64 rng(2024);
  const ScenarioConfig spiral = ScenarioConfig::preset("spiral");
  const ScenarioConfig corridor = ScenarioConfig::preset("sinusoid-corridor");
  QuadState x;
  x.position = eval_spiral(-1.0).head<3>();
  const OcpProblem classic_ocp =
      build_ocp(x, {-1.0, 1e-4}, spiral.make_path(), spiral.ocp, spiral.model);
  const OcpProblem corridor_ocp =
      build_ocp(x, {-1.0, 1e-4, 0.0, 0.0}, corridor.make_path(), corridor.ocp, corridor.model);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    worst = std::max(worst, jacobian_fd_error(t % 2 ? corridor_ocp : classic_ocp, rng));
  }
  c.require(worst < 1e-5, fmt("OCP Jacobians vs finite differences on 20 points: rel %.1e < 1e-5",
                              worst));
}

// ---------------------------------------------------------------- scenario helpers

struct Run {
  ScenarioConfig config;
  SimResult result;
};

Run run(ScenarioConfig config) {
  Run r{config, {}};
  r.result = run_scenario(config);
  return r;
}

const RunMetrics& m(const Run& r) { return r.result.metrics; }

// Maximal intervals with s_dot below `level`, each reported as [start, end).
std::vector<std::pair<double, double>> slow_intervals(const SimLog& log, double level) {
  std::vector<std::pair<double, double>> out;
  double start = std::numeric_limits<double>::quiet_NaN();
  for (const SimRecord& r : log.records) {
    const bool slow = r.z.s_dot < level;
    if (slow && std::isnan(start)) start = r.t;
    if (!slow && !std::isnan(start)) {
      out.emplace_back(start, r.t);
      start = std::numeric_limits<double>::quiet_NaN();
    }
  }
  if (!std::isnan(start)) out.emplace_back(start, log.records.back().t + 0.05);
  return out;
}

void tracking_gates(Criterion& c, const Run& r, bool terminal_gate) {
  const RunMetrics& mm = m(r);
  const double sdmax = r.config.s_dot_max();
  c.require(mm.time_to_path_end >= 24.0 && mm.time_to_path_end <= 32.0,
            fmt("time_to_path_end %.2f s in [24, 32]", mm.time_to_path_end));

  // s_dot saturation within 10 s, then s within 0.02 of a straight line until the path end.
  double t_sat = std::numeric_limits<double>::quiet_NaN();
  for (const SimRecord& rec : r.result.log.records) {
    if (rec.z.s_dot >= 0.95 * sdmax) {
      t_sat = rec.t;
      break;
    }
  }
  c.require(t_sat <= 10.0, fmt("s_dot >= 0.95 s_dot_max at t = %.2f s <= 10 s", t_sat));

  std::vector<double> ts, ss;
  for (const SimRecord& rec : r.result.log.records) {
    if (rec.t >= t_sat && rec.z.s < kPathEndThreshold) {
      ts.push_back(rec.t);
      ss.push_back(rec.z.s);
    }
  }
  double dev = std::numeric_limits<double>::infinity();
  if (ts.size() > 2) {
    Eigen::MatrixXd a(ts.size(), 2);
    Eigen::VectorXd b(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
      a(i, 0) = ts[i];
      a(i, 1) = 1.0;
      b(i) = ss[i];
    }
    const Eigen::Vector2d fit = a.colPivHouseholderQr().solve(b);
    dev = (a * fit - b).lpNorm<Eigen::Infinity>();
  }
  c.require(dev < 0.02, fmt("s(t) within %.4f < 0.02 of a straight line after saturation", dev));
  c.require(mm.rms_position_error < 0.05,
            fmt("RMS position error %.4f m < 0.05 m", mm.rms_position_error));
  c.require(mm.wall_time < 60.0, fmt("runtime %.2f s < 60 s", mm.wall_time));
  c.require(mm.constraint_violation_max <= 1e-6,
            fmt("state/input boxes respected (worst %.1e <= 1e-6)", mm.constraint_violation_max));
  if (terminal_gate) {
    const double closure = (eval_lemniscate(-1.0) - eval_lemniscate(0.0)).norm();
    c.require(closure < 1e-12, fmt("closed curve: |p(-1) - p(0)| = %.1e", closure));
    c.require(mm.terminal_position_error < 0.05,
              fmt("terminal position error %.4f m < 0.05 m", mm.terminal_position_error));
  }
}

std::string csv_without_timing(const SimLog& log, const fs::path& file) {
  export_csv(log, file);
  std::ifstream in(file);
  std::string line, out;
  while (std::getline(in, line)) {
    // Drop solve_time_ms (second to last column).
    const auto last = line.rfind(',');
    const auto prev = line.rfind(',', last - 1);
    out += line.substr(0, prev) + line.substr(last) + '\n';
  }
  return out;
}

}  // namespace

int main() {
  std::vector<Criterion> cs = {
      {1, "model correctness"},  {2, "solver correctness"},  {3, "spiral scenario"},
      {4, "lemniscate scenario"}, {5, "sinusoid scenario"},  {6, "corridor scenario"},
      {7, "thrust mismatch"},    {8, "determinism"},
  };

  // The closed-loop runs are independent; start them first and check the fast criteria
  // while they execute. Each run owns its controller and solver.
  auto launch = [](ScenarioConfig cfg) { return std::async(std::launch::async, run, cfg); };
  ScenarioConfig mismatch = ScenarioConfig::preset("spiral");
  mismatch.thrust_scale = 0.97;
  ScenarioConfig zero_corridor = ScenarioConfig::preset("sinusoid-corridor");
  zero_corridor.s2_bounds = {0.0, 0.0};
  auto f_spiral = launch(ScenarioConfig::preset("spiral"));
  auto f_lemniscate = launch(ScenarioConfig::preset("lemniscate"));
  auto f_sinusoid = launch(ScenarioConfig::preset("sinusoid"));
  auto f_corridor = launch(ScenarioConfig::preset("sinusoid-corridor"));
  auto f_zero = launch(zero_corridor);
  auto f_mismatch = launch(mismatch);
  auto f_rerun = launch(ScenarioConfig::preset("spiral"));

  model_checks(cs[0]);
  solver_checks(cs[1]);

  const Run spiral = f_spiral.get();
  tracking_gates(cs[2], spiral, false);

  const Run lemniscate = f_lemniscate.get();
  tracking_gates(cs[3], lemniscate, true);

  const Run sinusoid = f_sinusoid.get();
  {
    Criterion& c = cs[4];
    const RunMetrics& mm = m(sinusoid);
    c.require(mm.max_abs_yaw_rate <= 0.2 + 1e-6,
              fmt("max |yaw rate command| %.6f <= 0.2 + 1e-6", mm.max_abs_yaw_rate));
    int plateaus = 0;
    std::string list;
    for (const auto& [a, b] : slow_intervals(sinusoid.result.log, 0.5 * mm.s_dot_max)) {
      // Braking after the path end is not a plateau.
      if (b - a >= 1.0 - 1e-9 && a < mm.time_to_path_end) {
        ++plateaus;
        list += fmt(" [%.2f, %.2f)", a, b);
      }
    }
    c.require(plateaus >= 2, "slowdowns with s_dot < 0.5 s_dot_max lasting >= 1 s: " +
                                 std::to_string(plateaus) + list);
    const double rate = nominal_yaw_rate(-0.75, 0.02);
    c.require(std::abs(rate - 0.39478) <= 1e-4,
              fmt("nominal yaw rate at s = -0.75, s_dot = 0.02: %.5f (0.39478 +- 1e-4)", rate));
    c.require(mm.constraint_violation_max <= 1e-6,
              fmt("state/input boxes respected (worst %.1e)", mm.constraint_violation_max));
  }

  const Run corridor = f_corridor.get();
  const Run zero = f_zero.get();
  {
    Criterion& c = cs[5];
    try {
      const CorridorComparison cmp = compare_corridor(m(sinusoid), m(corridor));
      c.require(cmp.relative_reduction >= 0.20,
                fmt("time to path end %.2f s vs classic %.2f s: reduction %.1f %% >= 20 %%",
                    cmp.corridor_time, cmp.classic_time, 100.0 * cmp.relative_reduction));
      c.require(cmp.max_abs_s2 <= std::numbers::pi / 2 + 1e-6,
                fmt("max |s2| %.6f <= pi/2", cmp.max_abs_s2));
      c.require(cmp.terminal_abs_s2 < 0.1, fmt("|s2| at termination %.4f < 0.1", cmp.terminal_abs_s2));
    } catch (const std::exception& e) {
      c.require(false, std::string("comparison failed: ") + e.what());
    }
    const double dt = std::abs(m(zero).time_to_path_end - m(sinusoid).time_to_path_end);
    c.require(dt < 1.0, fmt("bounds [0, 0]: %.2f s vs classic %.2f s (|diff| %.2f < 1 s)",
                            m(zero).time_to_path_end, m(sinusoid).time_to_path_end, dt));
  }

  const Run mism = f_mismatch.get();
  {
    Criterion& c = cs[6];
    const double nominal = m(spiral).mean_z_error, scaled = m(mism).mean_z_error;
    c.require(scaled < 0.0, fmt("thrust_scale 0.97: mean z error %+.5f m < 0", scaled));
    c.require(std::abs(scaled) > 3.0 * std::abs(nominal),
              fmt("|%.5f| > 3 x nominal |%.5f|", scaled, nominal));
  }

  const Run rerun = f_rerun.get();
  {
    Criterion& c = cs[7];
    const fs::path dir = fs::temp_directory_path() / "mppfc_acceptance";
    fs::create_directories(dir);
    const std::string a = csv_without_timing(spiral.result.log, dir / "a.csv");
    const std::string b = csv_without_timing(rerun.result.log, dir / "b.csv");
    c.require(!a.empty() && a == b, "two spiral runs give identical log.csv apart from solve time (" +
                                        std::to_string(spiral.result.log.records.size()) +
                                        " rows)");
  }

  bool all = true;
  for (const Criterion& c : cs) {
    for (const std::string& n : c.notes) std::printf("%s\n", n.c_str());
    std::printf("%s criterion %d: %s\n\n", c.pass ? "PASS" : "FAIL", c.id, c.title.c_str());
    all = all && c.pass;
  }
  return all ? 0 : 1;
}
