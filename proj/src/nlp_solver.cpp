#include "mppfc/nlp_solver.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace mppfc {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kFractionToBoundary = 0.995;
constexpr double kBarrierStageFactor = 10.0;  // leave a barrier stage once E_mu <= 10 mu
constexpr double kMaxRegularization = 1e10;
constexpr double kDualSafeguard = 1e10;
constexpr double kMeritNoise = 1e-9;
constexpr double kGapDeadZone = 1e-8;

bool is_fixed(double lo, double hi) { return lo == hi; }

// Barrier-augmented quantities at one point for the free variables.
struct BarrierTerms {
  double value = 0.0;
  Eigen::VectorXd gradient;  // full length, zero on fixed variables
  Eigen::VectorXd curvature;
};

BarrierTerms barrier_terms(const Eigen::VectorXd& w, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, double mu) {
  BarrierTerms b;
  b.gradient.setZero(w.size());
  b.curvature.setZero(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (is_fixed(lo(i), hi(i))) continue;
    if (std::isfinite(lo(i))) {
      const double d = w(i) - lo(i);
      b.value -= mu * std::log(d);
      b.gradient(i) -= mu / d;
      b.curvature(i) += mu / (d * d);
    }
    if (std::isfinite(hi(i))) {
      const double d = hi(i) - w(i);
      b.value -= mu * std::log(d);
      b.gradient(i) += mu / d;
      b.curvature(i) += mu / (d * d);
    }
  }
  return b;
}

bool strictly_interior(const Eigen::VectorXd& w, const Eigen::VectorXd& lo,
                       const Eigen::VectorXd& hi) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w(i))) return false;
    if (is_fixed(lo(i), hi(i))) {
      if (w(i) != lo(i)) return false;
    } else if (!(w(i) > lo(i) && w(i) < hi(i))) {
      return false;
    }
  }
  return true;
}

double stationarity_inf(const Eigen::VectorXd& grad, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!is_fixed(lo(i), hi(i))) s = std::max(s, std::abs(grad(i)));
  }
  return s;
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }
// l1 norm with entries at roundoff level ignored, so that the penalty term does not add
// evaluation noise once the shooting gaps are closed.
double l1_excess(const Eigen::VectorXd& v) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) sum += std::max(0.0, std::abs(v(i)) - kGapDeadZone);
  return sum;
}

// Its one-sided derivative along a step that linearly closes the gaps (A dw = -c).
double l1_excess_slope(const Eigen::VectorXd& v) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > kGapDeadZone) sum -= std::abs(v(i));
  }
  return sum;
}

// Gradient of the barrier Lagrangian: 2 J^T r + barrier gradient + A^T lambda.
Eigen::VectorXd lagrangian_gradient(const NlpEvaluation& ev, const BarrierTerms& b,
                                    const Eigen::VectorXd& lambda) {
  Eigen::VectorXd g = 2.0 * ev.residual_jacobian.transpose() * ev.residual + b.gradient;
  if (lambda.size() > 0) g.noalias() += ev.constraint_jacobian.transpose() * lambda;
  return g;
}

}  // namespace

void SolverSettings::validate() const {
  const bool ok = kkt_tolerance > 0 && max_iterations > 0 && barrier_initial > 0 &&
                  barrier_decrease > 0 && barrier_decrease < 1 && barrier_floor > 0 &&
                  barrier_floor <= barrier_initial && barrier_warm_initial >= barrier_floor &&
                  barrier_warm_initial <= barrier_initial && linesearch_backtrack > 0 &&
                  linesearch_backtrack < 1 && linesearch_max_backtracks > 0 &&
                  merit_penalty > 0 && regularization_floor > 0;
  if (!ok) throw std::invalid_argument("SolverSettings: invalid value");
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::max_iterations:
      return "max-iterations";
    case SolveStatus::linesearch_failure:
      return "linesearch-failure";
  }
  return "unknown";
}

double kkt_residual(const LeastSquaresNlp& problem, const Eigen::VectorXd& point,
                    const Eigen::VectorXd& multipliers, double mu) {
  const Eigen::VectorXd& lo = problem.lower_bounds();
  const Eigen::VectorXd& hi = problem.upper_bounds();
  if (point.size() != problem.num_variables() || multipliers.size() != problem.num_equalities()) {
    throw std::invalid_argument("kkt_residual: dimension mismatch");
  }
  if (!strictly_interior(point, lo, hi)) {
    throw std::invalid_argument("kkt_residual: point is not strictly inside the bounds");
  }
  NlpEvaluation ev;
  problem.evaluate(point, ev, true);
  const BarrierTerms b = barrier_terms(point, lo, hi, mu);
  const double stat = stationarity_inf(lagrangian_gradient(ev, b, multipliers), lo, hi);
  return std::max(stat, inf_norm(ev.constraints));
}

Eigen::VectorXd project_interior(const LeastSquaresNlp& problem, const Eigen::VectorXd& w) {
  const Eigen::VectorXd& lo = problem.lower_bounds();
  const Eigen::VectorXd& hi = problem.upper_bounds();
  if (w.size() != lo.size()) throw std::invalid_argument("project_interior: dimension mismatch");
  Eigen::VectorXd out = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (is_fixed(lo(i), hi(i))) {
      out(i) = lo(i);
      continue;
    }
    const bool has_lo = std::isfinite(lo(i));
    const bool has_hi = std::isfinite(hi(i));
    double margin = 0.0;
    if (has_lo && has_hi) {
      margin = 1e-6 * (hi(i) - lo(i));
    } else if (has_lo || has_hi) {
      margin = 1e-6 * std::max(1.0, std::abs(has_lo ? lo(i) : hi(i)));
    }
    if (!std::isfinite(out(i))) out(i) = has_lo && has_hi ? 0.5 * (lo(i) + hi(i)) : 0.0;
    if (has_lo) out(i) = std::max(out(i), lo(i) + margin);
    if (has_hi) out(i) = std::min(out(i), hi(i) - margin);
  }
  return out;
}

NlpSolver::NlpSolver(SolverSettings settings) : settings_(settings) { settings_.validate(); }

// Primal-dual barrier iteration: bound multipliers z_lo, z_hi are carried alongside w, the
// barrier curvature is z / d instead of mu / d^2, and the step is globalized with the primal
// barrier merit. This avoids the slow (distance-doubling) progress of a purely primal barrier
// Newton step when a variable starts next to its bound.
SolveResult NlpSolver::solve(const LeastSquaresNlp& problem, const Eigen::VectorXd& initial_guess,
                             const Eigen::VectorXd& initial_multipliers) {
  const auto t_start = std::chrono::steady_clock::now();
  const int n = problem.num_variables();
  const int m = problem.num_equalities();
  const Eigen::VectorXd& lo = problem.lower_bounds();
  const Eigen::VectorXd& hi = problem.upper_bounds();
  if (initial_guess.size() != n) throw std::invalid_argument("solve: initial guess size mismatch");
  if (!strictly_interior(initial_guess, lo, hi)) {
    throw std::invalid_argument("solve: initial guess must be strictly inside the bounds");
  }

  std::vector<int> free_idx;
  for (int i = 0; i < n; ++i) {
    if (!is_fixed(lo(i), hi(i))) free_idx.push_back(i);
  }
  const int nf = static_cast<int>(free_idx.size());
  std::vector<char> has_lo(n, 0), has_hi(n, 0);
  for (int i : free_idx) {
    has_lo[i] = std::isfinite(lo(i));
    has_hi[i] = std::isfinite(hi(i));
  }

  SolveResult result;
  Eigen::VectorXd w = initial_guess;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  const bool warm = m > 0 && initial_multipliers.size() == m;
  if (warm) lambda = initial_multipliers;

  double mu = warm ? settings_.barrier_warm_initial : settings_.barrier_initial;
  double rho = settings_.merit_penalty;
  const double mu_target = 10.0 * settings_.barrier_floor;

  Eigen::VectorXd z_lo = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z_hi = Eigen::VectorXd::Zero(n);
  for (int i : free_idx) {
    if (has_lo[i]) z_lo(i) = mu / (w(i) - lo(i));
    if (has_hi[i]) z_hi(i) = mu / (hi(i) - w(i));
  }

  NlpEvaluation ev;
  NlpEvaluation trial;
  problem.evaluate(w, ev, true);

  auto merit = [&](const NlpEvaluation& e, const Eigen::VectorXd& x, double mu_, double rho_) {
    return e.residual.squaredNorm() + barrier_terms(x, lo, hi, mu_).value +
           rho_ * l1_excess(e.constraints);
  };
  // Primal-dual optimality error of the barrier subproblem: stationarity and complementarity.
  auto pd_error = [&](const Eigen::VectorXd& grad_obj, double mu_) {
    Eigen::VectorXd g = grad_obj - z_lo + z_hi;
    if (m > 0) g.noalias() += ev.constraint_jacobian.transpose() * lambda;
    double err = stationarity_inf(g, lo, hi);
    for (int i : free_idx) {
      if (has_lo[i]) err = std::max(err, std::abs(z_lo(i) * (w(i) - lo(i)) - mu_));
      if (has_hi[i]) err = std::max(err, std::abs(z_hi(i) * (hi(i) - w(i)) - mu_));
    }
    return err;
  };

  Eigen::MatrixXd jf, af, aa, h, hinv_at, s;
  Eigen::VectorXd gf, dw(n), grad_obj;
  BarrierTerms bar;
  double stat = 0.0, eq = 0.0;
  result.status = SolveStatus::max_iterations;

  int iter = 0;
  for (;; ++iter) {
    grad_obj = 2.0 * ev.residual_jacobian.transpose() * ev.residual;
    eq = inf_norm(ev.constraints);
    double err = pd_error(grad_obj, mu);

    // Leave barrier stages that are already solved to within 10 mu.
    while (mu > mu_target && std::max(err, eq) <= kBarrierStageFactor * mu) {
      mu = std::max(settings_.barrier_floor, mu * settings_.barrier_decrease);
      err = pd_error(grad_obj, mu);
    }
    bar = barrier_terms(w, lo, hi, mu);
    stat = stationarity_inf(lagrangian_gradient(ev, bar, lambda), lo, hi);
    if (mu <= mu_target && stat <= settings_.kkt_tolerance && eq <= settings_.kkt_tolerance) {
      result.status = SolveStatus::converged;
      break;
    }
    if (iter >= settings_.max_iterations) break;

    // Reduced (free-variable) Gauss-Newton KKT system, solved by Schur complement.
    jf.resize(ev.residual_jacobian.rows(), nf);
    af.resize(m, nf);
    gf.resize(nf);
    const Eigen::VectorXd grad_bar = grad_obj + bar.gradient;
    for (int j = 0; j < nf; ++j) {
      jf.col(j) = ev.residual_jacobian.col(free_idx[j]);
      if (m > 0) af.col(j) = ev.constraint_jacobian.col(free_idx[j]);
      gf(j) = grad_bar(free_idx[j]);
    }
    h.noalias() = 2.0 * jf.transpose() * jf;
    for (int j = 0; j < nf; ++j) {
      const int i = free_idx[j];
      if (has_lo[i]) h(j, j) += z_lo(i) / (w(i) - lo(i));
      if (has_hi[i]) h(j, j) += z_hi(i) / (hi(i) - w(i));
    }

    // Levenberg-style regularization only when the factorization fails.
    double reg = 0.0;
    Eigen::LLT<Eigen::MatrixXd> h_llt(h);
    while (h_llt.info() != Eigen::Success && reg <= kMaxRegularization) {
      reg = reg == 0.0 ? settings_.regularization_floor : 10.0 * reg;
      h_llt.compute(h + reg * Eigen::MatrixXd::Identity(nf, nf));
    }

    // Rows that only involve fixed variables cannot be moved by the step; they are dropped
    // from the Schur complement and keep a zero multiplier.
    std::vector<int> rows;
    for (int r = 0; r < m; ++r) {
      if (af.row(r).squaredNorm() > 0.0) rows.push_back(r);
    }
    const int ma = static_cast<int>(rows.size());

    Eigen::VectorXd lambda_plus = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd dwf;
    if (ma > 0) {
      aa.resize(ma, nf);
      Eigen::VectorXd ca(ma);
      for (int r = 0; r < ma; ++r) {
        aa.row(r) = af.row(rows[r]);
        ca(r) = ev.constraints(rows[r]);
      }
      hinv_at = h_llt.solve(aa.transpose());
      s.noalias() = aa * hinv_at;
      const Eigen::VectorXd rhs = ca - aa * h_llt.solve(gf);
      double s_reg = 0.0;
      Eigen::LLT<Eigen::MatrixXd> s_llt(s);
      while (s_llt.info() != Eigen::Success && s_reg < kMaxRegularization) {
        s_reg = s_reg == 0.0 ? settings_.regularization_floor : 10.0 * s_reg;
        s_llt.compute(s + s_reg * Eigen::MatrixXd::Identity(ma, ma));
      }
      const Eigen::VectorXd la = s_llt.solve(rhs);
      for (int r = 0; r < ma; ++r) lambda_plus(rows[r]) = la(r);
      dwf = -h_llt.solve(gf + aa.transpose() * la);
    } else {
      dwf = -h_llt.solve(gf);
    }
    dw.setZero();
    for (int j = 0; j < nf; ++j) dw(free_idx[j]) = dwf(j);

    // Bound-multiplier step from the linearized complementarity z d = mu.
    Eigen::VectorXd dz_lo = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd dz_hi = Eigen::VectorXd::Zero(n);
    double alpha_z = 1.0;
    for (int i : free_idx) {
      if (has_lo[i]) {
        const double d = w(i) - lo(i);
        dz_lo(i) = mu / d - z_lo(i) - z_lo(i) / d * dw(i);
        if (dz_lo(i) < 0.0) alpha_z = std::min(alpha_z, kFractionToBoundary * z_lo(i) / -dz_lo(i));
      }
      if (has_hi[i]) {
        const double d = hi(i) - w(i);
        dz_hi(i) = mu / d - z_hi(i) + z_hi(i) / d * dw(i);
        if (dz_hi(i) < 0.0) alpha_z = std::min(alpha_z, kFractionToBoundary * z_hi(i) / -dz_hi(i));
      }
    }

    rho = std::max(settings_.merit_penalty, 2.0 * inf_norm(lambda_plus));
    const double merit0 = merit(ev, w, mu, rho);
    const double slope = grad_bar.dot(dw) + rho * l1_excess_slope(ev.constraints);

    // Fraction-to-boundary rule keeps iterates strictly interior.
    double alpha = 1.0;
    for (int i : free_idx) {
      if (dw(i) < 0.0 && has_lo[i]) {
        alpha = std::min(alpha, kFractionToBoundary * (w(i) - lo(i)) / -dw(i));
      } else if (dw(i) > 0.0 && has_hi[i]) {
        alpha = std::min(alpha, kFractionToBoundary * (hi(i) - w(i)) / dw(i));
      }
    }

    IterationRecord rec;
    rec.iteration = iter;
    rec.mu = mu;
    rec.penalty = rho;
    rec.merit_before = merit0;
    rec.directional_derivative = slope;
    rec.stationarity = stat;
    rec.equality_inf = eq;
    rec.regularization = reg;

    // Near convergence the predicted decrease drops below the evaluation noise of the merit
    // (rho times the roundoff in the shooting gaps); the Armijo test is then relaxed to
    // "no increase beyond that noise".
    const double noise_level = kMeritNoise * (1.0 + std::abs(merit0));
    const double noise = -slope < noise_level ? noise_level : 0.0;

    Eigen::VectorXd w_try(n);
    for (int bt = 0; bt <= settings_.linesearch_max_backtracks; ++bt) {
      w_try = w + alpha * dw;
      for (int i = 0; i < n; ++i) {
        if (is_fixed(lo(i), hi(i))) w_try(i) = lo(i);
      }
      if (strictly_interior(w_try, lo, hi)) {
        problem.evaluate(w_try, trial, false);
        const double merit1 = merit(trial, w_try, mu, rho);
        if (std::isfinite(merit1) && merit1 <= merit0 + kArmijo * alpha * slope + noise) {
          rec.accepted = true;
          rec.merit_after = merit1;
          break;
        }
      }
      ++rec.backtracks;
      alpha *= settings_.linesearch_backtrack;
    }
    rec.step_length = rec.accepted ? alpha : 0.0;
    result.history.push_back(rec);
    if (!rec.accepted) {
      result.status = SolveStatus::linesearch_failure;
      break;
    }
    w = w_try;
    lambda = lambda_plus;
    z_lo += alpha_z * dz_lo;
    z_hi += alpha_z * dz_hi;
    // Keep z within a bounded ratio of its primal estimate mu / d.
    for (int i : free_idx) {
      if (has_lo[i]) {
        const double d = w(i) - lo(i);
        z_lo(i) = std::clamp(z_lo(i), mu / (kDualSafeguard * d), kDualSafeguard * mu / d);
      }
      if (has_hi[i]) {
        const double d = hi(i) - w(i);
        z_hi(i) = std::clamp(z_hi(i), mu / (kDualSafeguard * d), kDualSafeguard * mu / d);
      }
    }
    problem.evaluate(w, ev, true);
  }

  result.iterations = iter;
  result.final_mu = mu;
  bar = barrier_terms(w, lo, hi, mu);
  result.equality_residual_inf = inf_norm(ev.constraints);
  result.kkt_residual = std::max(
      stationarity_inf(lagrangian_gradient(ev, bar, lambda), lo, hi), result.equality_residual_inf);
  result.decision = std::move(w);
  result.multipliers = std::move(lambda);
  result.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

Eigen::VectorXd warm_start_shift(const SolveResult& previous, const OcpProblem& problem_new) {
  const DecisionLayout& lay = problem_new.layout();
  const int n = lay.size();
  if (previous.decision.size() != n) {
    throw std::invalid_argument("warm_start_shift: previous solution has a different layout");
  }
  const int ss = lay.stage_size();
  Eigen::VectorXd w(n);
  w.head(n - ss) = previous.decision.tail(n - ss);
  const int last = lay.horizon - 1;
  w.segment(lay.input(last), lay.nu + lay.nv) =
      previous.decision.segment(lay.input(last), lay.nu + lay.nv);
  // Virtual inputs are clipped so that the path speed stays strictly admissible; where one
  // changes, the (linear) timing chain downstream is propagated again so the gaps stay closed.
  const OcpConfig& cfg = problem_new.config();
  const double dt = cfg.delta;
  const double m = 1e-5 * (cfg.s_dot_max - cfg.s_dot_floor);
  bool dirty = false;
  for (int k = 0; k < last; ++k) {
    const int is = lay.path_state(k), isd = is + lay.nv, iv = lay.virtual_input(k);
    const double sd = w(isd);
    const double nu_lo = (cfg.s_dot_floor + m - sd) / dt, nu_hi = (cfg.s_dot_max - m - sd) / dt;
    const double nu = nu_lo < nu_hi ? std::clamp(w(iv), nu_lo, nu_hi) : w(iv);
    if (nu != w(iv) || dirty) {
      w(iv) = nu;
      w(lay.path_state(k + 1)) = w(is) + dt * sd + 0.5 * dt * dt * nu;
      w(lay.path_state(k + 1) + lay.nv) = sd + dt * nu;
      dirty = true;
    }
  }
  {
    const int iv = lay.virtual_input(last);
    const double sd = w(lay.path_state(last) + lay.nv);
    const double nu_lo = (cfg.s_dot_floor + m - sd) / dt, nu_hi = (cfg.s_dot_max - m - sd) / dt;
    if (nu_lo < nu_hi) w(iv) = std::clamp(w(iv), nu_lo, nu_hi);
  }
  problem_new.propagate_stage(w, last);

  return project_interior(problem_new, w);
}

Eigen::VectorXd shift_multipliers(const SolveResult& previous, const OcpProblem& problem_new) {
  const DecisionLayout& lay = problem_new.layout();
  const int m = lay.num_equalities();
  if (previous.multipliers.size() != m) return Eigen::VectorXd::Zero(m);
  const int block = lay.nx + lay.nz;
  Eigen::VectorXd out(m);
  // Block 0 pins x_0/z_0; block k+1 is the gap into stage k+1.
  out.head(m - block) = previous.multipliers.tail(m - block);
  out.tail(block) = previous.multipliers.tail(block);
  return out;
}

void write_iteration_table(std::ostream& os, const SolveResult& result) {
  char line[256];
  std::snprintf(line, sizeof line, "%4s %10s %10s %14s %14s %11s %11s %11s %9s %3s\n", "it", "mu",
                "rho", "merit", "merit_new", "dir_deriv", "stat", "eq_inf", "alpha", "bt");
  os << line;
  for (const auto& r : result.history) {
    std::snprintf(line, sizeof line,
                  "%4d %10.3e %10.3e %14.7e %14.7e %11.3e %11.3e %11.3e %9.3e %3d\n", r.iteration,
                  r.mu, r.penalty, r.merit_before, r.merit_after, r.directional_derivative,
                  r.stationarity, r.equality_inf, r.step_length, r.backtracks);
    os << line;
  }
  std::snprintf(line, sizeof line, "status=%s iters=%d kkt=%.3e eq=%.3e mu=%.1e time=%.3fms\n",
                std::string(to_string(result.status)).c_str(), result.iterations,
                result.kkt_residual, result.equality_residual_inf, result.final_mu,
                1e3 * result.solve_time);
  os << line;
}

}  // namespace mppfc
