#pragma once

#include <iosfwd>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mppfc/nlp_problem.hpp"
#include "mppfc/transcription.hpp"

namespace mppfc {

struct SolverSettings {
  double kkt_tolerance = 1e-6;
  int max_iterations = 50;
  double barrier_initial = 1e-2;
  double barrier_warm_initial = 1e-4;  // used when multipliers are carried over
  double barrier_decrease = 0.2;
  double barrier_floor = 1e-8;
  double linesearch_backtrack = 0.5;
  int linesearch_max_backtracks = 30;
  double merit_penalty = 1e3;
  double regularization_floor = 1e-8;

  void validate() const;
};

enum class SolveStatus { converged, max_iterations, linesearch_failure };

[[nodiscard]] std::string_view to_string(SolveStatus status);

/// One row of the per-solve iteration table.
struct IterationRecord {
  int iteration = 0;
  double mu = 0.0;
  double penalty = 0.0;
  double merit_before = 0.0;
  double merit_after = 0.0;
  double directional_derivative = 0.0;
  double stationarity = 0.0;
  double equality_inf = 0.0;
  double step_length = 0.0;
  double regularization = 0.0;
  int backtracks = 0;
  bool accepted = false;
};

struct SolveResult {
  Eigen::VectorXd decision;
  Eigen::VectorXd multipliers;  // equality multipliers
  SolveStatus status = SolveStatus::max_iterations;
  double kkt_residual = 0.0;
  double equality_residual_inf = 0.0;
  double final_mu = 0.0;
  int iterations = 0;
  double solve_time = 0.0;  // s
  std::vector<IterationRecord> history;
};

/// Barrier-KKT residual: max(||grad f - mu/(w-l) + mu/(u-w) + A^T lambda||_inf, ||c||_inf).
/// Throws std::invalid_argument if `point` is not strictly inside the bounds.
[[nodiscard]] double kkt_residual(const LeastSquaresNlp& problem, const Eigen::VectorXd& point,
                                  const Eigen::VectorXd& multipliers, double mu);

/// Moves `w` strictly inside the bounds with a margin of 1e-6 of each finite range;
/// fixed variables (lower == upper) are set to their value.
[[nodiscard]] Eigen::VectorXd project_interior(const LeastSquaresNlp& problem,
                                               const Eigen::VectorXd& w);

/// Gauss-Newton SQP on the log-barrier problem, with an l1 exact-penalty line search.
///
/// Owns its workspace; one instance per controller.
class NlpSolver {
 public:
  explicit NlpSolver(SolverSettings settings = {});

  /// `initial_guess` must be strictly interior (see project_interior). Multipliers default
  /// to zero when `initial_multipliers` is empty.
  [[nodiscard]] SolveResult solve(const LeastSquaresNlp& problem,
                                  const Eigen::VectorXd& initial_guess,
                                  const Eigen::VectorXd& initial_multipliers = {});

  [[nodiscard]] const SolverSettings& settings() const { return settings_; }

 private:
  SolverSettings settings_;
};

/// Receding-horizon shift: stages move one step left, the last input is repeated and the
/// last state propagated through the model, then the result is projected into the new box.
[[nodiscard]] Eigen::VectorXd warm_start_shift(const SolveResult& previous,
                                               const OcpProblem& problem_new);

/// Same shift applied to the equality multipliers (pinning rows, then gap rows).
[[nodiscard]] Eigen::VectorXd shift_multipliers(const SolveResult& previous,
                                                const OcpProblem& problem_new);

/// Writes the iteration table of one solve.
void write_iteration_table(std::ostream& os, const SolveResult& result);

}  // namespace mppfc
