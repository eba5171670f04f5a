#pragma once

#include <functional>

#include <Eigen/Core>

namespace mppfc {

/// Values (and optionally first derivatives) of a least-squares NLP at one point.
struct NlpEvaluation {
  Eigen::VectorXd residual;  // objective is residual.squaredNorm()
  Eigen::MatrixXd residual_jacobian;
  Eigen::VectorXd constraints;  // equality constraints c(w) = 0
  Eigen::MatrixXd constraint_jacobian;
};

/// minimize ||r(w)||^2  subject to  c(w) = 0,  lower <= w <= upper.
///
/// Bounds may be infinite. A variable with lower == upper is treated as fixed.
class LeastSquaresNlp {
 public:
  virtual ~LeastSquaresNlp() = default;

  [[nodiscard]] virtual int num_variables() const = 0;
  [[nodiscard]] virtual int num_equalities() const = 0;
  [[nodiscard]] virtual const Eigen::VectorXd& lower_bounds() const = 0;
  [[nodiscard]] virtual const Eigen::VectorXd& upper_bounds() const = 0;
  virtual void evaluate(const Eigen::VectorXd& w, NlpEvaluation& out,
                        bool with_jacobians) const = 0;

  [[nodiscard]] double objective(const Eigen::VectorXd& w) const;
  [[nodiscard]] Eigen::VectorXd objective_gradient(const Eigen::VectorXd& w) const;
};

/// Small NLP assembled from callables; mostly useful for tests and self-checks.
class FunctionNlp final : public LeastSquaresNlp {
 public:
  using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  FunctionNlp(int num_variables, VectorFn residual, MatrixFn residual_jacobian);

  FunctionNlp& with_equalities(int count, VectorFn constraints, MatrixFn constraint_jacobian);
  FunctionNlp& with_bounds(Eigen::VectorXd lower, Eigen::VectorXd upper);

  [[nodiscard]] int num_variables() const override { return n_; }
  [[nodiscard]] int num_equalities() const override { return m_; }
  [[nodiscard]] const Eigen::VectorXd& lower_bounds() const override { return lower_; }
  [[nodiscard]] const Eigen::VectorXd& upper_bounds() const override { return upper_; }
  void evaluate(const Eigen::VectorXd& w, NlpEvaluation& out, bool with_jacobians) const override;

 private:
  int n_;
  int m_ = 0;
  VectorFn residual_;
  MatrixFn residual_jacobian_;
  VectorFn constraints_;
  MatrixFn constraint_jacobian_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

}  // namespace mppfc
