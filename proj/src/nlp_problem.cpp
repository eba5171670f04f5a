#include "mppfc/nlp_problem.hpp"

#include <limits>
#include <stdexcept>
#include <utility>

namespace mppfc {

double LeastSquaresNlp::objective(const Eigen::VectorXd& w) const {
  NlpEvaluation ev;
  evaluate(w, ev, false);
  return ev.residual.squaredNorm();
}

Eigen::VectorXd LeastSquaresNlp::objective_gradient(const Eigen::VectorXd& w) const {
  NlpEvaluation ev;
  evaluate(w, ev, true);
  return 2.0 * ev.residual_jacobian.transpose() * ev.residual;
}

FunctionNlp::FunctionNlp(int num_variables, VectorFn residual, MatrixFn residual_jacobian)
    : n_(num_variables),
      residual_(std::move(residual)),
      residual_jacobian_(std::move(residual_jacobian)),
      lower_(Eigen::VectorXd::Constant(num_variables, -std::numeric_limits<double>::infinity())),
      upper_(Eigen::VectorXd::Constant(num_variables, std::numeric_limits<double>::infinity())) {
  if (n_ <= 0) throw std::invalid_argument("FunctionNlp: need at least one variable");
}

FunctionNlp& FunctionNlp::with_equalities(int count, VectorFn constraints,
                                          MatrixFn constraint_jacobian) {
  m_ = count;
  constraints_ = std::move(constraints);
  constraint_jacobian_ = std::move(constraint_jacobian);
  return *this;
}

FunctionNlp& FunctionNlp::with_bounds(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  if (lower.size() != n_ || upper.size() != n_) {
    throw std::invalid_argument("FunctionNlp: bound dimension mismatch");
  }
  lower_ = std::move(lower);
  upper_ = std::move(upper);
  return *this;
}

void FunctionNlp::evaluate(const Eigen::VectorXd& w, NlpEvaluation& out,
                           bool with_jacobians) const {
  out.residual = residual_(w);
  out.constraints = m_ > 0 ? constraints_(w) : Eigen::VectorXd(0);
  if (with_jacobians) {
    out.residual_jacobian = residual_jacobian_(w);
    out.constraint_jacobian = m_ > 0 ? constraint_jacobian_(w) : Eigen::MatrixXd(0, n_);
  }
}

}  // namespace mppfc
