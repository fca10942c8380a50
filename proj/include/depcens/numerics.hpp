#pragma once

#include <functional>
#include <span>

#include <Eigen/Dense>

namespace depcens {

/// Sum with a fixed pairwise reduction tree; the result depends only on the
/// input order.
double pairwise_sum(std::span<const double> values);

struct MinimizeOptions {
  int max_iterations = 200;
  /// Stop once every gradient component is below this in absolute value.
  double gradient_tolerance = 1e-6;
  /// Relative finite-difference step (scaled by max(1, |x_j|)).
  double fd_step = 1e-6;
  /// Largest allowed step length in any coordinate per iteration.
  double max_step = 2.0;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Inverse-Hessian approximation carried across calls for warm starts.
struct BfgsState {
  Eigen::MatrixXd inverse_hessian;
  bool valid() const { return inverse_hessian.size() > 0; }
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
/// Gradient at x given f(x). May add to *evaluations. Non-finite entries
/// mark an unresolvable gradient.
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, double fx, int* evaluations)>;

/// Central finite-difference gradient. Falls back to one-sided differences,
/// then to smaller steps, when a stencil point is infeasible (non-finite).
/// Components that cannot be resolved are NaN.
Eigen::VectorXd finite_difference_gradient(const Objective& f, const Eigen::VectorXd& x,
                                           double fx, double relative_step,
                                           int* evaluations = nullptr);

/// Quasi-Newton (BFGS) minimization with a finite-difference gradient and a
/// backtracking Armijo line search. Non-finite objective values mark
/// infeasible points; the line search backs away from them.
MinimizeResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                             const MinimizeOptions& options = {}, BfgsState* state = nullptr);
/// Same with a caller-supplied gradient.
MinimizeResult minimize_bfgs(const Objective& f, const Gradient& grad, const Eigen::VectorXd& x0,
                             const MinimizeOptions& options = {}, BfgsState* state = nullptr);

}  // namespace depcens
