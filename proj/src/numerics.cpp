#include "depcens/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace depcens {

namespace {

double pairwise_sum_range(const double* p, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_range(p, half) + pairwise_sum_range(p + half, n - half);
}

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_range(values.data(), values.size());
}

Eigen::VectorXd finite_difference_gradient(const Objective& f, const Eigen::VectorXd& x,
                                           double fx, double relative_step, int* evaluations) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd g(n);
  int evals = 0;
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    double h = relative_step * std::max(1.0, std::abs(x[j]));
    double gj = std::numeric_limits<double>::quiet_NaN();
    for (int attempt = 0; attempt < 4 && !std::isfinite(gj); ++attempt, h *= 0.1) {
      probe[j] = x[j] + h;
      const double fp = f(probe);
      probe[j] = x[j] - h;
      const double fm = f(probe);
      probe[j] = x[j];
      evals += 2;
      if (std::isfinite(fp) && std::isfinite(fm)) {
        gj = (fp - fm) / (2.0 * h);
      } else if (std::isfinite(fp)) {
        gj = (fp - fx) / h;
      } else if (std::isfinite(fm)) {
        gj = (fx - fm) / h;
      }
    }
    g[j] = gj;
  }
  if (evaluations) *evaluations += evals;
  return g;
}

MinimizeResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                             const MinimizeOptions& options, BfgsState* state) {
  const Gradient fd = [&](const Eigen::VectorXd& x, double fx, int* evaluations) {
    return finite_difference_gradient(f, x, fx, options.fd_step, evaluations);
  };
  return minimize_bfgs(f, fd, x0, options, state);
}

MinimizeResult minimize_bfgs(const Objective& f, const Gradient& grad, const Eigen::VectorXd& x0,
                             const MinimizeOptions& options, BfgsState* state) {
  const Eigen::Index n = x0.size();
  MinimizeResult res;
  res.x = x0;
  res.value = f(x0);
  res.evaluations = 1;
  if (!std::isfinite(res.value)) {
    res.gradient = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    return res;
  }
  res.gradient = grad(res.x, res.value, &res.evaluations);
  if (!res.gradient.allFinite()) return res;

  Eigen::MatrixXd hinv;
  bool fresh = true;
  if (state && state->valid() && state->inverse_hessian.rows() == n) {
    hinv = state->inverse_hessian;
    fresh = false;
  } else {
    hinv = Eigen::MatrixXd::Identity(n, n);
  }

  int consecutive_resets = 0;
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (max_abs(res.gradient) < options.gradient_tolerance) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = -hinv * res.gradient;
    double slope = res.gradient.dot(dir);
    if (!(slope < 0.0) || !dir.allFinite()) {
      hinv.setIdentity();
      fresh = true;
      dir = -res.gradient;
      slope = res.gradient.dot(dir);
    }
    const double longest = max_abs(dir);
    double step = 1.0;
    if (fresh) step = std::min(1.0, 0.1 / std::max(longest, 1e-300));
    if (step * longest > options.max_step) step = options.max_step / longest;

    Eigen::VectorXd x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = res.x + step * dir;
      f_new = f(x_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!fresh && consecutive_resets == 0) {
        // Stale curvature; retry once along steepest descent.
        hinv.setIdentity();
        fresh = true;
        ++consecutive_resets;
        continue;
      }
      // No further decrease is resolvable at finite-difference precision.
      res.converged = max_abs(res.gradient) < 100.0 * options.gradient_tolerance;
      break;
    }
    consecutive_resets = 0;

    const Eigen::VectorXd g_new = grad(x_new, f_new, &res.evaluations);
    if (!g_new.allFinite()) {
      res.x = x_new;
      res.value = f_new;
      res.gradient = g_new;
      break;
    }
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - res.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) {
        hinv = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(n, n);
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = hinv * y;
      hinv += ((sy + y.dot(hy)) * rho * rho) * (s * s.transpose()) -
              rho * (hy * s.transpose() + s * hy.transpose());
    }
    const double improvement = res.value - f_new;
    res.x = x_new;
    res.value = f_new;
    res.gradient = g_new;
    if (improvement <= 1e-14 * (1.0 + std::abs(f_new)) && max_abs(s) < 1e-12) {
      res.converged = max_abs(res.gradient) < 100.0 * options.gradient_tolerance;
      break;
    }
  }
  if (state && !fresh) state->inverse_hessian = hinv;
  return res;
}

}  // namespace depcens
