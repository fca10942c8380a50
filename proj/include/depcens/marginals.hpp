#pragma once

#include <string_view>

#include "depcens/random.hpp"

namespace depcens {

/// Error-term families.
///
///   LambdaHazard  f(t) = e^t / (1 + lambda e^t)^(1 + 1/lambda), lambda >= 0.
///                 Hazard e^t / (1 + lambda e^t); lambda = 0 is the extreme-value
///                 (proportional hazards) law, lambda = 1 the logistic
///                 (proportional odds) law.
///   Normal        N(0, sigma^2).
///   ScaledT       Student t with `param` degrees of freedom. Used to generate
///                 misspecified data, never as a fitted margin.
enum class MarginalFamily { LambdaHazard, Normal, ScaledT };

std::string_view to_string(MarginalFamily family);

class MarginalModel {
 public:
  MarginalModel(MarginalFamily family, double param);

  static MarginalModel lambda_hazard(double lambda) {
    return {MarginalFamily::LambdaHazard, lambda};
  }
  static MarginalModel normal(double sigma) { return {MarginalFamily::Normal, sigma}; }
  static MarginalModel student_t(double dof) { return {MarginalFamily::ScaledT, dof}; }

  MarginalFamily family() const { return family_; }
  double param() const { return param_; }

 private:
  MarginalFamily family_;
  double param_;
};

/// Below this lambda the LambdaHazard family is evaluated through its
/// analytic lambda -> 0 limit.
inline constexpr double kLambdaZeroCutoff = 1e-8;

double density(const MarginalModel& m, double t);
double log_density(const MarginalModel& m, double t);
double cdf(const MarginalModel& m, double t);
/// 1 - cdf, computed without cancellation in the upper tail.
double survival(const MarginalModel& m, double t);
double quantile(const MarginalModel& m, double u);
/// Quantile at 1 - ubar, accurate when ubar is tiny.
double upper_quantile(const MarginalModel& m, double ubar);
/// d/dt log f(t). LambdaHazard only.
double log_density_derivative(const MarginalModel& m, double t);
double sample(const MarginalModel& m, Rng& rng);

/// Everything the likelihood needs at one point, sharing one exp/log pass.
struct MarginalPoint {
  double pdf = 0.0;
  double log_pdf = 0.0;
  double cdf = 0.0;
  double sf = 1.0;
  double dlog_pdf = 0.0;  // d/dt log f(t)
};
MarginalPoint evaluate(const MarginalModel& m, double t);

/// Derivatives in lambda of the lambda-hazard family at fixed t.
struct LambdaDerivatives {
  double dcdf = 0.0;
  double dlog_pdf = 0.0;
};
LambdaDerivatives lambda_derivatives(const MarginalModel& m, double t);

// Standard normal helpers.
double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double u);

}  // namespace depcens
