#include "depcens/marginals.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>

#include "depcens/core.hpp"

namespace depcens {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818684758586311649;

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

bool lambda_is_zero(double lambda) { return lambda < kLambdaZeroCutoff; }

// log(1 + lambda e^t)
double lambda_log_term(double lambda, double t) { return softplus(t + std::log(lambda)); }

boost::math::students_t_distribution<double> t_dist(double dof) {
  return boost::math::students_t_distribution<double>(dof);
}

// Acklam's rational approximation, relative error ~1e-9 before refinement.
double acklam(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

void require_open_unit(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw InvalidInput("quantile argument must lie in (0, 1)");
  }
}

}  // namespace

std::string_view to_string(MarginalFamily family) {
  switch (family) {
    case MarginalFamily::LambdaHazard:
      return "lambda_hazard";
    case MarginalFamily::Normal:
      return "normal";
    case MarginalFamily::ScaledT:
      return "student_t";
  }
  return "unknown";
}

MarginalModel::MarginalModel(MarginalFamily family, double param)
    : family_(family), param_(param) {
  if (!std::isfinite(param)) {
    throw InvalidInput("marginal parameter must be finite");
  }
  if (family == MarginalFamily::LambdaHazard ? param < 0.0 : param <= 0.0) {
    throw InvalidInput("marginal parameter outside its domain");
  }
}

// ---------------------------------------------------------------------------
// Standard normal

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_quantile(double u) {
  if (u <= 0.0) return -INFINITY;
  if (u >= 1.0) return INFINITY;
  if (u > 0.5) return -normal_quantile(1.0 - u);
  double x = acklam(u);
  // Two Halley steps against erfc take the error to rounding level.
  for (int it = 0; it < 2; ++it) {
    const double e = normal_cdf(x) - u;
    const double step = e / normal_pdf(x);
    x -= step / (1.0 + 0.5 * x * step);
  }
  return x;
}

// ---------------------------------------------------------------------------

MarginalPoint evaluate(const MarginalModel& m, double t) {
  MarginalPoint out;
  const double p = m.param();
  switch (m.family()) {
    case MarginalFamily::LambdaHazard: {
      if (lambda_is_zero(p)) {
        const double e = std::exp(t);
        out.log_pdf = t - e;
        out.pdf = std::exp(out.log_pdf);
        out.sf = std::exp(-e);
        out.cdf = -std::expm1(-e);
        out.dlog_pdf = 1.0 - e;
      } else {
        const double log_term = lambda_log_term(p, t);
        out.log_pdf = t - (1.0 + 1.0 / p) * log_term;
        out.pdf = std::exp(out.log_pdf);
        out.sf = std::exp(-log_term / p);
        out.cdf = -std::expm1(-log_term / p);
        out.dlog_pdf = 1.0 - (1.0 + p) / (std::exp(-t) + p);
      }
      break;
    }
    case MarginalFamily::Normal: {
      const double x = t / p;
      out.pdf = normal_pdf(x) / p;
      out.log_pdf = std::log(out.pdf);
      out.cdf = normal_cdf(x);
      out.sf = normal_cdf(-x);
      out.dlog_pdf = -t / (p * p);
      break;
    }
    case MarginalFamily::ScaledT: {
      const auto dist = t_dist(p);
      out.pdf = boost::math::pdf(dist, t);
      out.log_pdf = std::log(out.pdf);
      out.cdf = boost::math::cdf(dist, t);
      out.sf = boost::math::cdf(boost::math::complement(dist, t));
      out.dlog_pdf = -(p + 1.0) * t / (p + t * t);
      break;
    }
  }
  return out;
}

LambdaDerivatives lambda_derivatives(const MarginalModel& m, double t) {
  if (m.family() != MarginalFamily::LambdaHazard) {
    throw InvalidInput("lambda derivatives are only defined for the lambda-hazard family");
  }
  const double p = m.param();
  // d log S / d lambda = [log(1 + x) - x / (1 + x)] / lambda^2 with x = lambda e^t.
  double dlog_sf;
  double sf;
  double hazard;  // e^t / (1 + x)
  if (lambda_is_zero(p)) {
    const double e = std::exp(t);
    dlog_sf = 0.5 * e * e;
    sf = std::exp(-e);
    hazard = e;
  } else {
    const double log_term = lambda_log_term(p, t);
    const double inv = 1.0 / (std::exp(-t) + p);
    const double x = p * std::exp(t);
    if (x < 1e-3) {
      const double e = std::exp(t);
      dlog_sf = e * e * (0.5 - x * (2.0 / 3.0 - x * (0.75 - 0.8 * x)));
    } else {
      dlog_sf = (log_term - p * inv) / (p * p);
    }
    sf = std::exp(-log_term / p);
    hazard = inv;
  }
  return {-sf * dlog_sf, dlog_sf - hazard};
}

double density(const MarginalModel& m, double t) { return evaluate(m, t).pdf; }

double log_density(const MarginalModel& m, double t) {
  const double p = m.param();
  if (m.family() == MarginalFamily::LambdaHazard) {
    if (lambda_is_zero(p)) return t - std::exp(t);
    return t - (1.0 + 1.0 / p) * lambda_log_term(p, t);
  }
  return std::log(density(m, t));
}

double cdf(const MarginalModel& m, double t) { return evaluate(m, t).cdf; }

double survival(const MarginalModel& m, double t) { return evaluate(m, t).sf; }

double quantile(const MarginalModel& m, double u) {
  require_open_unit(u);
  const double p = m.param();
  switch (m.family()) {
    case MarginalFamily::LambdaHazard: {
      const double cum_hazard = -std::log1p(-u);
      if (lambda_is_zero(p)) return std::log(cum_hazard);
      return std::log(std::expm1(p * cum_hazard) / p);
    }
    case MarginalFamily::Normal:
      return p * normal_quantile(u);
    case MarginalFamily::ScaledT:
      return boost::math::quantile(t_dist(p), u);
  }
  return 0.0;
}

double upper_quantile(const MarginalModel& m, double ubar) {
  require_open_unit(ubar);
  const double p = m.param();
  switch (m.family()) {
    case MarginalFamily::LambdaHazard: {
      const double cum_hazard = -std::log(ubar);
      if (lambda_is_zero(p)) return std::log(cum_hazard);
      return std::log(std::expm1(p * cum_hazard) / p);
    }
    case MarginalFamily::Normal:
      return -p * normal_quantile(ubar);
    case MarginalFamily::ScaledT:
      return boost::math::quantile(boost::math::complement(t_dist(p), ubar));
  }
  return 0.0;
}

double log_density_derivative(const MarginalModel& m, double t) {
  if (m.family() != MarginalFamily::LambdaHazard) {
    throw InvalidInput("log-density derivative is only provided for the lambda-hazard family");
  }
  return evaluate(m, t).dlog_pdf;
}

double sample(const MarginalModel& m, Rng& rng) { return quantile(m, uniform_open(rng)); }

}  // namespace depcens
