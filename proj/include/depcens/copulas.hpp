#pragma once

#include <string_view>
#include <utility>

#include "depcens/random.hpp"

namespace depcens {

enum class CopulaFamily { Frank, Gaussian, Gumbel };

std::string_view to_string(CopulaFamily family);
/// Accepts "frank", "gaussian", "gumbel" (case-insensitive).
CopulaFamily copula_family_from_string(std::string_view name);

/// Parameter domains: Frank r real (|r| < 1e-6 is the independence copula),
/// Gaussian -1 < r < 1, Gumbel r >= 1.
class CopulaModel {
 public:
  CopulaModel(CopulaFamily family, double r);

  CopulaFamily family() const { return family_; }
  double r() const { return r_; }

  static bool in_domain(CopulaFamily family, double r);

 private:
  CopulaFamily family_;
  double r_;
};

inline constexpr double kFrankIndependenceCutoff = 1e-6;
inline constexpr double kFrankSeriesCutoff = 1e-3;

double cdf(const CopulaModel& c, double u, double v);
/// dC/du, the conditional distribution of V given U = u.
double partial_u(const CopulaModel& c, double u, double v);
/// dC/dv, the conditional distribution of U given V = v.
double partial_v(const CopulaModel& c, double u, double v);
/// P(U > u, V > v) = 1 - u - v + C(u, v).
double survival_copula(const CopulaModel& c, double u, double v);
double copula_density(const CopulaModel& c, double u, double v);

double tau_from_r(const CopulaModel& c);
double r_from_tau(CopulaFamily family, double tau);

std::pair<double, double> sample_pair(const CopulaModel& c, Rng& rng);

/// P(N1 <= a, N2 <= b) for a standard bivariate normal with correlation r.
double bivariate_normal_cdf(double a, double b, double r);

/// A point on the unit interval carried together with its complement so
/// that both tails keep full relative precision.
struct UnitPoint {
  double value;
  double complement;

  static UnitPoint from_value(double u) { return {u, 1.0 - u}; }
};

/// Copula quantities at one point. `c1bar` is 1 - C'_1 and `c2bar` is 1 - C'_2,
/// computed directly rather than by subtraction.
struct CopulaTerms {
  double cdf = 0.0;
  double survival = 0.0;
  double c1 = 0.0;
  double c1bar = 1.0;
  double c2 = 0.0;
  double c2bar = 1.0;
  // Second partials; filled only when requested.
  double c11 = 0.0;
  double c12 = 0.0;
  double c22 = 0.0;
};

CopulaTerms evaluate_terms(const CopulaModel& c, UnitPoint u, UnitPoint v,
                           bool second_order = false);

}  // namespace depcens
