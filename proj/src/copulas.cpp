#include "depcens/copulas.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "depcens/core.hpp"
#include "depcens/marginals.hpp"

namespace depcens {

namespace {

constexpr double kPi = std::numbers::pi;

void require_unit(double u, double v) {
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
    throw InvalidInput("copula arguments must lie in [0, 1]");
  }
}

bool is_independence(const CopulaModel& c) {
  switch (c.family()) {
    case CopulaFamily::Frank:
      return std::abs(c.r()) < kFrankIndependenceCutoff;
    case CopulaFamily::Gaussian:
      return c.r() == 0.0;
    case CopulaFamily::Gumbel:
      return c.r() == 1.0;
  }
  return false;
}

// Frank copula to second order in r around independence; r = 0 gives the
// product copula exactly.
CopulaTerms frank_series(double r, UnitPoint u, UnitPoint v) {
  const auto p = [](UnitPoint a) { return a.value * a.complement; };
  const auto dp = [](UnitPoint a) { return a.complement - a.value; };
  const auto q = [](UnitPoint a) { return a.value * a.complement * (2.0 * a.value - 1.0); };
  const auto dq = [](UnitPoint a) { return -6.0 * a.value * a.value + 6.0 * a.value - 1.0; };
  const auto d2q = [](UnitPoint a) { return 6.0 - 12.0 * a.value; };
  const double k1 = 0.5 * r;
  const double k2 = r * r / 12.0;

  CopulaTerms t;
  const double coupling = k1 * p(u) * p(v) + k2 * q(u) * q(v);
  t.cdf = u.value * v.value + coupling;
  t.survival = u.complement * v.complement + coupling;
  const double d1 = k1 * dp(u) * p(v) + k2 * dq(u) * q(v);
  const double d2 = k1 * p(u) * dp(v) + k2 * q(u) * dq(v);
  t.c1 = v.value + d1;
  t.c1bar = v.complement - d1;
  t.c2 = u.value + d2;
  t.c2bar = u.complement - d2;
  t.c11 = -r * p(v) + k2 * d2q(u) * q(v);
  t.c22 = -r * p(u) + k2 * q(u) * d2q(v);
  t.c12 = 1.0 + k1 * dp(u) * dp(v) + k2 * dq(u) * dq(v);
  return t;
}

CopulaTerms frank_terms(double r, UnitPoint u, UnitPoint v) {
  if (std::abs(r) < kFrankIndependenceCutoff) return frank_series(0.0, u, v);
  if (std::abs(r) < kFrankSeriesCutoff) return frank_series(r, u, v);
  const double a = std::expm1(-r * u.value);
  const double abar = std::expm1(-r * u.complement);
  const double b = std::expm1(-r * v.value);
  const double bbar = std::expm1(-r * v.complement);
  const double c = std::expm1(-r);
  const double den = c + a * b;
  const double den2 = den * den;

  CopulaTerms t;
  // Frank is radially symmetric: P(U > u, V > v) = C(1 - u, 1 - v). Each
  // form is evaluated directly only on the half where it does not cancel.
  if (u.value + v.value <= 1.0) {
    t.cdf = -std::log1p(a * b / c) / r;
    t.survival = (u.complement - v.value) + t.cdf;
  } else {
    t.survival = -std::log1p(abar * bbar / c) / r;
    t.cdf = (u.value - v.complement) + t.survival;
  }
  t.c1 = (a + 1.0) * b / den;
  t.c1bar = (b + 1.0) * bbar / den;
  t.c2 = (b + 1.0) * a / den;
  t.c2bar = (a + 1.0) * abar / den;
  t.c11 = -r * (a + 1.0) * b * (b + 1.0) * bbar / den2;
  t.c12 = -r * (a + 1.0) * (b + 1.0) * c / den2;
  t.c22 = -r * (b + 1.0) * a * (a + 1.0) * abar / den2;
  return t;
}

double std_normal_quantile(UnitPoint u) {
  return u.value < 0.5 ? normal_quantile(u.value) : -normal_quantile(u.complement);
}

CopulaTerms gaussian_terms(double rho, UnitPoint u, UnitPoint v) {
  if (rho == 0.0) return frank_series(0.0, u, v);
  const double x = std_normal_quantile(u);
  const double y = std_normal_quantile(v);
  const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
  const double z1 = (y - rho * x) / s;
  const double z2 = (x - rho * y) / s;

  CopulaTerms t;
  t.cdf = bivariate_normal_cdf(x, y, rho);
  t.survival = bivariate_normal_cdf(-x, -y, rho);
  t.c1 = normal_cdf(z1);
  t.c1bar = normal_cdf(-z1);
  t.c2 = normal_cdf(z2);
  t.c2bar = normal_cdf(-z2);
  // phi(z)/phi(x) in log space keeps the ratio finite deep in the tails.
  t.c11 = -rho / s * std::exp(0.5 * (x * x - z1 * z1));
  t.c22 = -rho / s * std::exp(0.5 * (y * y - z2 * z2));
  t.c12 = std::exp(0.5 * (y * y - z1 * z1)) / s;
  return t;
}

CopulaTerms gumbel_terms(double theta, UnitPoint u, UnitPoint v) {
  if (theta == 1.0) return frank_series(0.0, u, v);
  // x = -log u, y = -log v, each from whichever representation is exact.
  const double x = u.value < 0.5 ? -std::log(u.value) : -std::log1p(-u.complement);
  const double y = v.value < 0.5 ? -std::log(v.value) : -std::log1p(-v.complement);
  const double lx = std::log(x);
  const double ly = std::log(y);
  const double ax = theta * lx;
  const double ay = theta * ly;
  const double log_a = std::max(ax, ay) + std::log1p(std::exp(-std::abs(ax - ay)));
  const double s = std::exp(log_a / theta);

  CopulaTerms t;
  t.cdf = std::exp(-s);
  t.survival = std::max(0.0, u.complement + v.complement + std::expm1(-s));
  // log C'_1 = -s + (1/theta - 1) log A + (theta - 1) log x - log u, with log u = -x.
  const double shared = -s + (1.0 / theta - 1.0) * log_a;
  const double log_c1 = shared + (theta - 1.0) * lx + x;
  const double log_c2 = shared + (theta - 1.0) * ly + y;
  t.c1 = std::exp(log_c1);
  t.c1bar = -std::expm1(log_c1);
  t.c2 = std::exp(log_c2);
  t.c2bar = -std::expm1(log_c2);
  const double shape = s + theta - 1.0;
  t.c12 = std::exp(log_c1 + log_c2 + s) * shape / s;
  t.c11 = std::exp(log_c1 + x) *
          (std::exp((theta - 1.0) * lx - log_a) * shape - (theta - 1.0) / x - 1.0);
  t.c22 = std::exp(log_c2 + y) *
          (std::exp((theta - 1.0) * ly - log_a) * shape - (theta - 1.0) / y - 1.0);
  return t;
}

// lim C'_1(u, v) as u -> 0 (at_one = false) or u -> 1 (at_one = true).
double conditional_edge_limit(const CopulaModel& c, double v, bool at_one) {
  if (is_independence(c)) return v;
  switch (c.family()) {
    case CopulaFamily::Frank: {
      const double r = c.r();
      const double num = std::expm1(-r * v);
      const double den = std::expm1(-r);
      if (!at_one) return num / den;
      return std::exp(-r * (1.0 - v)) * num / den;
    }
    case CopulaFamily::Gaussian:
      return (c.r() > 0.0) != at_one ? 1.0 : 0.0;
    case CopulaFamily::Gumbel:
      return at_one ? 0.0 : 1.0;
  }
  return v;
}

CopulaTerms boundary_terms(const CopulaModel& c, UnitPoint u, UnitPoint v) {
  CopulaTerms t;
  const bool u0 = u.value <= 0.0;
  const bool u1 = u.complement <= 0.0;
  const bool v0 = v.value <= 0.0;
  const bool v1 = v.complement <= 0.0;

  if (u0 || v0) {
    t.cdf = 0.0;
  } else if (u1) {
    t.cdf = v.value;
  } else {
    t.cdf = u.value;
  }
  if (u1 || v1) {
    t.survival = 0.0;
  } else if (u0) {
    t.survival = v.complement;
  } else {
    t.survival = u.complement;
  }

  if (v0) {
    t.c1 = 0.0;
  } else if (v1) {
    t.c1 = 1.0;
  } else {
    t.c1 = conditional_edge_limit(c, v.value, u1);
  }
  if (u0) {
    t.c2 = 0.0;
  } else if (u1) {
    t.c2 = 1.0;
  } else {
    t.c2 = conditional_edge_limit(c, u.value, v1);
  }
  t.c1bar = 1.0 - t.c1;
  t.c2bar = 1.0 - t.c2;
  return t;
}

}  // namespace

std::string_view to_string(CopulaFamily family) {
  switch (family) {
    case CopulaFamily::Frank:
      return "frank";
    case CopulaFamily::Gaussian:
      return "gaussian";
    case CopulaFamily::Gumbel:
      return "gumbel";
  }
  return "unknown";
}

CopulaFamily copula_family_from_string(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "frank") return CopulaFamily::Frank;
  if (lower == "gaussian" || lower == "normal") return CopulaFamily::Gaussian;
  if (lower == "gumbel") return CopulaFamily::Gumbel;
  throw InvalidInput("unknown copula family '" + std::string(name) + "'");
}

bool CopulaModel::in_domain(CopulaFamily family, double r) {
  if (!std::isfinite(r)) return false;
  switch (family) {
    case CopulaFamily::Frank:
      return true;
    case CopulaFamily::Gaussian:
      return r > -1.0 && r < 1.0;
    case CopulaFamily::Gumbel:
      return r >= 1.0;
  }
  return false;
}

CopulaModel::CopulaModel(CopulaFamily family, double r) : family_(family), r_(r) {
  if (!in_domain(family, r)) {
    throw InvalidInput("copula parameter outside the family's domain");
  }
}

CopulaTerms evaluate_terms(const CopulaModel& c, UnitPoint u, UnitPoint v, bool second_order) {
  if (u.value <= 0.0 || u.complement <= 0.0 || v.value <= 0.0 || v.complement <= 0.0) {
    return boundary_terms(c, u, v);
  }
  CopulaTerms t;
  switch (c.family()) {
    case CopulaFamily::Frank:
      t = frank_terms(c.r(), u, v);
      break;
    case CopulaFamily::Gaussian:
      t = gaussian_terms(c.r(), u, v);
      break;
    case CopulaFamily::Gumbel:
      t = gumbel_terms(c.r(), u, v);
      break;
  }
  if (!second_order) {
    t.c11 = t.c12 = t.c22 = 0.0;
  }
  return t;
}

double cdf(const CopulaModel& c, double u, double v) {
  require_unit(u, v);
  return evaluate_terms(c, UnitPoint::from_value(u), UnitPoint::from_value(v)).cdf;
}

double partial_u(const CopulaModel& c, double u, double v) {
  require_unit(u, v);
  return evaluate_terms(c, UnitPoint::from_value(u), UnitPoint::from_value(v)).c1;
}

double partial_v(const CopulaModel& c, double u, double v) {
  require_unit(u, v);
  return evaluate_terms(c, UnitPoint::from_value(u), UnitPoint::from_value(v)).c2;
}

double survival_copula(const CopulaModel& c, double u, double v) {
  require_unit(u, v);
  return evaluate_terms(c, UnitPoint::from_value(u), UnitPoint::from_value(v)).survival;
}

double copula_density(const CopulaModel& c, double u, double v) {
  require_unit(u, v);
  return evaluate_terms(c, UnitPoint::from_value(u), UnitPoint::from_value(v), true).c12;
}

// ---------------------------------------------------------------------------
// Kendall's tau

namespace {

// Debye-type integral D(r) = int_0^r t / (e^t - 1) dt.
double debye_integral(double r) {
  const auto integrand = [](double t) {
    return std::abs(t) < 1e-12 ? 1.0 - 0.5 * t : t / std::expm1(t);
  };
  const double lo = std::min(0.0, r);
  const double hi = std::max(0.0, r);
  double err = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, lo, hi, 15, 1e-14, &err);
  return r >= 0.0 ? value : -value;
}

double frank_tau(double r) {
  if (std::abs(r) < 1e-2) {
    const double r2 = r * r;
    return r * (1.0 / 9.0 - r2 / 900.0 + r2 * r2 / 52920.0);
  }
  return 1.0 - 4.0 / r + 4.0 / (r * r) * debye_integral(r);
}

}  // namespace

double tau_from_r(const CopulaModel& c) {
  switch (c.family()) {
    case CopulaFamily::Frank:
      return frank_tau(c.r());
    case CopulaFamily::Gaussian:
      return 2.0 * std::asin(c.r()) / kPi;
    case CopulaFamily::Gumbel:
      return 1.0 - 1.0 / c.r();
  }
  return 0.0;
}

double r_from_tau(CopulaFamily family, double tau) {
  if (!std::isfinite(tau)) throw InvalidInput("tau must be finite");
  switch (family) {
    case CopulaFamily::Frank: {
      if (!(std::abs(tau) < 1.0)) throw InvalidInput("Frank tau must lie in (-1, 1)");
      if (tau == 0.0) return 0.0;
      const double target = std::abs(tau);
      double hi = 1.0;
      while (frank_tau(hi) < target) {
        hi *= 2.0;
        if (hi > 1e6) throw InvalidInput("Frank tau too close to 1");
      }
      std::uintmax_t max_iter = 200;
      const auto [a, b] = boost::math::tools::toms748_solve(
          [target](double r) { return frank_tau(r) - target; }, 0.0, hi, -target,
          frank_tau(hi) - target, boost::math::tools::eps_tolerance<double>(50), max_iter);
      const double root = 0.5 * (a + b);
      return tau > 0.0 ? root : -root;
    }
    case CopulaFamily::Gaussian:
      if (!(std::abs(tau) < 1.0)) throw InvalidInput("Gaussian tau must lie in (-1, 1)");
      return std::sin(0.5 * kPi * tau);
    case CopulaFamily::Gumbel:
      if (!(tau >= 0.0 && tau < 1.0)) throw InvalidInput("Gumbel tau must lie in [0, 1)");
      return 1.0 / (1.0 - tau);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Sampling

std::pair<double, double> sample_pair(const CopulaModel& c, Rng& rng) {
  const double u = uniform_open(rng);
  const double w = uniform_open(rng);
  if (is_independence(c)) return {u, w};

  double v = w;
  switch (c.family()) {
    case CopulaFamily::Frank: {
      // Closed-form inverse of v -> C'_1(u, v).
      const double r = c.r();
      const double a = std::expm1(-r * u);
      const double b = w * std::expm1(-r) / (1.0 + a * (1.0 - w));
      v = -std::log1p(b) / r;
      break;
    }
    case CopulaFamily::Gaussian: {
      const double rho = c.r();
      const double z1 = normal_quantile(u);
      const double z2 = normal_quantile(w);
      v = normal_cdf(rho * z1 + std::sqrt((1.0 - rho) * (1.0 + rho)) * z2);
      break;
    }
    case CopulaFamily::Gumbel: {
      const UnitPoint up = UnitPoint::from_value(u);
      const auto f = [&](double vv) {
        return evaluate_terms(c, up, UnitPoint::from_value(vv)).c1 - w;
      };
      std::uintmax_t max_iter = 200;
      const auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-10; };
      const auto [lo, hi] =
          boost::math::tools::toms748_solve(f, 0.0, 1.0, -w, 1.0 - w, tol, max_iter);
      v = 0.5 * (lo + hi);
      break;
    }
  }
  constexpr double tiny = std::numeric_limits<double>::min();
  v = std::clamp(v, tiny, std::nextafter(1.0, 0.0));
  return {u, v};
}

// ---------------------------------------------------------------------------
// Bivariate normal: Genz's BVNU. Drezner-Wesolowsky Gauss-Legendre rules for
// |r| < 0.925, an asymptotic expansion in 1 - r^2 above that.

namespace {

double bvnu(double dh, double dk, double r) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (dh == inf || dk == inf) return 0.0;
  if (dh == -inf) return dk == -inf ? 1.0 : normal_cdf(-dk);
  if (dk == -inf) return normal_cdf(-dh);
  if (r == 0.0) return normal_cdf(-dh) * normal_cdf(-dk);

  static constexpr double w6[] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
  static constexpr double x6[] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
  static constexpr double w12[] = {0.04717533638651177, 0.1069393259953183,
                                   0.1600783285433464,  0.2031674267230659,
                                   0.2334925365383547,  0.2491470458134029};
  static constexpr double x12[] = {0.9815606342467191, 0.9041172563704750,
                                   0.7699026741943050, 0.5873179542866171,
                                   0.3678314989981802, 0.1252334085114692};
  static constexpr double w20[] = {0.01761400713915212, 0.04060142980038694,
                                   0.06267204833410906, 0.08327674157670475,
                                   0.1019301198172404,  0.1181945319615184,
                                   0.1316886384491766,  0.1420961093183821,
                                   0.1491729864726037,  0.1527533871307259};
  static constexpr double x20[] = {0.9931285991850949, 0.9639719272779138,
                                   0.9122344282513259, 0.8391169718222188,
                                   0.7463319064601508, 0.6360536807265150,
                                   0.5108670019508271, 0.3737060887154196,
                                   0.2277858511416451, 0.07652652113349733};
  const double* w;
  const double* x;
  int lg;
  if (std::abs(r) < 0.3) {
    w = w6;
    x = x6;
    lg = 3;
  } else if (std::abs(r) < 0.75) {
    w = w12;
    x = x12;
    lg = 6;
  } else {
    w = w20;
    x = x20;
    lg = 10;
  }

  constexpr double tp = 2.0 * kPi;
  double h = dh;
  double k = dk;
  double hk = h * k;
  double bvn = 0.0;

  if (std::abs(r) < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = 0.5 * std::asin(r);
    for (int i = 0; i < lg; ++i) {
      for (double sign : {-1.0, 1.0}) {
        const double sn = std::sin(asr * (1.0 + sign * x[i]));
        bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    return std::clamp(bvn * asr / tp + normal_cdf(-h) * normal_cdf(-k), 0.0, 1.0);
  }

  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 80.0;
    double asr = -0.5 * (bs / as + hk);
    if (asr > -100.0) {
      bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
    }
    if (hk > -100.0) {
      const double b = std::sqrt(bs);
      const double sp = std::sqrt(tp) * normal_cdf(-b / a);
      bvn -= std::exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
    }
    a *= 0.5;
    double sum = 0.0;
    for (int i = 0; i < lg; ++i) {
      for (double sign : {-1.0, 1.0}) {
        const double xs = std::pow(a * (1.0 + sign * x[i]), 2);
        asr = -0.5 * (bs / xs + hk);
        if (asr > -100.0) {
          const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
          const double rs = std::sqrt(1.0 - xs);
          const double ep = std::exp(-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
          sum += w[i] * std::exp(asr) * (sp - ep);
        }
      }
    }
    bvn = (a * sum - bvn) / tp;
  }
  if (r > 0.0) {
    bvn += normal_cdf(-std::max(h, k));
  } else if (h >= k) {
    bvn = -bvn;
  } else {
    const double l = h < 0.0 ? normal_cdf(k) - normal_cdf(h) : normal_cdf(-h) - normal_cdf(-k);
    bvn = l - bvn;
  }
  return std::clamp(bvn, 0.0, 1.0);
}

}  // namespace

double bivariate_normal_cdf(double a, double b, double r) {
  if (!(r > -1.0 && r < 1.0)) throw InvalidInput("correlation must lie in (-1, 1)");
  if (std::isnan(a) || std::isnan(b)) throw InvalidInput("bivariate normal bound is NaN");
  return bvnu(-a, -b, r);
}

}  // namespace depcens
