#include <doctest.h>

#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "depcens/estimator.hpp"
#include "depcens/likelihood.hpp"
#include "depcens/simulate.hpp"

using namespace depcens;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ModelParams theta(double bx, double ew, double lt, double lc, double r) {
  ModelParams p;
  p.beta = {bx};
  p.eta = {ew};
  p.lambda_t = lt;
  p.lambda_c = lc;
  p.r = r;
  return p;
}

Observation single(double z, int delta, int xi) {
  Observation o;
  o.z = z;
  o.delta = delta;
  o.xi = xi;
  o.x = {1.0};
  o.w = {1.0};
  return o;
}

ModelSpec frank() { return ModelSpec{}; }

ModelSpec family(CopulaFamily f) {
  ModelSpec s;
  s.copula = f;
  return s;
}

// H(1) = 1 with a jump of 0.1 at 1.
StepTransform unit_h() { return StepTransform({{0.5, 0.9}, {1.0, 0.1}}, {}); }

// Brute-force log-likelihood from the copula and marginal primitives.
double brute_force(const Dataset& data, const ModelParams& p, const ModelSpec& spec,
                   const StepTransform& h) {
  const CopulaModel c(spec.copula, p.r);
  const auto mt = MarginalModel::lambda_hazard(p.lambda_t);
  const auto mc = MarginalModel::lambda_hazard(p.lambda_c);
  double product = 1.0;
  double log_scale = 0.0;
  for (const auto& o : data) {
    const double x1 = h(o.z) - dot(o.x, p.beta);
    const double x2 = h(o.z) - dot(o.w, p.eta);
    const double u = cdf(mt, x1);
    const double v = cdf(mc, x2);
    double f;
    if (o.delta == 1) {
      f = density(mt, x1) * (1.0 - partial_u(c, u, v)) * h.jump_at(o.z);
    } else if (o.xi == 1) {
      f = density(mc, x2) * (1.0 - partial_v(c, u, v)) * h.jump_at(o.z);
    } else {
      f = survival_copula(c, u, v);
    }
    product *= f;
    // keep the product in range
    const double e = std::floor(std::log(product));
    product /= std::exp(e);
    log_scale += e;
  }
  return std::log(product) + log_scale;
}

Dataset small_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return generate_dataset(scenario1_model(TransformKind::YeoJohnson), n, rng).data;
}

double yj_derivative(double alpha, double z) {
  return z >= 0.0 ? std::pow(z + 1.0, alpha - 1.0) : std::pow(1.0 - z, 1.0 - alpha);
}

}  // namespace

TEST_CASE("subdensities against high-precision references") {
  // Frank r = 10, lambda_T = 0.5, lambda_C = 0.8, H(z) = 1, x'b = 0.5, w'e = 0.2, H{z} = 0.1
  const ModelParams p = theta(0.5, 0.2, 0.5, 0.8, 10.0);
  const StepTransform h = unit_h();
  CHECK(h(1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(log_subdensity_event(single(1.0, 1, 0), p, frank(), h) ==
        doctest::Approx(-4.4504943714863384).epsilon(1e-10));
  CHECK(log_subdensity_depcens(single(1.0, 0, 1), p, frank(), h) ==
        doctest::Approx(-4.4154756680348955).epsilon(1e-10));
  CHECK(log_subdensity_admin(single(1.0, 0, 0), p, frank(), h) ==
        doctest::Approx(-1.5032864908294570).epsilon(1e-10));
  CHECK(omega(0.5, 0.8, p, frank()) == doctest::Approx(0.23761597347112898).epsilon(1e-10));
  const BoundModel m = BoundModel::bind(p, frank());
  CHECK(psi_point(m, 0.5, 0.8, true) == doctest::Approx(0.45108113627300266).epsilon(1e-9));
  CHECK(psi_point(m, 0.5, 0.8, false) == doctest::Approx(1.0684265214747880).epsilon(1e-9));
}

TEST_CASE("jump term is additive") {
  const ModelParams p = theta(0.5, 0.2, 0.5, 0.8, 10.0);
  const StepTransform half({{0.5, 0.95}, {1.0, 0.05}}, {});
  const double full = log_subdensity_event(single(1.0, 1, 0), p, frank(), unit_h());
  const double halved = log_subdensity_event(single(1.0, 1, 0), p, frank(), half);
  CHECK(full - halved == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(log_subdensity_event(single(0.7, 1, 0), p, frank(), unit_h()), InvalidState);
  CHECK_THROWS_AS(log_subdensity_event(single(1.0, 0, 0), p, frank(), unit_h()), InvalidInput);
}

TEST_CASE("independence reductions") {
  const ModelParams p = theta(0.5, 0.2, 0.5, 0.8, 1e-9);
  const auto mt = MarginalModel::lambda_hazard(0.5);
  const auto mc = MarginalModel::lambda_hazard(0.8);
  const StepTransform h = unit_h();
  CHECK(log_subdensity_event(single(1.0, 1, 0), p, frank(), h) ==
        doctest::Approx(log_density(mt, 0.5) + std::log(survival(mc, 0.8)) + std::log(0.1)).epsilon(1e-12));
  CHECK(log_subdensity_depcens(single(1.0, 0, 1), p, frank(), h) ==
        doctest::Approx(log_density(mc, 0.8) + std::log(survival(mt, 0.5)) + std::log(0.1)).epsilon(1e-12));
  CHECK(log_subdensity_admin(single(1.0, 0, 0), p, frank(), h) ==
        doctest::Approx(std::log(survival(mt, 0.5) * survival(mc, 0.8))).epsilon(1e-12));
  CHECK(omega(0.5, 0.8, p, frank()) ==
        doctest::Approx(density(mt, 0.5) * survival(mc, 0.8) + density(mc, 0.8) * survival(mt, 0.5))
            .epsilon(1e-12));
  const BoundModel m = BoundModel::bind(p, frank());
  for (double x : {-3.0, 0.0, 1.5}) {
    const double hazards = density(mt, x) / survival(mt, x) + density(mc, x - 0.3) / survival(mc, x - 0.3);
    CHECK(psi_point(m, x, x - 0.3, false) == doctest::Approx(hazards).epsilon(1e-10));
  }
}

TEST_CASE("event and dependent-censoring terms are symmetric") {
  for (auto f : {CopulaFamily::Frank, CopulaFamily::Gaussian, CopulaFamily::Gumbel}) {
    const double r = f == CopulaFamily::Frank ? 6.0 : f == CopulaFamily::Gaussian ? 0.5 : 1.8;
    const ModelParams p = theta(0.3, 0.3, 0.7, 0.7, r);
    CHECK(log_subdensity_event(single(1.0, 1, 0), p, family(f), unit_h()) ==
          doctest::Approx(log_subdensity_depcens(single(1.0, 0, 1), p, family(f), unit_h())).epsilon(1e-12));
  }
}

TEST_CASE("administrative term limits") {
  const ModelParams p = theta(0.5, 0.2, 0.5, 0.8, 10.0);
  const BoundModel m = BoundModel::bind(p, frank());
  CHECK(std::abs(log_admin_term(m, -50.0, -50.0)) < 1e-12);
  CHECK(log_admin_term(m, -50.0, -50.0) <= 0.0);
  CHECK(log_admin_term(m, 800.0, 800.0) == -kInf);
  CHECK(omega(BoundModel::bind(p, frank()), 60.0, 60.0) < 1e-20);
}

TEST_CASE("total log-likelihood matches a brute-force product") {
  const Dataset data = small_dataset(20, 3);
  const StepTransform h = marginal_transform(data);
  for (auto f : {CopulaFamily::Frank, CopulaFamily::Gaussian, CopulaFamily::Gumbel}) {
    ModelParams p = default_theta(2, 2, f);
    p.beta = {0.6, 1.4};
    p.eta = {0.4, 0.8};
    p.lambda_t = 0.5;
    p.lambda_c = 0.8;
    const double total = total_loglik(data, p, family(f), h);
    CHECK(total == doctest::Approx(brute_force(data, p, family(f), h)).epsilon(1e-10));
    double sum = 0.0;
    for (const auto& o : data) {
      sum += o.delta ? log_subdensity_event(o, p, family(f), h)
             : o.xi  ? log_subdensity_depcens(o, p, family(f), h)
                     : log_subdensity_admin(o, p, family(f), h);
    }
    CHECK(total == doctest::Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("log-likelihood is order invariant and log n is a constant shift") {
  const Dataset data = small_dataset(60, 4);
  std::vector<Observation> rev(data.observations().rbegin(), data.observations().rend());
  const Dataset reversed(rev, data.p(), data.q());
  const StepTransform h = marginal_transform(data);
  ModelParams p = default_theta(2, 2, CopulaFamily::Frank);
  p.beta = {0.6, 1.4};
  const TransformedSample a(data, h);
  const TransformedSample b(reversed, h);
  CHECK(a.loglik(p, frank()) == doctest::Approx(b.loglik(p, frank())).epsilon(1e-13));
  const double shift = static_cast<double>(data.count_events() + data.count_dependent_censored()) *
                       std::log(static_cast<double>(data.size()));
  CHECK(a.loglik(p, frank(), true) - a.loglik(p, frank()) == doctest::Approx(shift).epsilon(1e-12));
}

TEST_CASE("omega is the density of V on the transformed scale") {
  const ModelParams p = theta(0.5, 0.2, 0.5, 0.8, 10.0);
  const BoundModel m = BoundModel::bind(p, frank());
  const double alpha = 0.5;
  for (double t : {-2.0, -0.4, 0.3, 1.7, 4.0}) {
    const double step = 1e-5;
    auto s_at = [&](double z) {
      const double hz = yeo_johnson(alpha, z);
      return joint_survival(m, hz - 0.5, hz - 0.2);
    };
    const double fd = -(s_at(t + step) - s_at(t - step)) / (2 * step);
    const double hz = yeo_johnson(alpha, t);
    CHECK(std::abs(fd - omega(m, hz - 0.5, hz - 0.2) * yj_derivative(alpha, t)) < 1e-5);
  }
}

TEST_CASE("psi agrees with finite differences at random points") {
  Rng rng = make_rng(17);
  for (auto f : {CopulaFamily::Frank, CopulaFamily::Gaussian, CopulaFamily::Gumbel}) {
    for (int i = 0; i < 100; ++i) {
      const double r = f == CopulaFamily::Frank      ? -5.0 + 20.0 * uniform_open(rng)
                       : f == CopulaFamily::Gaussian ? -0.9 + 1.8 * uniform_open(rng)
                                                     : 1.0 + 4.0 * uniform_open(rng);
      const ModelParams p = theta(0.0, 0.0, 2.0 * uniform_open(rng), 2.0 * uniform_open(rng), r);
      const BoundModel m = BoundModel::bind(p, family(f));
      const double x1 = -4.0 + 6.0 * uniform_open(rng);
      const double x2 = -4.0 + 6.0 * uniform_open(rng);
      for (bool zeta : {true, false}) {
        const double a = psi_point(m, x1, x2, zeta);
        const double n = psi_point_numeric(m, x1, x2, zeta);
        CHECK(std::abs(a - n) < 1e-5 * std::max(1.0, std::abs(n)));
      }
    }
  }
}

TEST_CASE("psi has a finite lower-tail limit") {
  const ModelParams p = theta(0.0, 0.0, 1.0, 1.0, 10.0);
  const BoundModel m = BoundModel::bind(p, frank());
  double prev = psi_point(m, -20.0, -20.5, true);
  for (double x : {-25.0, -30.0, -35.0}) {
    const double v = psi_point(m, x, x - 0.5, true);
    CHECK(std::isfinite(v));
    CHECK(std::abs(v - prev) < 1e-6);
    prev = v;
  }
  CHECK(prev == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("score: duplication doubles it and it matches the analytic route") {
  const Dataset data = small_dataset(40, 5);
  const StepTransform h = marginal_transform(data);
  std::vector<Observation> twice = data.observations();
  twice.insert(twice.end(), data.begin(), data.end());
  const Dataset doubled(twice, 2, 2);
  for (auto f : {CopulaFamily::Frank, CopulaFamily::Gaussian, CopulaFamily::Gumbel}) {
    ModelParams p = default_theta(2, 2, f);
    p.beta = {0.5, 1.2};
    p.eta = {0.3, 0.7};
    p.lambda_t = 0.6;
    p.lambda_c = 0.9;
    const auto s1 = score(data, p, family(f), h);
    const auto s2 = score(doubled, p, family(f), h);
    REQUIRE(s1.size() == 7);
    for (std::size_t j = 0; j < s1.size(); ++j) {
      CHECK(s2[j] == doctest::Approx(2.0 * s1[j]).epsilon(1e-6));
    }
    const TransformedSample sample(data, h);
    std::vector<double> g(6);
    sample.loglik_gradient(BoundModel::bind(p, family(f)), p, g);
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(std::abs(g[j] - s1[j]) < 1e-5 * std::max(1.0, std::abs(s1[j])));
    }
  }
}

TEST_CASE("score near parameter boundaries") {
  const Dataset data = small_dataset(40, 6);
  const StepTransform h = marginal_transform(data);
  ModelParams p = default_theta(2, 2, CopulaFamily::Gumbel);
  p.r = 1.0;
  p.lambda_t = 0.0;
  const auto s = score(data, p, family(CopulaFamily::Gumbel), h);
  for (double v : s) CHECK(std::isfinite(v));
}

TEST_CASE("subdensities with the administrative factors integrate to one") {
  const TrueModel truth = scenario1_model(TransformKind::YeoJohnson);
  const ModelParams& p = truth.params;
  const BoundModel m = BoundModel::bind(p, frank());
  const double alpha = truth.transform.alpha;
  for (const auto& [x1c, x2c] : {std::pair{0.0, 0.5}, std::pair{1.0, 2.0}, std::pair{1.0, 4.5}}) {
    const double xb = p.beta[0] * x1c + p.beta[1] * x2c;
    const double we = p.eta[0] * x1c + p.eta[1] * x2c;
    auto surv_a = [](double z) { return z < 0.0 ? 1.0 : z > 3.0 ? 0.0 : (3.0 - z) / 3.0; };
    auto observed = [&](double z) {
      const double hz = yeo_johnson(alpha, z);
      const double dh = yj_derivative(alpha, z);
      return (std::exp(log_event_term(m, hz - xb, hz - we)) +
              std::exp(log_depcens_term(m, hz - xb, hz - we))) * dh * surv_a(z);
    };
    auto admin = [&](double z) {
      const double hz = yeo_johnson(alpha, z);
      return std::exp(log_admin_term(m, hz - xb, hz - we)) / 3.0;
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double total = GK::integrate(observed, -kInf, 0.0, 15, 1e-12) +
                         GK::integrate(observed, 0.0, 3.0, 15, 1e-12) +
                         GK::integrate(admin, 0.0, 3.0, 15, 1e-12);
    CHECK(std::abs(total - 1.0) < 1e-3);
  }
}
