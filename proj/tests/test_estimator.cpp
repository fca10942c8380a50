#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "depcens/estimator.hpp"
#include "depcens/simulate.hpp"

using namespace depcens;

namespace {

Observation ob(double z, int delta, int xi, double x = 0.0) {
  Observation o;
  o.z = z;
  o.delta = delta;
  o.xi = xi;
  o.x = {x};
  o.w = {x};
  return o;
}

// Ten observations: events/dependent censoring at 1, 2 (x2), 4, 5, 6, 8.
Dataset hand_dataset(double sign) {
  const std::vector<std::tuple<double, int, int>> rows = {
      {1, 1, 0}, {2, 1, 0}, {2, 0, 1}, {3, 0, 0}, {4, 1, 0},
      {5, 0, 1}, {5, 0, 0}, {6, 1, 0}, {7, 0, 0}, {8, 0, 1}};
  std::vector<Observation> obs;
  for (const auto& [z, d, x] : rows) obs.push_back(ob(sign * z, d, x));
  return Dataset(obs, 1, 1);
}

GeneratedData scenario1(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return generate_dataset(scenario1_model(TransformKind::YeoJohnson), n, rng);
}

double max_jump_diff(const StepTransform& a, const StepTransform& b) {
  const auto ja = a.jumps();
  const auto jb = b.jumps();
  REQUIRE(ja.size() == jb.size());
  double d = 0.0;
  for (std::size_t k = 0; k < ja.size(); ++k) {
    REQUIRE(ja[k].time == jb[k].time);
    d = std::max(d, std::abs(ja[k].size - jb[k].size));
  }
  return d;
}

}  // namespace

TEST_CASE("config validation") {
  FitConfig c;
  CHECK_NOTHROW(c.validate());
  c.tol_theta = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = {};
  c.max_outer_iters = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
}

TEST_CASE("default starting values") {
  const ModelParams p = default_theta(2, 3, CopulaFamily::Frank);
  CHECK(p.beta == std::vector<double>{0.0, 0.0});
  CHECK(p.eta.size() == 3);
  CHECK(p.lambda_t == 1.0);
  CHECK(p.lambda_c == 1.0);
  CHECK(tau_from_r(CopulaModel(CopulaFamily::Frank, p.r)) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("jump update with unit weights is the Nelson-Aalen increment") {
  const Dataset data = hand_dataset(1.0);
  const std::vector<double> ones(data.size(), 1.0);
  const StepTransform h = update_jumps_with_psi(data, ones);
  const std::vector<Jump> expected = {{1, 1.0 / 10}, {2, 2.0 / 9}, {4, 1.0 / 6},
                                      {5, 1.0 / 5},  {6, 1.0 / 3}, {8, 1.0}};
  const auto got = h.jumps();
  REQUIRE(got.size() == expected.size());
  for (std::size_t k = 0; k < got.size(); ++k) {
    CHECK(got[k].time == expected[k].time);
    CHECK(got[k].size == expected[k].size);
  }
  CHECK(h.jump_at(3.0) == 0.0);
}

TEST_CASE("negative axis mirrors the update in reversed time") {
  const Dataset data = hand_dataset(-1.0);
  const std::vector<double> minus_ones(data.size(), -1.0);
  const StepTransform h = update_jumps_with_psi(data, minus_ones);
  CHECK(h.jump_at(-1.0) == 1.0 / 10);
  CHECK(h.jump_at(-2.0) == 2.0 / 9);
  CHECK(h.jump_at(-8.0) == 1.0);
  const std::vector<double> ones(data.size(), 1.0);
  CHECK_THROWS_AS(update_jumps_with_psi(data, ones), NonPositiveDenominator);
}

TEST_CASE("single event with nothing at risk after it") {
  const Dataset data({ob(0.5, 0, 0), ob(1.0, 0, 1), ob(2.0, 1, 0)}, 1, 1);
  const std::vector<double> psi = {0.7, 0.3, 2.5};
  const StepTransform h = update_jumps_with_psi(data, psi);
  CHECK(h.jump_at(2.0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(h.jump_at(1.0) == doctest::Approx(1.0 / 2.8).epsilon(1e-15));
}

TEST_CASE("event grid") {
  const EventGrid g = event_grid(hand_dataset(1.0));
  CHECK(g.times == std::vector<double>{1, 2, 4, 5, 6, 8});
  CHECK(g.counts == std::vector<int>{1, 2, 1, 1, 1, 1});
  const Dataset zero({ob(0.0, 1, 0), ob(1.0, 0, 1), ob(2.0, 0, 0)}, 1, 1);
  CHECK_THROWS_AS(event_grid(zero), InvalidInput);
}

TEST_CASE("starting transforms") {
  const Dataset data = scenario1(200, 1).data;
  const EventGrid g = event_grid(data);
  const StepTransform flat = initial_transform(data, 0.01);
  CHECK(flat.jump_count() == g.times.size());
  for (const Jump& j : flat.jumps()) CHECK(j.size == 0.01);
  const StepTransform km = marginal_transform(data);
  CHECK(km.jump_count() == g.times.size());
  for (const Jump& j : km.jumps()) CHECK(j.size > 0.0);
  CHECK(km(0.0) == 0.0);
  const StepTransform same = regrid_transform(data, km, 1e-3);
  CHECK(max_jump_diff(same, km) < 1e-12);
}

TEST_CASE("unconstrained coordinates round trip") {
  for (auto f : {CopulaFamily::Frank, CopulaFamily::Gaussian, CopulaFamily::Gumbel}) {
    ModelParams p = default_theta(2, 1, f);
    p.beta = {0.3, -1.2};
    p.eta = {2.0};
    p.lambda_t = 0.4;
    p.lambda_c = 1.7;
    const ModelParams back = from_unconstrained(to_unconstrained(p, f), 2, 1, f);
    const auto a = p.to_vector();
    const auto b = back.to_vector();
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(b[j] == doctest::Approx(a[j]).epsilon(1e-12));
  }
}

TEST_CASE("quasi-Newton recovers a quadratic optimum") {
  const Eigen::Vector3d target(1.5, -2.0, 0.25);
  const Objective f = [&](const Eigen::VectorXd& x) {
    const Eigen::Vector3d d = x - target;
    return d(0) * d(0) + 4.0 * d(1) * d(1) + 0.5 * d(2) * d(2) + d(0) * d(1);
  };
  MinimizeOptions opt;
  opt.gradient_tolerance = 1e-9;
  const MinimizeResult r = minimize_bfgs(f, Eigen::Vector3d::Zero(), opt);
  CHECK(r.converged);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(r.x(j) - target(j)) < 1e-6);
  const Objective walled = [](const Eigen::VectorXd& x) {
    return x(0) < 0.0 ? std::numeric_limits<double>::infinity() : (x(0) - 2.0) * (x(0) - 2.0) - std::log(x(0));
  };
  const MinimizeResult w = minimize_bfgs(walled, Eigen::VectorXd::Constant(1, 0.1), opt);
  CHECK(w.x(0) == doctest::Approx(1.0 + std::sqrt(1.5)).epsilon(1e-6));
}

TEST_CASE("theta step with the true transform") {
  const GeneratedData g = scenario1(300, 7);
  const TrueModel truth = scenario1_model(TransformKind::YeoJohnson);
  const EventGrid grid = event_grid(g.data);
  std::vector<Jump> jumps;
  double prev_pos = 0.0;
  for (double t : grid.times) {
    if (t > 0.0) {
      jumps.push_back({t, truth.transform(t) - prev_pos});
      prev_pos = truth.transform(t);
    }
  }
  for (std::size_t k = 0; k < grid.times.size(); ++k) {
    const double t = grid.times[k];
    if (t >= 0.0) break;
    const double next = k + 1 < grid.times.size() && grid.times[k + 1] < 0.0 ? grid.times[k + 1] : 0.0;
    jumps.push_back({t, truth.transform(next) - truth.transform(t)});
  }
  const StepTransform h = StepTransform::from_jumps(jumps);
  const ModelSpec spec;
  const ThetaFit a = maximize_theta(g.data, h, truth.params, spec);
  CHECK(a.converged);
  CHECK(std::abs(a.params.beta[0] - 0.6) < 3 * 0.160);
  CHECK(std::abs(a.params.beta[1] - 1.4) < 3 * 0.241);

  const auto s = score(g.data, a.params, spec, h);
  for (std::size_t j = 0; j < s.size(); ++j) CHECK(std::abs(s[j]) < 1e-4);

  ModelParams other = truth.params;
  other.beta = {0.2, 1.0};
  other.eta = {0.8, 0.5};
  other.lambda_t = 1.0;
  other.r = 5.0;
  const ThetaFit b = maximize_theta(g.data, h, other, spec);
  CHECK(std::abs(a.loglik - b.loglik) < 1e-6);
}

TEST_CASE("fit on a scenario-1 dataset") {
  const GeneratedData g = scenario1(300, 11);
  const ModelSpec spec;
  const FitConfig cfg;
  const FitResult f = fit(g.data, spec, cfg);
  CHECK(f.converged);
  CHECK(f.n_iters <= 200);
  CHECK(f.tau_hat == tau_from_r(CopulaModel(CopulaFamily::Frank, f.params.r)));
  for (const Jump& j : f.transform.jumps()) CHECK(j.size > 0.0);
  CHECK(f.loglik_trace.size() == static_cast<std::size_t>(f.n_iters));

  SUBCASE("jump sizes are a fixed point of the update") {
    const StepTransform again = update_jumps(g.data, f.params, spec, f.transform);
    CHECK(max_jump_diff(again, f.transform) < 10 * cfg.tol_h);
  }
  SUBCASE("refit is bit-identical") {
    const FitResult f2 = fit(g.data, spec, cfg);
    CHECK(f2.params.to_vector() == f.params.to_vector());
    CHECK(f2.loglik_trace == f.loglik_trace);
  }
  SUBCASE("log n shift leaves the estimate unchanged") {
    FitConfig shifted = cfg;
    shifted.include_log_n = true;
    const FitResult f3 = fit(g.data, spec, shifted);
    CHECK(f3.params.to_vector() == f.params.to_vector());
    const double n = static_cast<double>(g.data.size());
    const double zeta = n - static_cast<double>(g.data.count_administrative());
    CHECK(f3.loglik() - f.loglik() == doctest::Approx(zeta * std::log(n)).epsilon(1e-12));
  }
}

TEST_CASE("fit preconditions") {
  const Dataset data = scenario1(100, 2).data;
  std::vector<Observation> censored;
  for (const auto& o : data) {
    if (o.zeta() == 0) censored.push_back(o);
  }
  CHECK_THROWS_AS(fit(Dataset(censored, 2, 2), ModelSpec{}), InvalidInput);
  FitConfig bad;
  bad.theta_init = default_theta(1, 2, CopulaFamily::Frank);
  CHECK_THROWS_AS(fit(data, ModelSpec{}, bad), InvalidInput);
}

TEST_CASE("bootstrap summaries") {
  const GeneratedData g = scenario1(150, 3);
  const FitResult base = fit(g.data, ModelSpec{}, FitConfig{});
  REQUIRE(base.converged);
  std::vector<std::size_t> identity(g.data.size());
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
  const BootstrapResult same = bootstrap_se_indices(g.data, ModelSpec{}, FitConfig{}, base, {identity, identity});
  REQUIRE(same.replicates.size() == 2);
  for (std::size_t j = 0; j < same.se.size(); ++j) {
    CHECK(same.se[j] == 0.0);
    CHECK(same.degenerate[j]);
    CHECK(std::isnan(same.p_value[j]));
  }
  CHECK(wald_p_value(1.959963984540054, 1.0) == doctest::Approx(0.05).epsilon(1e-12));

  const BootstrapResult b = bootstrap_se(g.data, ModelSpec{}, FitConfig{}, base, 8, 99);
  CHECK(b.requested == 8);
  CHECK(b.replicates.size() + static_cast<std::size_t>(b.failed) == 8);
  for (std::size_t j = 0; j < b.se.size(); ++j) CHECK(b.se[j] > 0.0);
  FitConfig two_threads;
  two_threads.threads = 2;
  const BootstrapResult c = bootstrap_se(g.data, ModelSpec{}, two_threads, base, 8, 99);
  CHECK(c.se == b.se);
}
