#include "depcens/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "depcens/gof.hpp"
#include "depcens/parallel.hpp"
#include "depcens/random.hpp"

namespace depcens {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kMaxHalvings = 5;

std::vector<std::size_t> order_by_time(const Dataset& data) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data[a].z < data[b].z; });
  return order;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_jump_change(const StepTransform& a, const StepTransform& b) {
  const auto ja = a.jumps();
  const auto jb = b.jumps();
  if (ja.size() != jb.size()) return kInf;
  double m = 0.0;
  for (std::size_t k = 0; k < ja.size(); ++k) m = std::max(m, std::abs(ja[k].size - jb[k].size));
  return m;
}

StepTransform midpoint(const StepTransform& a, const StepTransform& b) {
  auto ja = a.jumps();
  const auto jb = b.jumps();
  for (std::size_t k = 0; k < ja.size(); ++k) ja[k].size = 0.5 * (ja[k].size + jb[k].size);
  return StepTransform::from_jumps(ja);
}

void require_nonnegative_jumps(const StepTransform& h) {
  for (const auto& j : h.jumps()) {
    if (!(j.size >= 0.0)) throw InvalidState("transform iterate has a negative jump");
  }
}

Dataset resample(const Dataset& data, const std::vector<std::size_t>& rows) {
  std::vector<Observation> obs;
  obs.reserve(rows.size());
  for (std::size_t i : rows) obs.push_back(data[i]);
  return Dataset(std::move(obs), data.p(), data.q());
}

StepTransform relax(const StepTransform& from, const StepTransform& to, double weight) {
  auto ja = from.jumps();
  const auto jb = to.jumps();
  for (std::size_t k = 0; k < ja.size(); ++k) {
    ja[k].size = (1.0 - weight) * ja[k].size + weight * jb[k].size;
  }
  return StepTransform::from_jumps(ja);
}

// Jump sizes at fixed theta: repeated jump updates, relaxed toward the current
// iterate. The relaxation weight halves whenever the update grows, and a
// nonpositive denominator halves the step back toward the previous iterate.
StepTransform settle_jumps(const Dataset& data, const ModelParams& theta, const ModelSpec& spec,
                           StepTransform h, double tol_h) {
  constexpr int kMaxSweeps = 100;
  constexpr double kMinWeight = 1.0 / 64.0;
  double weight = 1.0;
  double last_change = kInf;
  std::optional<StepTransform> previous;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    StepTransform mapped;
    for (int halvings = 0;; ++halvings) {
      try {
        mapped = update_jumps(data, theta, spec, h);
        break;
      } catch (const NonPositiveDenominator&) {
        if (!previous || halvings >= kMaxHalvings) throw;
        h = midpoint(*previous, h);
        weight = std::max(0.5 * weight, kMinWeight);
      }
    }
    require_nonnegative_jumps(mapped);
    const double change = max_jump_change(mapped, h);
    if (change > last_change) weight = std::max(0.5 * weight, kMinWeight);
    last_change = change;
    previous = h;
    h = weight == 1.0 ? std::move(mapped) : relax(h, mapped, weight);
    if (change < tol_h) break;
  }
  return h;
}

}  // namespace

void FitConfig::validate() const {
  if (max_outer_iters < 1) throw InvalidInput("max_outer_iters must be >= 1");
  if (!(tol_theta > 0.0) || !(tol_h > 0.0)) throw InvalidInput("tolerances must be > 0");
  if (theta_step_iters < 1) throw InvalidInput("theta_step_iters must be >= 1");
}

ModelParams default_theta(std::size_t p, std::size_t q, CopulaFamily family) {
  ModelParams m;
  m.beta.assign(p, 0.0);
  m.eta.assign(q, 0.0);
  m.lambda_t = 1.0;
  m.lambda_c = 1.0;
  m.r = r_from_tau(family, 0.5);
  return m;
}

EventGrid event_grid(const Dataset& data) {
  std::vector<double> times;
  for (const auto& obs : data) {
    if (obs.zeta() != 1) continue;
    if (obs.z == 0.0) throw InvalidInput("uncensored observation at z = 0");
    times.push_back(obs.z);
  }
  std::sort(times.begin(), times.end());
  EventGrid grid;
  for (double t : times) {
    if (!grid.times.empty() && grid.times.back() == t) {
      ++grid.counts.back();
    } else {
      grid.times.push_back(t);
      grid.counts.push_back(1);
    }
  }
  return grid;
}

StepTransform initial_transform(const Dataset& data, double jump) {
  const EventGrid grid = event_grid(data);
  std::vector<Jump> jumps;
  jumps.reserve(grid.times.size());
  for (double t : grid.times) jumps.push_back({t, jump});
  return StepTransform::from_jumps(jumps);
}

StepTransform marginal_transform(const Dataset& data) {
  const EventGrid grid = event_grid(data);
  std::vector<double> z;
  std::vector<int> zeta;
  for (const auto& obs : data) {
    z.push_back(obs.z);
    zeta.push_back(obs.zeta());
  }
  const StepCdf km = kaplan_meier(z, zeta);
  const double n = static_cast<double>(data.size());
  const auto logit = [n](double f) {
    const double g = (f * n + 0.5) / (n + 1.0);
    return std::log(g / (1.0 - g));
  };
  const auto first_pos = std::lower_bound(grid.times.begin(), grid.times.end(), 0.0);
  const double below = first_pos == grid.times.begin() ? 0.0 : km(*(first_pos - 1));
  const double above = first_pos == grid.times.end() ? 1.0 : km(*first_pos);
  const double anchor = logit(0.5 * (below + above));

  std::vector<Jump> jumps(grid.times.size());
  const std::size_t split = static_cast<std::size_t>(first_pos - grid.times.begin());
  double prev = 0.0;
  for (std::size_t k = split; k < grid.times.size(); ++k) {
    const double value = logit(km(grid.times[k])) - anchor;
    jumps[k] = {grid.times[k], value - prev};
    prev = value;
  }
  double up = 0.0;
  for (std::size_t k = split; k-- > 0;) {
    const double value = logit(km(grid.times[k])) - anchor;
    jumps[k] = {grid.times[k], up - value};
    up = value;
  }
  return StepTransform::from_jumps(jumps);
}

StepTransform regrid_transform(const Dataset& data, const StepTransform& source,
                               double floor_jump) {
  const EventGrid grid = event_grid(data);
  std::vector<Jump> jumps(grid.times.size());
  const auto first_pos = std::lower_bound(grid.times.begin(), grid.times.end(), 0.0);
  const std::size_t split = static_cast<std::size_t>(first_pos - grid.times.begin());
  double prev = 0.0;
  for (std::size_t k = split; k < grid.times.size(); ++k) {
    const double value = source(grid.times[k]);
    const double d = value - prev;
    jumps[k] = {grid.times[k], d > 0.0 ? d : floor_jump};
    prev = value;
  }
  double above = 0.0;
  for (std::size_t k = split; k-- > 0;) {
    const double value = source(grid.times[k]);
    const double d = above - value;
    jumps[k] = {grid.times[k], d > 0.0 ? d : floor_jump};
    above = value;
  }
  return StepTransform::from_jumps(jumps);
}

StepTransform update_jumps_with_psi(const Dataset& data, std::span<const double> psi) {
  if (psi.size() != data.size()) throw InvalidInput("psi length does not match the data");
  const EventGrid grid = event_grid(data);
  const std::vector<std::size_t> order = order_by_time(data);
  const std::size_t n = data.size();

  std::vector<double> z(n);
  std::vector<double> suffix(n + 1, 0.0);  // sum of psi over sorted[i..n)
  std::vector<double> prefix(n + 1, 0.0);  // sum of -psi over sorted[0..i)
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = data[order[i]].z;
    prefix[i + 1] = prefix[i] - psi[order[i]];
  }
  for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + psi[order[i]];

  std::vector<Jump> jumps(grid.times.size());
  for (std::size_t k = 0; k < grid.times.size(); ++k) {
    const double t = grid.times[k];
    double denom;
    if (t > 0.0) {
      const auto lo = std::lower_bound(z.begin(), z.end(), t) - z.begin();
      denom = suffix[static_cast<std::size_t>(lo)];
    } else {
      const auto hi = std::upper_bound(z.begin(), z.end(), t) - z.begin();
      denom = prefix[static_cast<std::size_t>(hi)];
    }
    if (!(denom > 0.0) || !std::isfinite(denom)) {
      throw NonPositiveDenominator("nonpositive jump-update denominator at z = " +
                                   std::to_string(t));
    }
    jumps[k] = {t, grid.counts[k] / denom};
  }
  return StepTransform::from_jumps(jumps);
}

StepTransform update_jumps(const Dataset& data, const ModelParams& params, const ModelSpec& spec,
                           const StepTransform& h) {
  const BoundModel model = BoundModel::bind(params, spec);
  std::vector<double> weights(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& obs = data[i];
    const auto [xb, we] = linear_predictors(obs, params);
    const double hz = h(obs.z);
    weights[i] = psi_point(model, hz - xb, hz - we, obs.zeta() == 1);
  }
  return update_jumps_with_psi(data, weights);
}

Eigen::VectorXd to_unconstrained(const ModelParams& params, CopulaFamily family) {
  const std::vector<double> v = params.to_vector();
  Eigen::VectorXd phi = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  const Eigen::Index k = phi.size() - 3;
  phi[k] = std::log(std::max(params.lambda_t, kLambdaZeroCutoff));
  phi[k + 1] = std::log(std::max(params.lambda_c, kLambdaZeroCutoff));
  switch (family) {
    case CopulaFamily::Frank:
      phi[k + 2] = params.r;
      break;
    case CopulaFamily::Gaussian:
      phi[k + 2] = std::atanh(std::clamp(params.r, -1.0 + 1e-12, 1.0 - 1e-12));
      break;
    case CopulaFamily::Gumbel:
      phi[k + 2] = std::log(std::max(params.r - 1.0, 1e-12));
      break;
  }
  return phi;
}

ModelParams from_unconstrained(const Eigen::VectorXd& phi, std::size_t p, std::size_t q,
                               CopulaFamily family) {
  std::vector<double> v(phi.data(), phi.data() + phi.size());
  const std::size_t k = p + q;
  v[k] = std::exp(phi[static_cast<Eigen::Index>(k)]);
  v[k + 1] = std::exp(phi[static_cast<Eigen::Index>(k + 1)]);
  const double s = phi[static_cast<Eigen::Index>(k + 2)];
  switch (family) {
    case CopulaFamily::Frank:
      v[k + 2] = s;
      break;
    case CopulaFamily::Gaussian:
      v[k + 2] = std::tanh(s);
      break;
    case CopulaFamily::Gumbel:
      v[k + 2] = 1.0 + std::exp(s);
      break;
  }
  return ModelParams::from_vector(v, p, q);
}

ThetaFit maximize_theta(const Dataset& data, const StepTransform& h, const ModelParams& start,
                        const ModelSpec& spec, BfgsState* state, bool include_log_n,
                        int max_iterations) {
  const TransformedSample sample(data, h);
  const std::size_t p = data.p();
  const std::size_t q = data.q();
  const CopulaFamily family = spec.copula;

  const Objective objective = [&](const Eigen::VectorXd& phi) {
    if (!phi.allFinite()) return kInf;
    const ModelParams m = from_unconstrained(phi, p, q, family);
    if (!std::isfinite(m.lambda_t) || !std::isfinite(m.lambda_c) ||
        !CopulaModel::in_domain(family, m.r)) {
      return kInf;
    }
    const double ll = sample.loglik(m, spec);
    return std::isfinite(ll) ? -ll : kInf;
  };

  MinimizeOptions options;
  options.gradient_tolerance = 1e-5;
  options.max_iterations = max_iterations;

  const std::size_t k_r = p + q + 2;
  const Gradient analytic = [&](const Eigen::VectorXd& phi, double fx, int* evaluations) {
    Eigen::VectorXd g = Eigen::VectorXd::Constant(phi.size(), kNaN);
    if (!std::isfinite(fx)) return g;
    const ModelParams m = from_unconstrained(phi, p, q, family);
    const BoundModel bound = BoundModel::bind(m, spec);
    std::vector<double> dtheta(k_r);
    const double ll = sample.loglik_gradient(bound, m, dtheta);
    if (evaluations) ++*evaluations;
    if (!std::isfinite(ll)) return g;
    for (std::size_t j = 0; j < p + q; ++j) g[static_cast<Eigen::Index>(j)] = -dtheta[j];
    g[static_cast<Eigen::Index>(p + q)] = -m.lambda_t * dtheta[p + q];
    g[static_cast<Eigen::Index>(p + q + 1)] = -m.lambda_c * dtheta[p + q + 1];

    const auto kr = static_cast<Eigen::Index>(k_r);
    const double step = options.fd_step * std::max(1.0, std::abs(phi[kr]));
    Eigen::VectorXd up = phi;
    Eigen::VectorXd down = phi;
    up[kr] += step;
    down[kr] -= step;
    const double f_up = objective(up);
    const double f_down = objective(down);
    if (evaluations) *evaluations += 2;
    if (std::isfinite(f_up) && std::isfinite(f_down)) {
      g[kr] = (f_up - f_down) / (2.0 * step);
    } else if (std::isfinite(f_up)) {
      g[kr] = (f_up - fx) / step;
    } else if (std::isfinite(f_down)) {
      g[kr] = (fx - f_down) / step;
    }
    return g;
  };
  const Gradient gradient = [&](const Eigen::VectorXd& phi, double fx, int* evaluations) {
    Eigen::VectorXd g = analytic(phi, fx, evaluations);
    if (!g.allFinite() && std::isfinite(fx)) {
      g = finite_difference_gradient(objective, phi, fx, options.fd_step, evaluations);
    }
    return g;
  };
  const MinimizeResult res =
      minimize_bfgs(objective, gradient, to_unconstrained(start, family), options, state);

  // The log n term is constant in theta; it is added after the search.
  const double shift =
      include_log_n ? static_cast<double>(data.size() - data.count_administrative()) *
                          std::log(static_cast<double>(data.size()))
                    : 0.0;
  ThetaFit out;
  out.params = from_unconstrained(res.x, p, q, family);
  out.loglik = -res.value + shift;
  out.converged = res.converged && std::isfinite(res.value);
  out.iterations = res.iterations;
  out.evaluations = res.evaluations;
  return out;
}

FitResult fit(const Dataset& data, const ModelSpec& spec, const FitConfig& config) {
  config.validate();
  spec.validate();
  data.require_fittable();
  const std::size_t n = data.size();

  ModelParams theta = config.theta_init ? *config.theta_init
                                        : default_theta(data.p(), data.q(), spec.copula);
  if (theta.beta.size() != data.p() || theta.eta.size() != data.q()) {
    throw InvalidInput("initial parameters do not match the covariate dimensions");
  }
  if (!CopulaModel::in_domain(spec.copula, theta.r) || theta.lambda_t < 0.0 ||
      theta.lambda_c < 0.0) {
    throw InvalidInput("initial parameters are outside their domain");
  }
  const double unit_jump = config.jump_init > 0.0 ? config.jump_init : 1.0 / static_cast<double>(n);
  StepTransform h = config.transform_init ? regrid_transform(data, *config.transform_init, unit_jump)
                    : config.jump_init > 0.0 ? initial_transform(data, config.jump_init)
                                             : marginal_transform(data);

  FitResult result;
  result.params = theta;
  result.transform = h;
  BfgsState state;
  std::vector<double> theta_vec = theta.to_vector();

  {
    const ThetaFit start = maximize_theta(data, h, theta, spec, &state, config.include_log_n,
                                          config.theta_step_iters);
    result.evaluations += start.evaluations;
    if (std::isfinite(start.loglik)) {
      theta = start.params;
      theta_vec = theta.to_vector();
    }
  }

  for (int it = 1; it <= config.max_outer_iters; ++it) {
    result.n_iters = it;
    StepTransform h_new;
    try {
      h_new = settle_jumps(data, theta, spec, h, config.tol_h);
    } catch (const NonPositiveDenominator& e) {
      result.message = e.what();
      return result;
    }

    const ThetaFit tf = maximize_theta(data, h_new, theta, spec, &state, config.include_log_n,
                                       config.theta_step_iters);
    result.evaluations += tf.evaluations;
    if (!std::isfinite(tf.loglik)) {
      result.message = "log-likelihood is not finite";
      return result;
    }
    const std::vector<double> tf_vec = tf.params.to_vector();
    const double d_theta = max_abs_diff(tf_vec, theta_vec);
    const double d_h = max_jump_change(h_new, h);

    h = h_new;
    theta = tf.params;
    theta_vec = tf_vec;
    result.params = theta;
    result.transform = h;
    result.loglik_trace.push_back(tf.loglik);
    result.tau_hat = tau_from_r(CopulaModel(spec.copula, theta.r));

    if (d_theta < config.tol_theta && d_h < config.tol_h) {
      result.converged = true;
      result.message = "converged";
      return result;
    }
  }
  result.message = "outer iteration budget exhausted";
  return result;
}

double wald_p_value(double estimate, double se) {
  if (!(se > 0.0) || !std::isfinite(se)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::abs(estimate / se) / std::sqrt(2.0));
}

BootstrapResult summarize_bootstrap(const ModelParams& estimate, std::size_t p, std::size_t q,
                                    std::vector<std::vector<double>> replicates, int requested) {
  BootstrapResult out;
  out.names = ModelParams::names(p, q);
  out.estimate = estimate.to_vector();
  const std::size_t k = out.estimate.size();
  out.requested = requested;
  out.failed = requested - static_cast<int>(replicates.size());
  out.unreliable = out.failed > 0.2 * requested;
  out.se.assign(k, 0.0);
  out.p_value.assign(k, std::numeric_limits<double>::quiet_NaN());
  out.degenerate.assign(k, true);
  const std::size_t m = replicates.size();
  if (m >= 2) {
    for (std::size_t j = 0; j < k; ++j) {
      double mean = 0.0;
      for (const auto& r : replicates) mean += r[j];
      mean /= static_cast<double>(m);
      double ss = 0.0;
      for (const auto& r : replicates) ss += (r[j] - mean) * (r[j] - mean);
      out.se[j] = std::sqrt(ss / static_cast<double>(m - 1));
      out.degenerate[j] = !(out.se[j] > 0.0);
      out.p_value[j] = wald_p_value(out.estimate[j], out.se[j]);
    }
  }
  out.replicates = std::move(replicates);
  return out;
}

BootstrapResult bootstrap_se_indices(const Dataset& data, const ModelSpec& spec,
                                     const FitConfig& config, const FitResult& base,
                                     const std::vector<std::vector<std::size_t>>& resamples) {
  FitConfig replicate_config = config;
  replicate_config.theta_init = base.params;
  replicate_config.transform_init = base.transform;

  const std::size_t B = resamples.size();
  std::vector<std::optional<std::vector<double>>> slots(B);
  parallel_for(B, resolve_threads(config.threads), [&](std::size_t b) {
    try {
      const Dataset boot = resample(data, resamples[b]);
      const FitResult r = fit(boot, spec, replicate_config);
      if (r.converged) slots[b] = r.params.to_vector();
    } catch (const std::exception&) {
      // Replicate dropped; counted as failed.
    }
  });
  std::vector<std::vector<double>> kept;
  for (auto& s : slots) {
    if (s) kept.push_back(std::move(*s));
  }
  return summarize_bootstrap(base.params, data.p(), data.q(), std::move(kept),
                             static_cast<int>(B));
}

BootstrapResult bootstrap_se(const Dataset& data, const ModelSpec& spec, const FitConfig& config,
                             const FitResult& base, int B, std::uint64_t seed) {
  if (B < 1) throw InvalidInput("bootstrap size must be >= 1");
  std::vector<std::vector<std::size_t>> resamples(static_cast<std::size_t>(B));
  for (std::size_t b = 0; b < resamples.size(); ++b) {
    Rng rng = make_rng(derive_seed(seed, b));
    auto& rows = resamples[b];
    rows.resize(data.size());
    for (auto& i : rows) i = uniform_index(rng, data.size());
  }
  return bootstrap_se_indices(data, spec, config, base, resamples);
}

}  // namespace depcens

