#include "depcens/gof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "depcens/numerics.hpp"
#include "depcens/parallel.hpp"

namespace depcens {

namespace {

struct Predictors {
  std::vector<double> xb;
  std::vector<double> we;
};

Predictors predictors(const Dataset& data, const ModelParams& params) {
  Predictors p;
  p.xb.reserve(data.size());
  p.we.reserve(data.size());
  for (const auto& obs : data) {
    const auto [xb, we] = linear_predictors(obs, params);
    p.xb.push_back(xb);
    p.we.push_back(we);
  }
  return p;
}

double model_cdf_at(double hv, const BoundModel& m, const Predictors& pred) {
  const std::size_t n = pred.xb.size();
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ft = cdf(m.margin_t, hv - pred.xb[i]);
    const double fc = cdf(m.margin_c, hv - pred.we[i]);
    terms[i] = ft + fc - cdf(m.copula, ft, fc);
  }
  return std::clamp(pairwise_sum(terms) / static_cast<double>(n), 0.0, 1.0);
}

std::vector<int> zeta_of(const Dataset& data) {
  std::vector<int> z;
  z.reserve(data.size());
  for (const auto& obs : data) z.push_back(obs.zeta());
  return z;
}

std::vector<double> times_of(const Dataset& data) {
  std::vector<double> t;
  t.reserve(data.size());
  for (const auto& obs : data) t.push_back(obs.z);
  return t;
}

// Generalized inverse restricted to jump points; a zero result between the
// last negative and first positive jump moves to the first positive jump.
// Values above the range of H map to +inf.
StepTransform::InverseResult inverse_on_support(const StepTransform& h, double y) {
  StepTransform::InverseResult r = h.inverse_checked(y);
  if (r.clamped && y > 0.0) {
    r.z = std::numeric_limits<double>::infinity();
    return r;
  }
  r.clamped = false;
  if (r.z == 0.0 && !h.positive_jumps().empty()) r.z = h.positive_jumps().front().time;
  if (r.z == 0.0 && !h.negative_jumps().empty()) r.z = h.negative_jumps().back().time;
  return r;
}

}  // namespace

double StepCdf::operator()(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0.0;
  return probs[static_cast<std::size_t>(it - times.begin()) - 1];
}

StepCdf kaplan_meier(std::span<const double> times, std::span<const int> events) {
  if (times.empty()) throw InvalidInput("Kaplan-Meier needs at least one observation");
  if (times.size() != events.size()) throw InvalidInput("times and indicators differ in length");
  for (int e : events) {
    if (e != 0 && e != 1) throw InvalidInput("event indicators must be 0 or 1");
  }
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  StepCdf out;
  double surv = 1.0;
  std::size_t at_risk = times.size();
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = times[order[i]];
    std::size_t d = 0;
    std::size_t tied = 0;
    while (i < order.size() && times[order[i]] == t) {
      d += static_cast<std::size_t>(events[order[i]]);
      ++tied;
      ++i;
    }
    if (d > 0) surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
    at_risk -= tied;
    out.times.push_back(t);
    out.probs.push_back(1.0 - surv);
  }
  return out;
}

double model_cdf_V(double v, const FitResult& fit, const ModelSpec& spec, const Dataset& data) {
  const BoundModel m = BoundModel::bind(fit.params, spec);
  return model_cdf_at(fit.transform(v), m, predictors(data, fit.params));
}

std::vector<double> model_cdf_V(std::span<const double> v, const FitResult& fit,
                                const ModelSpec& spec, const Dataset& data) {
  const BoundModel m = BoundModel::bind(fit.params, spec);
  const Predictors pred = predictors(data, fit.params);
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = model_cdf_at(fit.transform(v[k]), m, pred);
  return out;
}

double cramer_von_mises_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("statistic inputs differ in length");
  std::vector<double> sq(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) sq[i] = (a[i] - b[i]) * (a[i] - b[i]);
  return pairwise_sum(sq);
}

GofCurve gof_curve(const FitResult& fit, const ModelSpec& spec, const Dataset& data) {
  GofCurve c;
  c.v = times_of(data);
  const std::vector<int> zeta = zeta_of(data);
  const StepCdf km = kaplan_meier(c.v, zeta);
  std::sort(c.v.begin(), c.v.end());
  c.f_km.reserve(c.v.size());
  for (double t : c.v) c.f_km.push_back(km(t));
  c.f_v = model_cdf_V(c.v, fit, spec, data);
  for (std::size_t i = 1; i < c.f_v.size(); ++i) {
    if (c.f_v[i] < c.f_v[i - 1]) throw InvalidState("model CDF of V is not monotone");
  }
  return c;
}

double cramer_von_mises(const FitResult& fit, const ModelSpec& spec, const Dataset& data) {
  const GofCurve c = gof_curve(fit, spec, data);
  return cramer_von_mises_statistic(c.f_km, c.f_v);
}

double gof_p_value(double t_cm, std::span<const double> replicates) {
  if (replicates.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t above = 0;
  for (double r : replicates) above += r > t_cm ? 1 : 0;
  return static_cast<double>(above) / static_cast<double>(replicates.size());
}

BootstrapSample draw_gof_sample(const FitResult& fit, const ModelSpec& spec, const Dataset& data,
                                const StepCdf& admin_cdf, Rng& rng) {
  const BoundModel m = BoundModel::bind(fit.params, spec);
  const double z_max = *std::max_element(admin_cdf.times.begin(), admin_cdf.times.end());
  BootstrapSample out;
  std::vector<Observation> obs;
  obs.reserve(data.size());
  for (const auto& src : data) {
    const auto [xb, we] = linear_predictors(src, fit.params);
    const auto [u, v] = sample_pair(m.copula, rng);
    const double yt = xb + quantile(m.margin_t, u);
    const double yc = we + quantile(m.margin_c, v);
    const auto t = inverse_on_support(fit.transform, yt);
    const auto c = inverse_on_support(fit.transform, yc);
    out.clamped += static_cast<int>(t.clamped) + static_cast<int>(c.clamped);

    const double ua = uniform_open(rng);
    const auto it = std::lower_bound(admin_cdf.probs.begin(), admin_cdf.probs.end(), ua);
    const double a = it == admin_cdf.probs.end()
                         ? z_max
                         : admin_cdf.times[static_cast<std::size_t>(it - admin_cdf.probs.begin())];

    Observation o;
    o.x = src.x;
    o.w = src.w;
    // T and C tie on a shared jump point: the smaller latent value wins.
    const bool t_first = t.z < c.z || (t.z == c.z && yt <= yc);
    const double tc = t_first ? t.z : c.z;
    if (tc <= a) {
      o.z = tc;
      o.delta = t_first ? 1 : 0;
      o.xi = t_first ? 0 : 1;
    } else {
      o.z = a;
    }
    if (o.delta + o.xi > 1 || o.z != std::min({t.z, c.z, a})) {
      throw InvalidState("bootstrap observation violates Z = min(T, C, A)");
    }
    obs.push_back(std::move(o));
  }
  out.data = Dataset(std::move(obs), data.p(), data.q());
  return out;
}

GofResult bootstrap_gof(const FitResult& fit, const ModelSpec& spec, const Dataset& data,
                        const FitConfig& config, int B, std::uint64_t seed) {
  if (B < 1) throw InvalidInput("bootstrap size must be >= 1");
  GofResult out;
  out.requested = B;
  out.t_cm = cramer_von_mises(fit, spec, data);

  const std::vector<double> z = times_of(data);
  std::vector<int> admin_event = zeta_of(data);
  for (int& e : admin_event) e = 1 - e;
  const StepCdf admin_cdf = kaplan_meier(z, admin_event);

  FitConfig replicate_config = config;
  replicate_config.theta_init = fit.params;
  replicate_config.transform_init = fit.transform;

  const std::size_t nb = static_cast<std::size_t>(B);
  std::vector<std::optional<double>> stats(nb);
  std::vector<int> clamped(nb, 0);
  parallel_for(nb, resolve_threads(config.threads), [&](std::size_t b) {
    Rng rng = make_rng(derive_seed(seed, b));
    const BootstrapSample sample = draw_gof_sample(fit, spec, data, admin_cdf, rng);
    clamped[b] = sample.clamped;
    try {
      const FitResult refit = depcens::fit(sample.data, spec, replicate_config);
      if (refit.converged) stats[b] = cramer_von_mises(refit, spec, sample.data);
    } catch (const std::exception&) {
      // Dropped replicate; counted below.
    }
  });

  long total_clamped = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    total_clamped += clamped[b];
    if (stats[b]) {
      out.replicates.push_back(*stats[b]);
    } else {
      ++out.dropped;
    }
  }
  out.unreliable = out.dropped > 0.2 * B;
  out.p_value = gof_p_value(out.t_cm, out.replicates);
  out.clamp_fraction =
      static_cast<double>(total_clamped) / (2.0 * static_cast<double>(data.size()) * B);
  return out;
}

}  // namespace depcens
