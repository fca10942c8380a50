#include "depcens/simulate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>

#include "depcens/parallel.hpp"

namespace depcens {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kZ975 = 1.959963984540054;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// beta, eta, tau, lambda_T, lambda_C
std::vector<double> report_vector(const ModelParams& m, CopulaFamily family) {
  std::vector<double> v = m.beta;
  v.insert(v.end(), m.eta.begin(), m.eta.end());
  v.push_back(tau_from_r(CopulaModel(family, m.r)));
  v.push_back(m.lambda_t);
  v.push_back(m.lambda_c);
  return v;
}

double sample_sd(const std::vector<double>& x) {
  if (x.size() < 2) return kNaN;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace

double yeo_johnson(double alpha, double z) {
  if (z >= 0.0) {
    if (alpha == 0.0) return std::log1p(z);
    return std::expm1(alpha * std::log1p(z)) / alpha;
  }
  const double b = 2.0 - alpha;
  if (b == 0.0) return -std::log1p(-z);
  return -std::expm1(b * std::log1p(-z)) / b;
}

double yeo_johnson_inverse(double alpha, double y) {
  if (y >= 0.0) {
    if (alpha == 0.0) return std::expm1(y);
    return std::expm1(std::log1p(alpha * y) / alpha);
  }
  const double b = 2.0 - alpha;
  if (b == 0.0) return -std::expm1(-y);
  return -std::expm1(std::log1p(-b * y) / b);
}

double TrueTransform::operator()(double z) const {
  return kind == TransformKind::Cubic ? z * z * z : yeo_johnson(alpha, z);
}

double TrueTransform::inverse(double y) const {
  return kind == TransformKind::Cubic ? std::cbrt(y) : yeo_johnson_inverse(alpha, y);
}

void TrueModel::validate() const {
  if (params.beta.size() != 2 || params.eta.size() != 2) {
    throw InvalidInput("generator expects two covariates per linear predictor");
  }
  if (transform.kind == TransformKind::YeoJohnson &&
      !(transform.alpha >= 0.0 && transform.alpha <= 2.0)) {
    throw InvalidInput("Yeo-Johnson alpha must be in [0, 2]");
  }
  if (!CopulaModel::in_domain(copula, params.r)) throw InvalidInput("copula parameter out of domain");
  if (!(admin_hi > admin_lo)) throw InvalidInput("administrative censoring range is empty");
}

TrueModel scenario1_model(TransformKind kind) {
  TrueModel m;
  m.params.beta = {0.6, 1.4};
  m.params.eta = {0.4, 0.8};
  m.params.lambda_t = 0.5;
  m.params.lambda_c = 0.8;
  m.params.r = 10.0;
  m.transform = {kind, 0.5};
  m.copula = CopulaFamily::Frank;
  m.margin_t = MarginalModel::lambda_hazard(0.5);
  m.margin_c = MarginalModel::lambda_hazard(0.8);
  return m;
}

TrueModel scenario2_model(double dof) {
  if (!(dof > 0.0)) throw InvalidInput("degrees of freedom must be > 0");
  TrueModel m = scenario1_model(TransformKind::YeoJohnson);
  m.margin_t = MarginalModel::student_t(dof);
  m.margin_c = MarginalModel::student_t(dof);
  m.params.lambda_t = kNaN;
  m.params.lambda_c = kNaN;
  return m;
}

GeneratedData generate_dataset(const TrueModel& model, std::size_t n, Rng& rng) {
  model.validate();
  const CopulaModel copula(model.copula, model.params.r);
  GeneratedData out;
  Truth& truth = out.truth;
  std::vector<Observation> obs;
  obs.reserve(n);
  std::size_t events = 0;
  std::size_t depcens = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Observation o;
    const double x1 = uniform_open(rng) < 0.5 ? 1.0 : 0.0;
    const double x2 = 5.0 * uniform_open(rng);
    o.x = {x1, x2};
    o.w = o.x;
    const auto [u, v] = sample_pair(copula, rng);
    const double et = quantile(model.margin_t, u);
    const double ec = quantile(model.margin_c, v);
    const double t = model.transform.inverse(dot(o.x, model.params.beta) + et);
    const double c = model.transform.inverse(dot(o.w, model.params.eta) + ec);
    const double a = model.admin_lo + (model.admin_hi - model.admin_lo) * uniform_open(rng);
    o.z = std::min({t, c, a});
    o.delta = o.z == t ? 1 : 0;
    o.xi = o.delta == 0 && o.z == c ? 1 : 0;
    events += static_cast<std::size_t>(o.delta);
    depcens += static_cast<std::size_t>(o.xi);
    truth.t.push_back(t);
    truth.c.push_back(c);
    truth.a.push_back(a);
    truth.eps_t.push_back(et);
    truth.eps_c.push_back(ec);
    obs.push_back(std::move(o));
  }
  const double dn = static_cast<double>(n);
  truth.event_fraction = static_cast<double>(events) / dn;
  truth.depcens_fraction = static_cast<double>(depcens) / dn;
  truth.admin_fraction = static_cast<double>(n - events - depcens) / dn;
  out.data = Dataset(std::move(obs), 2, 2);
  return out;
}

Dataset generate_scenario2(double dof, std::size_t n, Rng& rng) {
  return generate_dataset(scenario2_model(dof), n, rng).data;
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::S1_H1:
      return "s1_h1";
    case Scenario::S1_H2:
      return "s1_h2";
    case Scenario::S2:
      return "s2";
    case Scenario::S3_Gumbel:
      return "s3_gumbel";
    case Scenario::S3_Gaussian:
      return "s3_gaussian";
    case Scenario::S4_Case:
      return "s4_case";
  }
  return "unknown";
}

Scenario scenario_from_string(std::string_view name) {
  const std::string s = lower(name);
  for (Scenario sc : {Scenario::S1_H1, Scenario::S1_H2, Scenario::S2, Scenario::S3_Gumbel,
                      Scenario::S3_Gaussian, Scenario::S4_Case}) {
    if (s == to_string(sc)) return sc;
  }
  throw InvalidInput("unknown scenario '" + std::string(name) + "'");
}

void ScenarioConfig::validate() const {
  if (n < 50) throw InvalidInput("n must be >= 50");
  if (runs < 1) throw InvalidInput("runs must be >= 1");
  if (bootstrap_B < 0) throw InvalidInput("bootstrap size must be >= 0");
  if (scenario == Scenario::S4_Case && (gof_case < 1 || gof_case > 3)) {
    throw InvalidInput("gof case must be 1, 2 or 3");
  }
  fit.validate();
}

TrueModel scenario_truth(const ScenarioConfig& cfg) {
  switch (cfg.scenario) {
    case Scenario::S1_H2:
      return scenario1_model(TransformKind::Cubic);
    case Scenario::S2:
      return scenario2_model(cfg.t_dof);
    case Scenario::S4_Case:
      return cfg.gof_case == 2 ? scenario2_model(cfg.t_dof)
                               : scenario1_model(TransformKind::YeoJohnson);
    default:
      return scenario1_model(TransformKind::YeoJohnson);
  }
}

ModelSpec scenario_spec(const ScenarioConfig& cfg) {
  ModelSpec spec;
  if (cfg.scenario == Scenario::S3_Gumbel ||
      (cfg.scenario == Scenario::S4_Case && cfg.gof_case == 3)) {
    spec.copula = CopulaFamily::Gumbel;
  } else if (cfg.scenario == Scenario::S3_Gaussian) {
    spec.copula = CopulaFamily::Gaussian;
  }
  return spec;
}

std::vector<std::string> report_names(std::size_t p, std::size_t q) {
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= p; ++j) names.push_back("beta" + std::to_string(j));
  for (std::size_t j = 1; j <= q; ++j) names.push_back("eta" + std::to_string(j));
  names.insert(names.end(), {"tau", "lambda_T", "lambda_C"});
  return names;
}

MonteCarloSummary run_monte_carlo(const ScenarioConfig& cfg) {
  cfg.validate();
  if (cfg.scenario == Scenario::S4_Case) {
    throw InvalidInput("goodness-of-fit scenarios run through run_gof_study");
  }
  const TrueModel truth_model = scenario_truth(cfg);
  const ModelSpec spec = scenario_spec(cfg);
  const std::vector<double> truth = report_vector(truth_model.params, truth_model.copula);

  FitConfig inner = cfg.fit;
  inner.threads = 1;
  const std::size_t runs = static_cast<std::size_t>(cfg.runs);
  std::vector<RunRecord> records(runs);
  parallel_for(runs, resolve_threads(cfg.threads), [&](std::size_t k) {
    const std::uint64_t run_seed = derive_seed(cfg.seed, k);
    Rng rng = make_rng(run_seed);
    const GeneratedData g = generate_dataset(truth_model, cfg.n, rng);
    RunRecord& rec = records[k];
    rec.event_fraction = g.truth.event_fraction;
    rec.depcens_fraction = g.truth.depcens_fraction;
    rec.admin_fraction = g.truth.admin_fraction;
    try {
      const FitResult f = fit(g.data, spec, inner);
      rec.outer_iterations = f.n_iters;
      if (!f.converged) return;
      rec.estimate = report_vector(f.params, spec.copula);
      if (cfg.bootstrap_B > 0) {
        const BootstrapResult br =
            bootstrap_se(g.data, spec, inner, f, cfg.bootstrap_B, derive_seed(run_seed, 1));
        std::vector<std::vector<double>> rep(rec.estimate.size());
        for (const auto& r : br.replicates) {
          const ModelParams m = ModelParams::from_vector(r, g.data.p(), g.data.q());
          const std::vector<double> v = report_vector(m, spec.copula);
          for (std::size_t j = 0; j < v.size(); ++j) rep[j].push_back(v[j]);
        }
        for (const auto& col : rep) rec.se.push_back(sample_sd(col));
      }
      rec.converged = true;
    } catch (const std::exception&) {
      rec.converged = false;
    }
  });

  MonteCarloSummary s;
  s.scenario = cfg.scenario;
  s.n = cfg.n;
  s.runs = cfg.runs;
  s.bootstrap_B = cfg.bootstrap_B;
  const std::vector<std::string> names = report_names(2, 2);
  for (std::size_t j = 0; j < names.size(); ++j) {
    SummaryRow row;
    row.parameter = names[j];
    row.truth = truth[j];
    std::vector<double> est;
    int covered = 0;
    int with_se = 0;
    double sq = 0.0;
    for (const auto& rec : records) {
      if (!rec.converged) continue;
      est.push_back(rec.estimate[j]);
      sq += (rec.estimate[j] - truth[j]) * (rec.estimate[j] - truth[j]);
      if (!rec.se.empty() && std::isfinite(rec.se[j])) {
        ++with_se;
        covered += std::abs(rec.estimate[j] - truth[j]) <= kZ975 * rec.se[j] ? 1 : 0;
      }
    }
    row.used = static_cast<int>(est.size());
    if (!est.empty()) {
      double mean = 0.0;
      for (double v : est) mean += v;
      row.mean = mean / static_cast<double>(est.size());
      row.bias = row.mean - row.truth;
      row.sd = sample_sd(est);
      row.rmse = std::sqrt(sq / static_cast<double>(est.size()));
    } else {
      row.mean = row.bias = row.sd = row.rmse = kNaN;
    }
    row.cp = with_se > 0 ? static_cast<double>(covered) / with_se : kNaN;
    s.rows.push_back(row);
  }
  for (const auto& rec : records) s.failed += rec.converged ? 0 : 1;
  s.records = std::move(records);
  return s;
}

GofStudy run_gof_study(const ScenarioConfig& base) {
  ScenarioConfig cfg = base;
  cfg.scenario = Scenario::S4_Case;
  cfg.validate();
  if (cfg.bootstrap_B < 1) throw InvalidInput("goodness-of-fit study needs bootstrap size >= 1");
  const TrueModel truth_model = scenario_truth(cfg);
  const ModelSpec spec = scenario_spec(cfg);
  FitConfig inner = cfg.fit;
  inner.threads = 1;

  const std::size_t runs = static_cast<std::size_t>(cfg.runs);
  struct Slot {
    bool ok = false;
    double t_cm = 0.0;
    double p = 0.0;
    double mean_rep = 0.0;
  };
  std::vector<Slot> slots(runs);
  parallel_for(runs, resolve_threads(cfg.threads), [&](std::size_t k) {
    const std::uint64_t run_seed = derive_seed(cfg.seed, k);
    Rng rng = make_rng(run_seed);
    const GeneratedData g = generate_dataset(truth_model, cfg.n, rng);
    try {
      const FitResult f = fit(g.data, spec, inner);
      if (!f.converged) return;
      const GofResult r =
          bootstrap_gof(f, spec, g.data, inner, cfg.bootstrap_B, derive_seed(run_seed, 2));
      if (r.replicates.empty()) return;
      double m = 0.0;
      for (double v : r.replicates) m += v;
      slots[k] = {true, r.t_cm, r.p_value, m / static_cast<double>(r.replicates.size())};
    } catch (const std::exception&) {
    }
  });

  GofStudy out;
  out.gof_case = cfg.gof_case;
  out.n = cfg.n;
  out.runs = cfg.runs;
  out.bootstrap_B = cfg.bootstrap_B;
  int r05 = 0;
  int r10 = 0;
  double sum = 0.0;
  for (const auto& s : slots) {
    if (!s.ok) {
      ++out.failed;
      continue;
    }
    out.t_cm.push_back(s.t_cm);
    out.p_values.push_back(s.p);
    out.mean_replicate.push_back(s.mean_rep);
    r05 += s.p < 0.05 ? 1 : 0;
    r10 += s.p < 0.10 ? 1 : 0;
    sum += s.t_cm;
  }
  const double used = static_cast<double>(out.t_cm.size());
  if (used > 0) {
    out.reject_05 = r05 / used;
    out.reject_10 = r10 / used;
    out.mean_t_cm = sum / used;
  } else {
    out.reject_05 = out.reject_10 = out.mean_t_cm = kNaN;
  }
  return out;
}

}  // namespace depcens
