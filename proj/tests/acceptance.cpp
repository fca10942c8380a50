#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "depcens/io.hpp"

using namespace depcens;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Tolerances and thresholds.
constexpr int kAxiomPoints = 10000;
constexpr double kPartialTol = 1e-6;
constexpr double kAxiomSlack = 1e-12;
constexpr double kQuadratureTol = 1e-6;
constexpr double kHazardTol = 1e-10;
constexpr double kQuantileTol = 1e-8;
constexpr double kFrankTauLo = 0.66;
constexpr double kFrankTauHi = 0.675;
constexpr double kGaussianRoundTrip = 1e-6;
constexpr double kNormalizationTol = 1e-3;
constexpr double kSuiteSeconds = 60.0;

constexpr std::size_t kStudyN = 300;
constexpr int kEstimationRuns = 50;
constexpr int kCoverageB = 100;
constexpr double kStdBiasMax = 0.40;
constexpr double kRmseBeta1 = 0.160;
constexpr double kRmseFactor = 2.0;
constexpr double kCoverageLo = 0.86;
constexpr double kCoverageHi = 1.00;
constexpr double kStudySeconds = 30.0 * 60.0;

constexpr int kNullRuns = 100;
constexpr int kGofB = 100;
constexpr double kNullRejectMax = 0.12;
constexpr double kTcmReference = 0.116;
constexpr double kTcmFactor = 3.0;
constexpr int kPowerRuns = 50;
constexpr double kPowerMin = 0.5;
constexpr int kMisspecRuns = 50;
constexpr double kMisspecStdBiasMax = 0.60;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome copula_axioms() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<CopulaModel> models = {
      CopulaModel(CopulaFamily::Frank, 10.0), CopulaModel(CopulaFamily::Frank, -4.0),
      CopulaModel(CopulaFamily::Gaussian, 0.6), CopulaModel(CopulaFamily::Gaussian, -0.8),
      CopulaModel(CopulaFamily::Gumbel, 1.5), CopulaModel(CopulaFamily::Gumbel, 3.0)};
  Rng rng = make_rng(101);
  int bad = 0;
  double worst_fd = 0.0;
  for (const auto& c : models) {
    for (double u : {0.0, 0.3, 1.0}) {
      bad += std::abs(cdf(c, u, 1.0) - u) > 1e-14 || std::abs(cdf(c, 1.0, u) - u) > 1e-14 ||
             cdf(c, u, 0.0) != 0.0 || cdf(c, 0.0, u) != 0.0;
    }
    for (int i = 0; i < kAxiomPoints; ++i) {
      double u1 = uniform_open(rng), u2 = uniform_open(rng);
      double v1 = uniform_open(rng), v2 = uniform_open(rng);
      const double w = cdf(c, u1, v1);
      bad += w < std::max(u1 + v1 - 1.0, 0.0) - kAxiomSlack || w > std::min(u1, v1) + kAxiomSlack;
      if (u1 > u2) std::swap(u1, u2);
      if (v1 > v2) std::swap(v1, v2);
      bad += cdf(c, u2, v2) - cdf(c, u1, v2) - cdf(c, u2, v1) + cdf(c, u1, v1) < -kAxiomSlack;
      const double u = 0.01 + 0.98 * u1;
      const double v = 0.01 + 0.98 * v1;
      const double h = 1e-6;
      const double fd_u = (cdf(c, u + h, v) - cdf(c, u - h, v)) / (2 * h);
      const double fd_v = (cdf(c, u, v + h) - cdf(c, u, v - h)) / (2 * h);
      worst_fd = std::max({worst_fd, std::abs(partial_u(c, u, v) - fd_u),
                           std::abs(partial_v(c, u, v) - fd_v)});
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = bad == 0 && worst_fd < kPartialTol && secs < kSuiteSeconds;
  o.detail = "violations " + std::to_string(bad) + ", max |partial - FD| " + fmt(worst_fd) +
             ", " + fmt(secs, 3) + " s";
  return o;
}

Outcome marginal_suite() {
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  double worst_quad = 0.0;
  double worst_hazard = 0.0;
  double worst_quantile = 0.0;
  bool g_zero = true;
  for (double lambda : {0.0, 0.5, 0.8, 1.0}) {
    const auto m = MarginalModel::lambda_hazard(lambda);
    auto f = [&](double t) { return density(m, t); };
    for (double t : {-3.0, -1.0, 0.0, 0.7, 2.0, 4.0}) {
      worst_quad = std::max(worst_quad, std::abs(GK::integrate(f, -kInf, t, 15, 1e-13) - cdf(m, t)));
    }
    for (double t = -8.0; t <= 5.0; t += 0.25) {
      const double expected = std::exp(t) / (1.0 + lambda * std::exp(t));
      worst_hazard = std::max(worst_hazard,
                              std::abs(density(m, t) / survival(m, t) - expected) /
                                  std::max(1.0, expected));
    }
    for (double u = 0.005; u < 1.0; u += 0.0125) {
      worst_quantile = std::max(worst_quantile, std::abs(cdf(m, quantile(m, u)) - u));
    }
  }
  for (double lambda : {0.5, 0.8, 1.0}) g_zero = g_zero && log_density_derivative(MarginalModel::lambda_hazard(lambda), 0.0) == 0.0;
  Outcome o;
  o.pass = worst_quad < kQuadratureTol && worst_hazard < kHazardTol &&
           worst_quantile < kQuantileTol && g_zero;
  o.detail = "quadrature " + fmt(worst_quad) + ", hazard " + fmt(worst_hazard) + ", quantile " +
             fmt(worst_quantile) + ", g(0)=0 " + (g_zero ? "yes" : "no");
  return o;
}

Outcome kendall_tau() {
  const double frank = tau_from_r(CopulaModel(CopulaFamily::Frank, 10.0));
  const double gumbel = tau_from_r(CopulaModel(CopulaFamily::Gumbel, 2.0));
  double worst = 0.0;
  for (double tau = -0.9; tau < 0.95; tau += 0.05) {
    const double r = r_from_tau(CopulaFamily::Gaussian, tau);
    worst = std::max(worst, std::abs(tau_from_r(CopulaModel(CopulaFamily::Gaussian, r)) - tau));
  }
  Outcome o;
  o.pass = frank >= kFrankTauLo && frank <= kFrankTauHi && gumbel == 0.5 &&
           worst < kGaussianRoundTrip;
  o.detail = "Frank(10) " + fmt(frank, 6) + ", Gumbel(2) " + fmt(gumbel, 17) +
             ", Gaussian round trip " + fmt(worst);
  return o;
}

Outcome normalization() {
  const auto t0 = std::chrono::steady_clock::now();
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const TrueModel truth = scenario1_model(TransformKind::YeoJohnson);
  const ModelParams& p = truth.params;
  const BoundModel m = BoundModel::bind(p, ModelSpec{});
  const double a = truth.transform.alpha;
  auto dh = [a](double z) {
    return z >= 0.0 ? std::pow(z + 1.0, a - 1.0) : std::pow(1.0 - z, 1.0 - a);
  };
  double worst = 0.0;
  for (const auto& [x1, x2] : {std::pair{0.0, 0.0}, std::pair{0.0, 1.0}, std::pair{1.0, 2.5},
                               std::pair{1.0, 5.0}}) {
    const double xb = p.beta[0] * x1 + p.beta[1] * x2;
    const double we = p.eta[0] * x1 + p.eta[1] * x2;
    auto surv_a = [](double z) { return z < 0.0 ? 1.0 : (3.0 - z) / 3.0; };
    auto observed = [&](double z) {
      const double hz = yeo_johnson(a, z);
      return (std::exp(log_event_term(m, hz - xb, hz - we)) +
              std::exp(log_depcens_term(m, hz - xb, hz - we))) *
             dh(z) * surv_a(z);
    };
    auto admin = [&](double z) {
      const double hz = yeo_johnson(a, z);
      return std::exp(log_admin_term(m, hz - xb, hz - we)) / 3.0;
    };
    const double total = GK::integrate(observed, -kInf, 0.0, 15, 1e-12) +
                         GK::integrate(observed, 0.0, 3.0, 15, 1e-12) +
                         GK::integrate(admin, 0.0, 3.0, 15, 1e-12);
    worst = std::max(worst, std::abs(total - 1.0));
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst < kNormalizationTol && secs < kSuiteSeconds;
  o.detail = "max |integral - 1| " + fmt(worst) + ", " + fmt(secs, 3) + " s";
  return o;
}

Outcome nelson_aalen() {
  const std::vector<std::tuple<double, int, int>> rows = {
      {1, 1, 0}, {2, 1, 0}, {2, 0, 1}, {3, 0, 0}, {4, 1, 0},
      {5, 0, 1}, {5, 0, 0}, {6, 1, 0}, {7, 0, 0}, {8, 0, 1}};
  std::vector<Observation> obs;
  for (const auto& [z, d, x] : rows) {
    Observation o;
    o.z = z;
    o.delta = d;
    o.xi = x;
    o.x = {0.0};
    o.w = {0.0};
    obs.push_back(o);
  }
  const Dataset data(obs, 1, 1);
  const std::vector<double> ones(data.size(), 1.0);
  const auto got = update_jumps_with_psi(data, ones).jumps();
  const std::vector<std::pair<double, double>> expected = {
      {1, 1.0 / 10}, {2, 2.0 / 9}, {4, 1.0 / 6}, {5, 1.0 / 5}, {6, 1.0 / 3}, {8, 1.0}};
  bool exact = got.size() == expected.size();
  for (std::size_t k = 0; exact && k < got.size(); ++k) {
    exact = got[k].time == expected[k].first && got[k].size == expected[k].second;
  }
  Outcome o;
  o.pass = exact;
  o.detail = exact ? "6 increments exact" : "increments differ";
  return o;
}

const SummaryRow& row(const MonteCarloSummary& s, const std::string& name) {
  for (const auto& r : s.rows) {
    if (r.parameter == name) return r;
  }
  throw InvalidState("missing summary row " + name);
}

std::string std_bias_report(const MonteCarloSummary& s, double limit, bool& pass) {
  std::string out;
  for (const char* name : {"beta1", "beta2", "eta1", "eta2"}) {
    const SummaryRow& r = row(s, name);
    const double sb = std::abs(r.bias) / r.sd;
    pass = pass && sb < limit;
    out += std::string(name) + " " + fmt(sb, 3) + " ";
  }
  return out;
}

Outcome estimation_study() {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioConfig cfg;
  cfg.scenario = Scenario::S1_H1;
  cfg.n = kStudyN;
  cfg.runs = kEstimationRuns;
  cfg.bootstrap_B = kCoverageB;
  cfg.seed = 2024;
  const MonteCarloSummary s = run_monte_carlo(cfg);
  const double secs = seconds_since(t0);
  bool pass = s.failed < s.runs;
  const std::string sb = std_bias_report(s, kStdBiasMax, pass);
  const SummaryRow& b1 = row(s, "beta1");
  const bool rmse_ok = b1.rmse <= kRmseFactor * kRmseBeta1 && b1.rmse >= kRmseBeta1 / kRmseFactor;
  const bool cp_ok = b1.cp >= kCoverageLo && b1.cp <= kCoverageHi;
  Outcome o;
  o.pass = pass && rmse_ok && cp_ok && secs < kStudySeconds;
  o.detail = "|bias|/SD " + sb + "; beta1 RMSE " + fmt(b1.rmse, 3) + ", CP " + fmt(b1.cp, 3) +
             " (B=" + std::to_string(kCoverageB) + "); non-converged " +
             std::to_string(s.failed) + "; " + fmt(secs, 4) + " s";
  return o;
}

GofStudy gof_study(int gof_case, int runs, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::S4_Case;
  cfg.gof_case = gof_case;
  cfg.n = kStudyN;
  cfg.runs = runs;
  cfg.bootstrap_B = kGofB;
  cfg.seed = seed;
  return run_gof_study(cfg);
}

Outcome gof_null() {
  const auto t0 = std::chrono::steady_clock::now();
  const GofStudy s = gof_study(1, kNullRuns, 7);
  const bool reject_ok = s.reject_05 >= 0.0 && s.reject_05 <= kNullRejectMax;
  const bool tcm_ok =
      s.mean_t_cm >= kTcmReference / kTcmFactor && s.mean_t_cm <= kTcmReference * kTcmFactor;
  Outcome o;
  o.pass = reject_ok && tcm_ok;
  o.detail = "rejection at 5% " + fmt(s.reject_05, 3) + ", mean T_CM " + fmt(s.mean_t_cm, 3) +
             ", failed " + std::to_string(s.failed) + ", " + fmt(seconds_since(t0), 4) + " s";
  return o;
}

Outcome gof_power() {
  const auto t0 = std::chrono::steady_clock::now();
  const GofStudy s = gof_study(2, kPowerRuns, 8);
  Outcome o;
  o.pass = s.reject_10 > kPowerMin;
  o.detail = "rejection at 10% " + fmt(s.reject_10, 3) + ", mean T_CM " + fmt(s.mean_t_cm, 3) +
             ", failed " + std::to_string(s.failed) + ", " + fmt(seconds_since(t0), 4) + " s";
  return o;
}

Outcome misspecified() {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioConfig cfg;
  cfg.scenario = Scenario::S3_Gumbel;
  cfg.n = kStudyN;
  cfg.runs = kMisspecRuns;
  cfg.seed = 9;
  const MonteCarloSummary s = run_monte_carlo(cfg);
  bool pass = s.failed < s.runs;
  const std::string sb = std_bias_report(s, kMisspecStdBiasMax, pass);
  Outcome o;
  o.pass = pass;
  o.detail = "|bias|/SD " + sb + "; non-converged " + std::to_string(s.failed) + "; " +
             fmt(seconds_since(t0), 4) + " s";
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("depcens_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path data = dir / "data.csv";
  {
    Rng rng = make_rng(derive_seed(3, 0));
    write_csv(data.string(), generate_dataset(scenario1_model(TransformKind::YeoJohnson), 200, rng).data);
  }
  std::vector<RunConfig> configs;
  RunConfig base;
  base.threads = 1;
  base.seed = 11;
  base.input = data.string();
  base.n = 150;
  base.runs = 3;
  for (Command c : {Command::Fit, Command::Gof, Command::Simulate, Command::Benchmark}) {
    RunConfig cfg = base;
    cfg.command = c;
    cfg.B = c == Command::Fit || c == Command::Gof ? 10 : 0;
    configs.push_back(cfg);
  }
  RunConfig study = base;
  study.command = Command::Simulate;
  study.scenario = Scenario::S4_Case;
  study.B = 5;
  configs.push_back(study);

  int identical = 0;
  std::ostringstream log;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::string outputs[2];
    for (int rep = 0; rep < 2; ++rep) {
      RunConfig cfg = configs[i];
      const std::string stem = "out" + std::to_string(i) + "_" + std::to_string(rep);
      cfg.output = (dir / (stem + ".json")).string();
      run(cfg, log);
      outputs[rep] = slurp(dir / (stem + ".json")) + slurp(dir / (stem + ".csv"));
    }
    identical += !outputs[0].empty() && outputs[0] == outputs[1];
  }
  fs::remove_all(dir);
  Outcome o;
  o.pass = identical == static_cast<int>(configs.size());
  o.detail = std::to_string(identical) + "/" + std::to_string(configs.size()) +
             " commands byte-identical";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {
      copula_axioms, marginal_suite, kendall_tau, normalization, nelson_aalen,
      estimation_study, gof_null, gof_power, misspecified, determinism};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::stoi(argv[i]));
  if (selected.empty()) {
    for (int k = 1; k <= static_cast<int>(criteria.size()); ++k) selected.push_back(k);
  }
  int failed = 0;
  for (int k : selected) {
    Outcome o;
    try {
      o = criteria.at(static_cast<std::size_t>(k - 1))();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d: %s  %s\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
