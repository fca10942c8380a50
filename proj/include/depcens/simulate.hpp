#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depcens/estimator.hpp"
#include "depcens/gof.hpp"

namespace depcens {

/// H(z) = [(z+1)^a - 1]/a for z >= 0, -[(1-z)^(2-a) - 1]/(2-a) for z < 0,
/// with the log limits at a = 0 and a = 2.
double yeo_johnson(double alpha, double z);
double yeo_johnson_inverse(double alpha, double y);

enum class TransformKind { YeoJohnson, Cubic };

struct TrueTransform {
  TransformKind kind = TransformKind::YeoJohnson;
  double alpha = 0.5;

  double operator()(double z) const;
  double inverse(double y) const;
};

/// Data-generating model. Covariates: X1 ~ Bernoulli(0.5), X2 ~ U(0, 5),
/// W = X. Administrative censoring A ~ U(admin_lo, admin_hi).
struct TrueModel {
  ModelParams params;
  TrueTransform transform;
  CopulaFamily copula = CopulaFamily::Frank;
  MarginalModel margin_t = MarginalModel::lambda_hazard(0.5);
  MarginalModel margin_c = MarginalModel::lambda_hazard(0.8);
  double admin_lo = 0.0;
  double admin_hi = 3.0;

  void validate() const;
};

/// beta = (0.6, 1.4), eta = (0.4, 0.8), Frank r = 10, lambda_T = 0.5,
/// lambda_C = 0.8, A ~ U[0, 3].
TrueModel scenario1_model(TransformKind kind);
/// Scenario-1 model with standard Student t(dof) error margins.
TrueModel scenario2_model(double dof);

struct Truth {
  std::vector<double> t;
  std::vector<double> c;
  std::vector<double> a;
  std::vector<double> eps_t;
  std::vector<double> eps_c;
  double event_fraction = 0.0;
  double depcens_fraction = 0.0;
  double admin_fraction = 0.0;
};

struct GeneratedData {
  Dataset data;
  Truth truth;
};

GeneratedData generate_dataset(const TrueModel& model, std::size_t n, Rng& rng);
Dataset generate_scenario2(double dof, std::size_t n, Rng& rng);

enum class Scenario { S1_H1, S1_H2, S2, S3_Gumbel, S3_Gaussian, S4_Case };

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view name);

struct ScenarioConfig {
  Scenario scenario = Scenario::S1_H1;
  std::size_t n = 300;
  int runs = 50;
  /// Bootstrap size per run for coverage (estimation scenarios) or for the
  /// p-value (S4_Case). 0 disables coverage.
  int bootstrap_B = 0;
  std::uint64_t seed = 1;
  int threads = 0;
  /// Degrees of freedom of the t margins in S2 and in S4 case 2.
  double t_dof = 8.0;
  /// 1: correct model, 2: t(8) margins, 3: Frank data fit with Gumbel.
  int gof_case = 1;
  FitConfig fit;

  void validate() const;
};

/// Generating model and fitted family of a scenario.
TrueModel scenario_truth(const ScenarioConfig& cfg);
ModelSpec scenario_spec(const ScenarioConfig& cfg);

struct SummaryRow {
  std::string parameter;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double sd = 0.0;
  double rmse = 0.0;
  double cp = 0.0;  // NaN without bootstrap
  int used = 0;
};

struct RunRecord {
  bool converged = false;
  std::vector<double> estimate;  // beta, eta, tau, lambda_T, lambda_C
  std::vector<double> se;        // same layout; empty without bootstrap
  double event_fraction = 0.0;
  double depcens_fraction = 0.0;
  double admin_fraction = 0.0;
  int outer_iterations = 0;
};

struct MonteCarloSummary {
  Scenario scenario = Scenario::S1_H1;
  std::size_t n = 0;
  int runs = 0;
  int failed = 0;
  int bootstrap_B = 0;
  std::vector<SummaryRow> rows;
  std::vector<RunRecord> records;
};

/// Reported parameter names: beta1.., eta1.., tau, lambda_T, lambda_C.
std::vector<std::string> report_names(std::size_t p, std::size_t q);

MonteCarloSummary run_monte_carlo(const ScenarioConfig& cfg);

struct GofStudy {
  int gof_case = 1;
  std::size_t n = 0;
  int runs = 0;
  int bootstrap_B = 0;
  int failed = 0;
  std::vector<double> t_cm;
  std::vector<double> p_values;
  std::vector<double> mean_replicate;
  double reject_05 = 0.0;
  double reject_10 = 0.0;
  double mean_t_cm = 0.0;
};

/// Repeated goodness-of-fit tests on simulated data (S4_Case).
GofStudy run_gof_study(const ScenarioConfig& cfg);

}  // namespace depcens
