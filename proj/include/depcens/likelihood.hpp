#pragma once

#include <span>
#include <vector>

#include "depcens/copulas.hpp"
#include "depcens/core.hpp"
#include "depcens/marginals.hpp"

namespace depcens {

/// Parametric classes of the model: copula family plus the two error-term
/// families. Only the lambda-hazard family is supported as a fitted margin
/// because ModelParams carries exactly one scalar per margin.
struct ModelSpec {
  CopulaFamily copula = CopulaFamily::Frank;
  MarginalFamily marginal_t = MarginalFamily::LambdaHazard;
  MarginalFamily marginal_c = MarginalFamily::LambdaHazard;

  void validate() const;
};

/// Parameters bound to their families. Construction throws InvalidInput when
/// a parameter is outside its domain.
struct BoundModel {
  MarginalModel margin_t;
  MarginalModel margin_c;
  CopulaModel copula;

  static BoundModel bind(const ModelParams& params, const ModelSpec& spec);
};

/// Marginal and copula quantities at transformed-scale arguments
/// x1 = H(z) - x'beta, x2 = H(z) - w'eta.
struct PointEval {
  MarginalPoint t;
  MarginalPoint c;
  CopulaTerms copula;
};
PointEval evaluate_point(const BoundModel& m, double x1, double x2, bool second_order = false);

// Point-level log densities, without the dH and administrative-censoring
// factors.
double log_event_term(const BoundModel& m, double x1, double x2);
double log_depcens_term(const BoundModel& m, double x1, double x2);
double log_admin_term(const BoundModel& m, double x1, double x2);

/// Density factor of V = min(T, C) on the transformed scale:
/// f_T(x1)(1 - C'_1) + f_C(x2)(1 - C'_2).
double omega(const BoundModel& m, double x1, double x2);
double omega(double x1, double x2, const ModelParams& params, const ModelSpec& spec);
/// Joint survival S(x1, x2) = survival copula at the two marginal CDFs.
double joint_survival(const BoundModel& m, double x1, double x2);
double joint_survival(double x1, double x2, const ModelParams& params, const ModelSpec& spec);

/// -d/dh log omega (zeta = 1) or -d/dh log S (zeta = 0) where both arguments
/// move with h. Analytic, with a central finite-difference fallback.
double psi_point(const BoundModel& m, double x1, double x2, bool zeta);
/// Central finite-difference version of psi_point, used as fallback and oracle.
double psi_point_numeric(const BoundModel& m, double x1, double x2, bool zeta);

// Observation-level log subdensities. The event and dependent-censoring
// versions include log H{z} and throw InvalidState when the jump is zero.
double log_subdensity_event(const Observation& obs, const ModelParams& params,
                            const ModelSpec& spec, const StepTransform& h);
double log_subdensity_depcens(const Observation& obs, const ModelParams& params,
                              const ModelSpec& spec, const StepTransform& h);
/// Returns -infinity when the survival copula underflows to zero.
double log_subdensity_admin(const Observation& obs, const ModelParams& params,
                            const ModelSpec& spec, const StepTransform& h);

double psi(const Observation& obs, const ModelParams& params, const ModelSpec& spec,
           const StepTransform& h);

/// Per-observation values of a fixed transform: H(z_i) and log H{z_i}.
/// Lets the parameter search evaluate the likelihood without re-walking H.
class TransformedSample {
 public:
  TransformedSample(const Dataset& data, const StepTransform& h);

  const Dataset& data() const { return *data_; }
  double h(std::size_t i) const { return h_[i]; }
  double log_jump(std::size_t i) const { return log_jump_[i]; }

  /// Sum of the applicable log subdensities. -infinity when any term is
  /// infeasible. Optionally adds the constant log n per uncensored V.
  double loglik(const ModelParams& params, const ModelSpec& spec,
                bool include_log_n = false) const;
  double loglik(const BoundModel& model, const ModelParams& params,
                bool include_log_n = false) const;
  /// Log-likelihood together with its analytic gradient in
  /// (beta, eta, lambda_T, lambda_C); `grad` must have p + q + 2 entries.
  /// Lambda-hazard margins only.
  double loglik_gradient(const BoundModel& model, const ModelParams& params,
                         std::span<double> grad, bool include_log_n = false) const;

 private:
  const Dataset* data_;
  std::vector<double> h_;
  std::vector<double> log_jump_;
};

/// Log-likelihood up to parameter-free additive terms (P(A > z), f_A(z)).
double total_loglik(const Dataset& data, const ModelParams& params, const ModelSpec& spec,
                    const StepTransform& h);

/// Profile objective in H given theta: sum of zeta [log omega + log H{Z}] +
/// (1 - zeta) log S.
double v_loglik(const Dataset& data, const ModelParams& params, const ModelSpec& spec,
                const StepTransform& h);

/// Central finite-difference gradient of total_loglik in theta (flat layout),
/// relative step 1e-6, one-sided next to parameter-domain boundaries.
std::vector<double> score(const Dataset& data, const ModelParams& params, const ModelSpec& spec,
                          const StepTransform& h);

}  // namespace depcens
