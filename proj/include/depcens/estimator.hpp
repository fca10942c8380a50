#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "depcens/core.hpp"
#include "depcens/likelihood.hpp"
#include "depcens/numerics.hpp"

namespace depcens {

struct FitConfig {
  int max_outer_iters = 200;
  double tol_theta = 1e-5;
  double tol_h = 1e-5;
  /// Default: beta = 0, eta = 0, lambda_T = lambda_C = 1, r at tau = 0.5.
  std::optional<ModelParams> theta_init;
  /// Constant initial jump size at each uncensored time. <= 0 selects
  /// marginal_transform.
  double jump_init = 0.0;
  /// Warm-start transform, re-gridded onto the data's uncensored times.
  /// Overrides jump_init.
  std::optional<StepTransform> transform_init;
  std::uint64_t seed = 0;
  int threads = 0;
  bool include_log_n = false;
  /// Quasi-Newton iterations per theta step inside the alternation.
  int theta_step_iters = 5;

  void validate() const;
};

ModelParams default_theta(std::size_t p, std::size_t q, CopulaFamily family);

struct FitResult {
  ModelParams params;
  StepTransform transform;
  std::vector<double> loglik_trace;
  bool converged = false;
  int n_iters = 0;
  /// Log-likelihood evaluations spent in the theta steps.
  int evaluations = 0;
  double tau_hat = 0.0;
  std::string message;

  double loglik() const { return loglik_trace.empty() ? 0.0 : loglik_trace.back(); }
};

/// Raised by update_jumps when some denominator is not positive.
class NonPositiveDenominator : public InvalidState {
 public:
  using InvalidState::InvalidState;
};

/// Distinct uncensored times (zeta = 1) in ascending order with their counts.
struct EventGrid {
  std::vector<double> times;
  std::vector<int> counts;
};
EventGrid event_grid(const Dataset& data);

/// H with the same jump size at every uncensored time.
StepTransform initial_transform(const Dataset& data, double jump);
/// H(t_k) = logit F_KM(t_k) - c at the uncensored times, F_KM the product-limit
/// CDF of Z with zeta as event indicator (shrunk into (0, 1)), c centring the
/// gap around 0 so that H(0) = 0.
StepTransform marginal_transform(const Dataset& data);
/// Jumps at the data's uncensored times chosen so that H(t_k) matches
/// `source` at every such time. Zero or negative increments fall back to
/// `floor_jump`.
StepTransform regrid_transform(const Dataset& data, const StepTransform& source,
                               double floor_jump);

/// Jump update for given per-observation weights psi_i:
///   t_k > 0:  d_k / sum_{Z_i >= t_k} psi_i
///   t_k < 0:  d_k / sum_{Z_i <= t_k} (-psi_i)
/// Throws NonPositiveDenominator when a denominator is <= 0.
StepTransform update_jumps_with_psi(const Dataset& data, std::span<const double> psi);
/// Evaluates psi at (params, h) and applies update_jumps_with_psi.
StepTransform update_jumps(const Dataset& data, const ModelParams& params, const ModelSpec& spec,
                           const StepTransform& h);

/// Unconstrained coordinates: beta, eta, log lambda_T, log lambda_C and
/// r (Frank), atanh r (Gaussian) or log(r - 1) (Gumbel).
Eigen::VectorXd to_unconstrained(const ModelParams& params, CopulaFamily family);
ModelParams from_unconstrained(const Eigen::VectorXd& phi, std::size_t p, std::size_t q,
                               CopulaFamily family);

struct ThetaFit {
  ModelParams params;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
};

/// Maximizes the log-likelihood in theta with H held fixed.
ThetaFit maximize_theta(const Dataset& data, const StepTransform& h, const ModelParams& start,
                        const ModelSpec& spec, BfgsState* state = nullptr,
                        bool include_log_n = false, int max_iterations = 200);

/// Alternates update_jumps and maximize_theta until both the parameters and
/// the jump sizes move by less than their tolerances.
FitResult fit(const Dataset& data, const ModelSpec& spec, const FitConfig& config = {});

struct BootstrapResult {
  std::vector<std::string> names;
  std::vector<double> estimate;
  std::vector<double> se;
  std::vector<double> p_value;  // NaN where degenerate
  std::vector<bool> degenerate;
  /// Parameter vectors of the retained replicates, flat layout.
  std::vector<std::vector<double>> replicates;
  int requested = 0;
  int failed = 0;
  bool unreliable = false;
};

/// Nonparametric bootstrap: rows resampled with replacement, each replicate
/// refit from the base fit. Replicate b draws from derive_seed(seed, b).
BootstrapResult bootstrap_se(const Dataset& data, const ModelSpec& spec, const FitConfig& config,
                             const FitResult& base, int B, std::uint64_t seed);
/// Same, with the resampled row indices supplied by the caller.
BootstrapResult bootstrap_se_indices(const Dataset& data, const ModelSpec& spec,
                                     const FitConfig& config, const FitResult& base,
                                     const std::vector<std::vector<std::size_t>>& resamples);

/// SE, Wald p-values and degeneracy flags from replicate parameter vectors.
BootstrapResult summarize_bootstrap(const ModelParams& estimate, std::size_t p, std::size_t q,
                                    std::vector<std::vector<double>> replicates, int requested);

double wald_p_value(double estimate, double se);

}  // namespace depcens
