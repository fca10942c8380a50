#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "depcens/estimator.hpp"

namespace depcens {

/// Right-continuous step CDF: value(t) is the probability at the last
/// stored time <= t, and 0 before the first.
struct StepCdf {
  std::vector<double> times;
  std::vector<double> probs;

  double operator()(double t) const;
};

/// Product-limit estimate of the CDF from right-censored times. Stored at
/// every distinct time.
StepCdf kaplan_meier(std::span<const double> times, std::span<const int> events);

/// Covariate-averaged model CDF of V = min(T, C):
/// (1/n) sum [F_T(H(v) - x'b) + F_C(H(v) - w'e) - C(F_T, F_C)].
double model_cdf_V(double v, const FitResult& fit, const ModelSpec& spec, const Dataset& data);
std::vector<double> model_cdf_V(std::span<const double> v, const FitResult& fit,
                                const ModelSpec& spec, const Dataset& data);

/// sum_i (a_i - b_i)^2.
double cramer_von_mises_statistic(std::span<const double> a, std::span<const double> b);
/// T_CM over the observed times, KM built from (Z, zeta).
double cramer_von_mises(const FitResult& fit, const ModelSpec& spec, const Dataset& data);

/// Observed times sorted ascending with F_KM and F_V at each.
struct GofCurve {
  std::vector<double> v;
  std::vector<double> f_km;
  std::vector<double> f_v;
};
GofCurve gof_curve(const FitResult& fit, const ModelSpec& spec, const Dataset& data);

struct GofResult {
  double t_cm = 0.0;
  std::vector<double> replicates;
  double p_value = 0.0;
  int requested = 0;
  int dropped = 0;
  bool unreliable = false;
  /// Share of inverse-transform draws above the range of H (set to +inf).
  double clamp_fraction = 0.0;
};

/// p = (1/B) sum I(T* > t_cm) over the retained replicates.
double gof_p_value(double t_cm, std::span<const double> replicates);

/// One parametric-bootstrap dataset drawn from the fitted model. Errors from
/// the fitted copula and margins, times through the inverse of H, and
/// administrative censoring from the KM estimate of A (1 - zeta as the event
/// indicator).
struct BootstrapSample {
  Dataset data;
  int clamped = 0;  // draws above the range of H
};
BootstrapSample draw_gof_sample(const FitResult& fit, const ModelSpec& spec, const Dataset& data,
                                const StepCdf& admin_cdf, Rng& rng);

/// Parametric bootstrap of T_CM. Replicate b uses derive_seed(seed, b) and is
/// refit from the original fit.
GofResult bootstrap_gof(const FitResult& fit, const ModelSpec& spec, const Dataset& data,
                        const FitConfig& config, int B, std::uint64_t seed);

}  // namespace depcens
