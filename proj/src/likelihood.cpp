#include "depcens/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "depcens/numerics.hpp"

namespace depcens {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double finite_or_neg_inf(double v) { return std::isnan(v) ? kNegInf : v; }

double log_omega_at(const BoundModel& m, double x1, double x2) {
  return std::log(omega(m, x1, x2));
}

double log_survival_at(const BoundModel& m, double x1, double x2) {
  return std::log(joint_survival(m, x1, x2));
}

double jump_or_throw(const StepTransform& h, double z) {
  const double jump = h.jump_at(z);
  if (!(jump > 0.0)) {
    throw InvalidState("transform has no positive jump at an uncensored time");
  }
  return jump;
}

}  // namespace

void ModelSpec::validate() const {
  if (marginal_t != MarginalFamily::LambdaHazard || marginal_c != MarginalFamily::LambdaHazard) {
    throw InvalidInput("fitted margins must use the lambda-hazard family");
  }
}

BoundModel BoundModel::bind(const ModelParams& params, const ModelSpec& spec) {
  return BoundModel{MarginalModel(spec.marginal_t, params.lambda_t),
                    MarginalModel(spec.marginal_c, params.lambda_c),
                    CopulaModel(spec.copula, params.r)};
}

PointEval evaluate_point(const BoundModel& m, double x1, double x2, bool second_order) {
  PointEval e;
  e.t = evaluate(m.margin_t, x1);
  e.c = evaluate(m.margin_c, x2);
  e.copula = evaluate_terms(m.copula, UnitPoint{e.t.cdf, e.t.sf}, UnitPoint{e.c.cdf, e.c.sf},
                            second_order);
  return e;
}

double log_event_term(const BoundModel& m, double x1, double x2) {
  const PointEval e = evaluate_point(m, x1, x2);
  return finite_or_neg_inf(e.t.log_pdf + std::log(e.copula.c1bar));
}

double log_depcens_term(const BoundModel& m, double x1, double x2) {
  const PointEval e = evaluate_point(m, x1, x2);
  return finite_or_neg_inf(e.c.log_pdf + std::log(e.copula.c2bar));
}

double log_admin_term(const BoundModel& m, double x1, double x2) {
  const PointEval e = evaluate_point(m, x1, x2);
  return finite_or_neg_inf(std::log(e.copula.survival));
}

double omega(const BoundModel& m, double x1, double x2) {
  const PointEval e = evaluate_point(m, x1, x2);
  return e.t.pdf * e.copula.c1bar + e.c.pdf * e.copula.c2bar;
}

double omega(double x1, double x2, const ModelParams& params, const ModelSpec& spec) {
  return omega(BoundModel::bind(params, spec), x1, x2);
}

double joint_survival(const BoundModel& m, double x1, double x2) {
  return evaluate_point(m, x1, x2).copula.survival;
}

double joint_survival(double x1, double x2, const ModelParams& params, const ModelSpec& spec) {
  return joint_survival(BoundModel::bind(params, spec), x1, x2);
}

double psi_point_numeric(const BoundModel& m, double x1, double x2, bool zeta) {
  const double step = 1e-6 * std::max(1.0, std::abs(x1));
  const auto f = zeta ? log_omega_at : log_survival_at;
  return -(f(m, x1 + step, x2 + step) - f(m, x1 - step, x2 - step)) / (2.0 * step);
}

double psi_point(const BoundModel& m, double x1, double x2, bool zeta) {
  const PointEval e = evaluate_point(m, x1, x2, zeta);
  const double ft = e.t.pdf;
  const double fc = e.c.pdf;
  const auto& k = e.copula;
  const double w = ft * k.c1bar + fc * k.c2bar;
  double value;
  if (zeta) {
    const double dw = ft * e.t.dlog_pdf * k.c1bar - ft * (k.c11 * ft + k.c12 * fc) +
                      fc * e.c.dlog_pdf * k.c2bar - fc * (k.c12 * ft + k.c22 * fc);
    value = w > 0.0 ? -dw / w : std::numeric_limits<double>::quiet_NaN();
  } else {
    value = k.survival > 0.0 ? w / k.survival : std::numeric_limits<double>::quiet_NaN();
  }
  if (std::isfinite(value)) return value;
  return psi_point_numeric(m, x1, x2, zeta);
}

// ---------------------------------------------------------------------------

double log_subdensity_event(const Observation& obs, const ModelParams& params,
                            const ModelSpec& spec, const StepTransform& h) {
  if (obs.delta != 1 || obs.xi != 0) throw InvalidInput("observation is not an event");
  const double jump = jump_or_throw(h, obs.z);
  const auto [xb, we] = linear_predictors(obs, params);
  const double hz = h(obs.z);
  return log_event_term(BoundModel::bind(params, spec), hz - xb, hz - we) + std::log(jump);
}

double log_subdensity_depcens(const Observation& obs, const ModelParams& params,
                              const ModelSpec& spec, const StepTransform& h) {
  if (obs.delta != 0 || obs.xi != 1) {
    throw InvalidInput("observation is not dependently censored");
  }
  const double jump = jump_or_throw(h, obs.z);
  const auto [xb, we] = linear_predictors(obs, params);
  const double hz = h(obs.z);
  return log_depcens_term(BoundModel::bind(params, spec), hz - xb, hz - we) + std::log(jump);
}

double log_subdensity_admin(const Observation& obs, const ModelParams& params,
                            const ModelSpec& spec, const StepTransform& h) {
  if (!obs.is_administrative()) {
    throw InvalidInput("observation is not administratively censored");
  }
  const auto [xb, we] = linear_predictors(obs, params);
  const double hz = h(obs.z);
  return log_admin_term(BoundModel::bind(params, spec), hz - xb, hz - we);
}

double psi(const Observation& obs, const ModelParams& params, const ModelSpec& spec,
           const StepTransform& h) {
  const auto [xb, we] = linear_predictors(obs, params);
  const double hz = h(obs.z);
  return psi_point(BoundModel::bind(params, spec), hz - xb, hz - we, obs.zeta() == 1);
}

// ---------------------------------------------------------------------------

TransformedSample::TransformedSample(const Dataset& data, const StepTransform& h)
    : data_(&data), h_(data.size()), log_jump_(data.size(), 0.0) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& obs = data[i];
    h_[i] = h(obs.z);
    if (obs.zeta() == 1) log_jump_[i] = std::log(h.jump_at(obs.z));
  }
}

double TransformedSample::loglik(const ModelParams& params, const ModelSpec& spec,
                                 bool include_log_n) const {
  return loglik(BoundModel::bind(params, spec), params, include_log_n);
}

double TransformedSample::loglik(const BoundModel& model, const ModelParams& params,
                                 bool include_log_n) const {
  const Dataset& data = *data_;
  const double log_n = std::log(static_cast<double>(data.size()));
  std::vector<double> terms(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& obs = data[i];
    const double x1 = h_[i] - dot(obs.x, params.beta);
    const double x2 = h_[i] - dot(obs.w, params.eta);
    double term;
    if (obs.delta == 1) {
      term = log_event_term(model, x1, x2) + log_jump_[i];
    } else if (obs.xi == 1) {
      term = log_depcens_term(model, x1, x2) + log_jump_[i];
    } else {
      term = log_admin_term(model, x1, x2);
    }
    if (include_log_n && obs.zeta() == 1) term += log_n;
    if (!(term > kNegInf) || std::isnan(term)) return kNegInf;
    terms[i] = term;
  }
  return pairwise_sum(terms);
}

double TransformedSample::loglik_gradient(const BoundModel& model, const ModelParams& params,
                                          std::span<double> grad, bool include_log_n) const {
  const Dataset& data = *data_;
  const std::size_t p = data.p();
  const std::size_t q = data.q();
  if (grad.size() != p + q + 2) throw InvalidInput("gradient buffer has the wrong size");
  std::fill(grad.begin(), grad.end(), 0.0);
  const double log_n = std::log(static_cast<double>(data.size()));
  std::vector<double> terms(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& obs = data[i];
    const double x1 = h_[i] - dot(obs.x, params.beta);
    const double x2 = h_[i] - dot(obs.w, params.eta);
    const PointEval e = evaluate_point(model, x1, x2, obs.zeta() == 1);
    const LambdaDerivatives lt = lambda_derivatives(model.margin_t, x1);
    const LambdaDerivatives lc = lambda_derivatives(model.margin_c, x2);
    const auto& k = e.copula;
    const double ft = e.t.pdf;
    const double fc = e.c.pdf;
    double term, d1, d2, dlt, dlc;
    if (obs.delta == 1) {
      term = e.t.log_pdf + std::log(k.c1bar) + log_jump_[i];
      d1 = e.t.dlog_pdf - k.c11 * ft / k.c1bar;
      d2 = -k.c12 * fc / k.c1bar;
      dlt = lt.dlog_pdf - k.c11 * lt.dcdf / k.c1bar;
      dlc = -k.c12 * lc.dcdf / k.c1bar;
    } else if (obs.xi == 1) {
      term = e.c.log_pdf + std::log(k.c2bar) + log_jump_[i];
      d1 = -k.c12 * ft / k.c2bar;
      d2 = e.c.dlog_pdf - k.c22 * fc / k.c2bar;
      dlt = -k.c12 * lt.dcdf / k.c2bar;
      dlc = lc.dlog_pdf - k.c22 * lc.dcdf / k.c2bar;
    } else {
      term = std::log(k.survival);
      d1 = -ft * k.c1bar / k.survival;
      d2 = -fc * k.c2bar / k.survival;
      dlt = -k.c1bar * lt.dcdf / k.survival;
      dlc = -k.c2bar * lc.dcdf / k.survival;
    }
    if (include_log_n && obs.zeta() == 1) term += log_n;
    if (!(term > kNegInf) || std::isnan(term)) return kNegInf;
    terms[i] = term;
    for (std::size_t j = 0; j < p; ++j) grad[j] -= obs.x[j] * d1;
    for (std::size_t j = 0; j < q; ++j) grad[p + j] -= obs.w[j] * d2;
    grad[p + q] += dlt;
    grad[p + q + 1] += dlc;
  }
  return pairwise_sum(terms);
}

double total_loglik(const Dataset& data, const ModelParams& params, const ModelSpec& spec,
                    const StepTransform& h) {
  return TransformedSample(data, h).loglik(params, spec);
}

double v_loglik(const Dataset& data, const ModelParams& params, const ModelSpec& spec,
                const StepTransform& h) {
  const BoundModel model = BoundModel::bind(params, spec);
  std::vector<double> terms(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& obs = data[i];
    const auto [xb, we] = linear_predictors(obs, params);
    const double hz = h(obs.z);
    double term;
    if (obs.zeta() == 1) {
      term = std::log(omega(model, hz - xb, hz - we)) + std::log(h.jump_at(obs.z));
    } else {
      term = std::log(joint_survival(model, hz - xb, hz - we));
    }
    if (std::isnan(term)) return kNegInf;
    terms[i] = term;
  }
  return pairwise_sum(terms);
}

std::vector<double> score(const Dataset& data, const ModelParams& params, const ModelSpec& spec,
                          const StepTransform& h) {
  const TransformedSample sample(data, h);
  const std::size_t p = data.p();
  const std::size_t q = data.q();
  const std::vector<double> theta = params.to_vector();
  const std::size_t lambda_t = p + q;
  const std::size_t lambda_c = p + q + 1;
  const std::size_t r_index = p + q + 2;

  const auto objective = [&](const std::vector<double>& v) {
    const ModelParams candidate = ModelParams::from_vector(v, p, q);
    if (candidate.lambda_t < 0.0 || candidate.lambda_c < 0.0 ||
        !CopulaModel::in_domain(spec.copula, candidate.r)) {
      return kNegInf;
    }
    return sample.loglik(candidate, spec);
  };

  const double f0 = objective(theta);
  if (!std::isfinite(f0)) throw InvalidState("log-likelihood is not finite at the score point");

  // Feasible interval for each coordinate.
  const auto bounds = [&](std::size_t j) -> std::pair<double, double> {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (j == lambda_t || j == lambda_c) return {0.0, inf};
    if (j == r_index) {
      switch (spec.copula) {
        case CopulaFamily::Gaussian:
          return {-1.0, 1.0};
        case CopulaFamily::Gumbel:
          return {1.0, inf};
        case CopulaFamily::Frank:
          break;
      }
    }
    return {-inf, inf};
  };

  std::vector<double> grad(theta.size());
  std::vector<double> probe = theta;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const auto [lo, hi] = bounds(j);
    double step = 1e-6 * std::max(1.0, std::abs(theta[j]));
    double gj = std::numeric_limits<double>::quiet_NaN();
    for (int attempt = 0; attempt < 5 && !std::isfinite(gj); ++attempt, step *= 0.5) {
      const bool can_up = theta[j] + step < hi;
      const bool can_down = theta[j] - step > lo;
      double fp = kNegInf;
      double fm = kNegInf;
      if (can_up) {
        probe[j] = theta[j] + step;
        fp = objective(probe);
      }
      if (can_down) {
        probe[j] = theta[j] - step;
        fm = objective(probe);
      }
      probe[j] = theta[j];
      if (std::isfinite(fp) && std::isfinite(fm)) {
        gj = (fp - fm) / (2.0 * step);
      } else if (std::isfinite(fp)) {
        gj = (fp - f0) / step;
      } else if (std::isfinite(fm)) {
        gj = (f0 - fm) / step;
      }
    }
    if (!std::isfinite(gj)) {
      throw InvalidState("score stencil is infeasible for parameter " + std::to_string(j));
    }
    grad[j] = gj;
  }
  return grad;
}

}  // namespace depcens
