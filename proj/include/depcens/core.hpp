#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace depcens {

// Error taxonomy. Everything derives from std::exception types so callers
// that only care about "something went wrong" can catch the std base.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateTransform : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One subject: observed time z = min(T, C, A) with indicators
/// delta = I(z = T) and xi = I(z = C). delta = xi = 0 is administrative
/// censoring.
struct Observation {
  double z = 0.0;
  int delta = 0;
  int xi = 0;
  std::vector<double> x;
  std::vector<double> w;

  int zeta() const { return delta + xi; }
  bool is_event() const { return delta == 1; }
  bool is_dependent_censoring() const { return xi == 1; }
  bool is_administrative() const { return delta == 0 && xi == 0; }
};

void validate(const Observation& obs);

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Observation> observations, std::size_t p, std::size_t q);

  std::size_t size() const { return observations_.size(); }
  bool empty() const { return observations_.empty(); }
  std::size_t p() const { return p_; }
  std::size_t q() const { return q_; }

  const Observation& operator[](std::size_t i) const { return observations_[i]; }
  const std::vector<Observation>& observations() const { return observations_; }
  auto begin() const { return observations_.begin(); }
  auto end() const { return observations_.end(); }

  std::size_t count_events() const;
  std::size_t count_dependent_censored() const;
  std::size_t count_administrative() const;

  /// Throws InvalidInput unless all three observation types are present.
  void require_fittable() const;

 private:
  std::vector<Observation> observations_;
  std::size_t p_ = 0;
  std::size_t q_ = 0;
};

/// theta = (beta, eta, lambda_T, lambda_C, r). The copula family that gives
/// r its meaning travels separately (see ModelSpec).
struct ModelParams {
  std::vector<double> beta;
  std::vector<double> eta;
  double lambda_t = 1.0;
  double lambda_c = 1.0;
  double r = 0.0;

  std::size_t size() const { return beta.size() + eta.size() + 3; }

  /// Flat layout: beta..., eta..., lambda_T, lambda_C, r.
  std::vector<double> to_vector() const;
  static ModelParams from_vector(std::span<const double> v, std::size_t p, std::size_t q);

  /// Parameter names in flat layout order (beta1.., eta1.., lambda_T, lambda_C, r).
  static std::vector<std::string> names(std::size_t p, std::size_t q);
};

/// (x'beta, w'eta). Throws InvalidInput on dimension mismatch.
std::pair<double, double> linear_predictors(const Observation& obs, const ModelParams& params);
double dot(std::span<const double> a, std::span<const double> b);

struct Jump {
  double time = 0.0;
  double size = 0.0;
};

/// Right-continuous nondecreasing step function anchored at H(0) = 0.
/// Jumps on the positive axis accumulate upward from 0; jumps on the
/// negative axis accumulate downward from 0, so H(z) = -sum of negative
/// jumps in [z, 0) for z < 0.
class StepTransform {
 public:
  StepTransform() = default;
  StepTransform(std::vector<Jump> positive, std::vector<Jump> negative);

  /// Splits jumps by the sign of their time. Jumps at exactly 0 are rejected.
  static StepTransform from_jumps(std::span<const Jump> jumps);

  double operator()(double z) const { return eval(z); }
  double eval(double z) const;

  struct InverseResult {
    double z = 0.0;
    bool clamped = false;
  };
  /// Generalized inverse inf{z in jump points U {0} : H(z) >= y}, clamped to
  /// the largest point when y exceeds the range.
  InverseResult inverse_checked(double y) const;
  double inverse(double y) const { return inverse_checked(y).z; }

  /// Jump size at exactly `time`, or 0 when `time` is not a jump point.
  double jump_at(double time) const;

  const std::vector<Jump>& positive_jumps() const { return positive_; }
  const std::vector<Jump>& negative_jumps() const { return negative_; }
  /// All jumps ordered by time.
  std::vector<Jump> jumps() const;
  std::size_t jump_count() const { return positive_.size() + negative_.size(); }
  bool empty() const { return positive_.empty() && negative_.empty(); }

 private:
  void rebuild_sums();

  std::vector<Jump> positive_;  // ascending time, time > 0
  std::vector<Jump> negative_;  // ascending time, time < 0
  std::vector<double> pos_cum_;  // pos_cum_[k] = sum of positive_[0..k]
  std::vector<double> neg_tail_;  // neg_tail_[k] = sum of negative_[k..end)
};

}  // namespace depcens
