#include "depcens/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace depcens {

void validate(const Observation& obs) {
  if (!std::isfinite(obs.z)) {
    throw InvalidInput("observation time must be finite");
  }
  if ((obs.delta != 0 && obs.delta != 1) || (obs.xi != 0 && obs.xi != 1)) {
    throw InvalidInput("indicators delta and xi must be 0 or 1");
  }
  if (obs.delta + obs.xi > 1) {
    throw InvalidInput("delta+xi > 1");
  }
}

Dataset::Dataset(std::vector<Observation> observations, std::size_t p, std::size_t q)
    : observations_(std::move(observations)), p_(p), q_(q) {
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    const auto& obs = observations_[i];
    try {
      validate(obs);
    } catch (const InvalidInput& e) {
      std::ostringstream msg;
      msg << "observation " << i << ": " << e.what();
      throw InvalidInput(msg.str());
    }
    if (obs.x.size() != p_ || obs.w.size() != q_) {
      std::ostringstream msg;
      msg << "observation " << i << ": covariate dimensions (" << obs.x.size() << ", "
          << obs.w.size() << ") do not match dataset (" << p_ << ", " << q_ << ")";
      throw InvalidInput(msg.str());
    }
  }
}

std::size_t Dataset::count_events() const {
  return static_cast<std::size_t>(
      std::count_if(begin(), end(), [](const Observation& o) { return o.is_event(); }));
}

std::size_t Dataset::count_dependent_censored() const {
  return static_cast<std::size_t>(std::count_if(
      begin(), end(), [](const Observation& o) { return o.is_dependent_censoring(); }));
}

std::size_t Dataset::count_administrative() const {
  return static_cast<std::size_t>(
      std::count_if(begin(), end(), [](const Observation& o) { return o.is_administrative(); }));
}

void Dataset::require_fittable() const {
  if (count_events() == 0) {
    throw InvalidInput("dataset has no observed events (delta=1)");
  }
  if (count_dependent_censored() == 0) {
    throw InvalidInput("dataset has no dependent censoring (xi=1)");
  }
  if (count_administrative() == 0) {
    throw InvalidInput("dataset has no administrative censoring (delta=xi=0)");
  }
}

std::vector<double> ModelParams::to_vector() const {
  std::vector<double> v;
  v.reserve(size());
  v.insert(v.end(), beta.begin(), beta.end());
  v.insert(v.end(), eta.begin(), eta.end());
  v.push_back(lambda_t);
  v.push_back(lambda_c);
  v.push_back(r);
  return v;
}

ModelParams ModelParams::from_vector(std::span<const double> v, std::size_t p, std::size_t q) {
  if (v.size() != p + q + 3) {
    throw InvalidInput("parameter vector has wrong length");
  }
  ModelParams out;
  out.beta.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(p));
  out.eta.assign(v.begin() + static_cast<std::ptrdiff_t>(p),
                 v.begin() + static_cast<std::ptrdiff_t>(p + q));
  out.lambda_t = v[p + q];
  out.lambda_c = v[p + q + 1];
  out.r = v[p + q + 2];
  return out;
}

std::vector<std::string> ModelParams::names(std::size_t p, std::size_t q) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < p; ++j) out.push_back("beta" + std::to_string(j + 1));
  for (std::size_t j = 0; j < q; ++j) out.push_back("eta" + std::to_string(j + 1));
  out.emplace_back("lambda_T");
  out.emplace_back("lambda_C");
  out.emplace_back("r");
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidInput("dimension mismatch in linear predictor");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::pair<double, double> linear_predictors(const Observation& obs, const ModelParams& params) {
  return {dot(obs.x, params.beta), dot(obs.w, params.eta)};
}

// ---------------------------------------------------------------------------
// StepTransform

namespace {

void check_jumps(std::vector<Jump>& jumps, bool positive_side) {
  for (const auto& j : jumps) {
    if (!std::isfinite(j.time) || !std::isfinite(j.size) || j.size < 0.0) {
      throw InvalidInput("jump sizes must be finite and nonnegative");
    }
    if (positive_side ? !(j.time > 0.0) : !(j.time < 0.0)) {
      throw InvalidInput("jump time on the wrong side of the anchor H(0)=0");
    }
  }
  std::sort(jumps.begin(), jumps.end(),
            [](const Jump& a, const Jump& b) { return a.time < b.time; });
  for (std::size_t k = 1; k < jumps.size(); ++k) {
    if (jumps[k].time == jumps[k - 1].time) {
      throw InvalidInput("duplicate jump time");
    }
  }
}

}  // namespace

StepTransform::StepTransform(std::vector<Jump> positive, std::vector<Jump> negative)
    : positive_(std::move(positive)), negative_(std::move(negative)) {
  check_jumps(positive_, true);
  check_jumps(negative_, false);
  rebuild_sums();
}

StepTransform StepTransform::from_jumps(std::span<const Jump> jumps) {
  std::vector<Jump> pos;
  std::vector<Jump> neg;
  for (const auto& j : jumps) {
    if (j.time > 0.0) {
      pos.push_back(j);
    } else if (j.time < 0.0) {
      neg.push_back(j);
    } else {
      throw InvalidInput("jump at time 0 conflicts with the anchor H(0)=0");
    }
  }
  return StepTransform(std::move(pos), std::move(neg));
}

void StepTransform::rebuild_sums() {
  pos_cum_.resize(positive_.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < positive_.size(); ++k) {
    acc += positive_[k].size;
    pos_cum_[k] = acc;
  }
  neg_tail_.resize(negative_.size());
  acc = 0.0;
  for (std::size_t k = negative_.size(); k-- > 0;) {
    acc += negative_[k].size;
    neg_tail_[k] = acc;
  }
}

double StepTransform::eval(double z) const {
  if (z >= 0.0) {
    // jumps at points in (0, z]
    auto it = std::upper_bound(positive_.begin(), positive_.end(), z,
                               [](double t, const Jump& j) { return t < j.time; });
    const auto k = static_cast<std::size_t>(it - positive_.begin());
    return k == 0 ? 0.0 : pos_cum_[k - 1];
  }
  // jumps at points in [z, 0)
  auto it = std::lower_bound(negative_.begin(), negative_.end(), z,
                             [](const Jump& j, double t) { return j.time < t; });
  const auto k = static_cast<std::size_t>(it - negative_.begin());
  return k == negative_.size() ? 0.0 : -neg_tail_[k];
}

StepTransform::InverseResult StepTransform::inverse_checked(double y) const {
  if (empty()) {
    if (y == 0.0) return {0.0, false};
    throw DegenerateTransform("cannot invert a transform with no jumps");
  }
  if (y <= 0.0) {
    // -neg_tail_ is nondecreasing in k; find the first point with H >= y.
    auto it = std::partition_point(neg_tail_.begin(), neg_tail_.end(),
                                   [y](double tail) { return -tail < y; });
    if (it != neg_tail_.end()) {
      const auto k = static_cast<std::size_t>(it - neg_tail_.begin());
      const bool below = (k == 0 && y < -neg_tail_[0]);
      return {negative_[k].time, below};
    }
    return {0.0, negative_.empty() && y < 0.0};
  }
  auto it = std::lower_bound(pos_cum_.begin(), pos_cum_.end(), y);
  if (it == pos_cum_.end()) {
    return {positive_.empty() ? 0.0 : positive_.back().time, true};
  }
  return {positive_[static_cast<std::size_t>(it - pos_cum_.begin())].time, false};
}

double StepTransform::jump_at(double time) const {
  const auto& side = time > 0.0 ? positive_ : negative_;
  auto it = std::lower_bound(side.begin(), side.end(), time,
                             [](const Jump& j, double t) { return j.time < t; });
  if (it != side.end() && it->time == time) return it->size;
  return 0.0;
}

std::vector<Jump> StepTransform::jumps() const {
  std::vector<Jump> all;
  all.reserve(jump_count());
  all.insert(all.end(), negative_.begin(), negative_.end());
  all.insert(all.end(), positive_.begin(), positive_.end());
  return all;
}

}  // namespace depcens
