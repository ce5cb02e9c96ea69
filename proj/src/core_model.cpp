#include "fkprop/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "fkprop/numerics.hpp"

namespace fkprop {

// ---------------------------------------------------------------------------
// StateSpace

StateSpace::StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) {
    throw ConfigError("StateSpace: need at least two states");
  }
  std::set<std::string> distinct(labels_.begin(), labels_.end());
  if (distinct.size() != labels_.size()) {
    throw ConfigError("StateSpace: labels must be distinct");
  }
}

StateSpace StateSpace::indexed(int count) {
  std::vector<std::string> labels;
  labels.reserve(count);
  for (int i = 0; i < count; ++i) labels.push_back(std::to_string(i));
  return StateSpace(std::move(labels));
}

// ---------------------------------------------------------------------------
// ProbabilityVector

ProbabilityVector::ProbabilityVector(Eigen::VectorXd weights)
    : weights_(std::move(weights)) {
  if (weights_.size() == 0) throw ConfigError("ProbabilityVector: empty");
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (!(weights_(i) > 0.0) || !std::isfinite(weights_(i))) {
      throw ConfigError("ProbabilityVector: weights must be strictly positive");
    }
  }
  const double sum = weights_.sum();
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ConfigError("ProbabilityVector: weights must sum to 1 (got " +
                      format_double(sum) + ")");
  }
}

ProbabilityVector ProbabilityVector::uniform(int count) {
  return ProbabilityVector(Eigen::VectorXd::Constant(count, 1.0 / count));
}

double expectation(const StateFunction& f, const ProbabilityVector& mu) {
  if (f.size() != mu.weights().size()) {
    throw DimensionError("expectation: dimension mismatch");
  }
  return f.dot(mu.weights());
}

double variance(const StateFunction& f, const ProbabilityVector& mu) {
  const double mean = expectation(f, mu);
  double acc = 0.0;
  for (int i = 0; i < mu.size(); ++i) {
    const double d = f(i) - mean;
    acc += d * d * mu[i];
  }
  return acc;
}

// ---------------------------------------------------------------------------
// TimeGrid

TimeGrid::TimeGrid(double t_start, double t_end, int segments)
    : t0_(t_start), t1_(t_end), segments_(segments) {
  if (!(t_end > t_start)) throw ConfigError("TimeGrid: t_end must exceed t_start");
  if (!(t_start >= 0.0)) throw ConfigError("TimeGrid: t_start must be >= 0");
  if (segments < 1) throw ConfigError("TimeGrid: need at least one segment");
  if (!std::isfinite(t_start) || !std::isfinite(t_end)) {
    throw ConfigError("TimeGrid: endpoints must be finite");
  }
}

double TimeGrid::knot(int i) const {
  if (i < 0 || i > segments_) throw ConfigError("TimeGrid: knot index out of range");
  if (i == segments_) return t1_;
  return t0_ + i * step();
}

std::vector<double> TimeGrid::knots() const {
  std::vector<double> out(knot_count());
  for (int i = 0; i < knot_count(); ++i) out[i] = knot(i);
  return out;
}

bool TimeGrid::contains(double t) const {
  return t >= t0_ - 1e-12 && t <= t1_ + 1e-12;
}

// ---------------------------------------------------------------------------
// EnergySchedule

namespace {

struct LinearData {
  StateFunction base;
};

struct PiecewiseData {
  std::vector<double> times;
  std::vector<StateFunction> values;
};

struct EndpointData {
  int count = 0;
  double eps = 0.0;
  double omega = 0.0;
};

}  // namespace

struct EnergySchedule::Impl {
  Form form;
  LinearData linear;
  PiecewiseData piecewise;
  EndpointData endpoint;
  std::unique_ptr<EnergySchedule> parent;  // restriction only
  std::vector<int> indices;                // restriction only
  int size = 0;
};

EnergySchedule::EnergySchedule(std::shared_ptr<const Impl> impl)
    : impl_(std::move(impl)) {}

EnergySchedule EnergySchedule::linear(StateFunction base) {
  if (base.size() == 0) throw ConfigError("EnergySchedule::linear: empty base");
  if (!base.allFinite()) throw ConfigError("EnergySchedule::linear: non-finite base");
  auto impl = std::make_shared<Impl>();
  impl->form = Form::linear;
  impl->size = static_cast<int>(base.size());
  impl->linear.base = std::move(base);
  return EnergySchedule(std::move(impl));
}

EnergySchedule EnergySchedule::piecewise_linear(std::vector<double> times,
                                                std::vector<StateFunction> values) {
  if (times.empty() || times.size() != values.size()) {
    throw ConfigError("EnergySchedule::piecewise_linear: times/values mismatch");
  }
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    if (!(times[i] < times[i + 1])) {
      throw ConfigError(
          "EnergySchedule::piecewise_linear: times must be strictly increasing");
    }
  }
  const Eigen::Index dim = values.front().size();
  if (dim == 0) throw ConfigError("EnergySchedule::piecewise_linear: empty values");
  for (const auto& v : values) {
    if (v.size() != dim) {
      throw DimensionError("EnergySchedule::piecewise_linear: ragged values");
    }
    if (!v.allFinite()) {
      throw ConfigError("EnergySchedule::piecewise_linear: non-finite value");
    }
  }
  auto impl = std::make_shared<Impl>();
  impl->form = Form::piecewise_linear;
  impl->size = static_cast<int>(dim);
  impl->piecewise.times = std::move(times);
  impl->piecewise.values = std::move(values);
  return EnergySchedule(std::move(impl));
}

EnergySchedule EnergySchedule::endpoint_transfer(int state_count, double eps,
                                                 double omega) {
  if (state_count < 2) {
    throw ConfigError("EnergySchedule::endpoint_transfer: need >= 2 states");
  }
  if (!(eps > 0.0 && eps < 1.0)) {
    throw ConfigError("EnergySchedule::endpoint_transfer: eps must be in (0,1)");
  }
  if (!(omega > 0.0)) {
    throw ConfigError("EnergySchedule::endpoint_transfer: omega must be > 0");
  }
  auto impl = std::make_shared<Impl>();
  impl->form = Form::endpoint_transfer;
  impl->size = state_count;
  impl->endpoint = {state_count, eps, omega};
  return EnergySchedule(std::move(impl));
}

EnergySchedule EnergySchedule::restriction(const EnergySchedule& parent,
                                           std::vector<int> indices) {
  if (indices.empty()) {
    throw ConfigError("EnergySchedule::restriction: empty index set");
  }
  std::set<int> distinct(indices.begin(), indices.end());
  if (distinct.size() != indices.size()) {
    throw ConfigError("EnergySchedule::restriction: duplicate indices");
  }
  for (int i : indices) {
    if (i < 0 || i >= parent.size()) {
      throw ConfigError("EnergySchedule::restriction: index out of range");
    }
  }
  auto impl = std::make_shared<Impl>();
  impl->form = Form::restriction;
  impl->size = static_cast<int>(indices.size());
  impl->parent = std::make_unique<EnergySchedule>(parent);
  impl->indices = std::move(indices);
  return EnergySchedule(std::move(impl));
}

EnergySchedule::Form EnergySchedule::form() const { return impl_->form; }
int EnergySchedule::size() const { return impl_->size; }

double EnergySchedule::transfer_eps() const {
  if (impl_->form != Form::endpoint_transfer) {
    throw ConfigError("EnergySchedule: not an endpoint-transfer schedule");
  }
  return impl_->endpoint.eps;
}

double EnergySchedule::transfer_omega() const {
  if (impl_->form != Form::endpoint_transfer) {
    throw ConfigError("EnergySchedule: not an endpoint-transfer schedule");
  }
  return impl_->endpoint.omega;
}

double EnergySchedule::value_component(double t, int x) const {
  const Impl& d = *impl_;
  switch (d.form) {
    case Form::linear:
      return t * d.linear.base(x);
    case Form::piecewise_linear: {
      const auto& times = d.piecewise.times;
      const auto& values = d.piecewise.values;
      if (t <= times.front()) return values.front()(x);
      if (t >= times.back()) return values.back()(x);
      const auto it = std::upper_bound(times.begin(), times.end(), t);
      const std::size_t j = static_cast<std::size_t>(it - times.begin()) - 1;
      const double w = (t - times[j]) / (times[j + 1] - times[j]);
      return (1.0 - w) * values[j](x) + w * values[j + 1](x);
    }
    case Form::endpoint_transfer: {
      const auto& e = d.endpoint;
      const double s = e.eps * std::sin(e.omega * t);
      if (x == 0) return -std::log1p(s);
      if (x == e.count - 1) return -std::log1p(-s);
      return 0.0;
    }
    case Form::restriction:
      return d.parent->value_component(t, d.indices[x]);
  }
  throw Error("EnergySchedule: unreachable");
}

double EnergySchedule::rate_component(double t, int x) const {
  const Impl& d = *impl_;
  switch (d.form) {
    case Form::linear:
      return d.linear.base(x);
    case Form::piecewise_linear: {
      const auto& times = d.piecewise.times;
      const auto& values = d.piecewise.values;
      if (t < times.front() || t >= times.back()) return 0.0;
      // right derivative: segment [j, j+1] with times[j] <= t < times[j+1]
      const auto it = std::upper_bound(times.begin(), times.end(), t);
      const std::size_t j = static_cast<std::size_t>(it - times.begin()) - 1;
      return (values[j + 1](x) - values[j](x)) / (times[j + 1] - times[j]);
    }
    case Form::endpoint_transfer: {
      const auto& e = d.endpoint;
      const double s = e.eps * std::sin(e.omega * t);
      const double c = e.eps * e.omega * std::cos(e.omega * t);
      if (x == 0) return -c / (1.0 + s);
      if (x == e.count - 1) return c / (1.0 - s);
      return 0.0;
    }
    case Form::restriction:
      return d.parent->rate_component(t, d.indices[x]);
  }
  throw Error("EnergySchedule: unreachable");
}

StateFunction EnergySchedule::value_at(double t) const {
  StateFunction out(size());
  for (int x = 0; x < size(); ++x) out(x) = value_component(t, x);
  return out;
}

StateFunction EnergySchedule::rate_at(double t) const {
  StateFunction out(size());
  for (int x = 0; x < size(); ++x) out(x) = rate_component(t, x);
  return out;
}

// ---------------------------------------------------------------------------
// MeasureFamily

struct MeasureFamily::Impl {
  ProbabilityVector initial;
  EnergySchedule schedule;
  Eigen::VectorXd log_initial;
  bool centered_for_free;  // endpoint transfer over a uniform initial measure

  Impl(ProbabilityVector mu0, EnergySchedule sched)
      : initial(std::move(mu0)), schedule(std::move(sched)) {
    log_initial = initial.weights().array().log().matrix();
    const bool uniform =
        (initial.weights().maxCoeff() - initial.weights().minCoeff()) == 0.0;
    centered_for_free =
        uniform && schedule.form() == EnergySchedule::Form::endpoint_transfer;
  }
};

namespace {
void check_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw ConfigError("MeasureFamily: time must be finite and >= 0");
  }
}
}  // namespace

MeasureFamily::MeasureFamily(ProbabilityVector initial, EnergySchedule schedule) {
  if (initial.size() != schedule.size()) {
    throw DimensionError("MeasureFamily: initial measure / schedule size mismatch");
  }
  // mu_t = exp(-E_t) mu_0 / Z_t can only reproduce mu_0 at t = 0 when the
  // initial energy snapshot is constant across states.
  double lo = kInf, hi = -kInf;
  for (int x = 0; x < schedule.size(); ++x) {
    const double v = schedule.value_component(0.0, x);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi - lo <= 1e-9)) {
    throw ConfigError(
        "MeasureFamily: energy at t=0 must be constant across states "
        "(fold any offset into the initial measure)");
  }
  impl_ = std::make_shared<const Impl>(std::move(initial), std::move(schedule));
}

int MeasureFamily::size() const { return impl_->initial.size(); }
const ProbabilityVector& MeasureFamily::initial() const { return impl_->initial; }
const EnergySchedule& MeasureFamily::schedule() const { return impl_->schedule; }

double MeasureFamily::log_normalizer(double t) const {
  check_time(t);
  const int n = size();
  double peak = -kInf;
  for (int x = 0; x < n; ++x) {
    const double lw = impl_->log_initial(x) - impl_->schedule.value_component(t, x);
    peak = std::max(peak, lw);
  }
  if (!std::isfinite(peak)) {
    throw ConfigError("MeasureFamily: non-finite energy at t=" + format_double(t));
  }
  double acc = 0.0;
  for (int x = 0; x < n; ++x) {
    acc += std::exp(impl_->log_initial(x) - impl_->schedule.value_component(t, x) -
                    peak);
  }
  return peak + std::log(acc);
}

ProbabilityVector MeasureFamily::measure_at(double t) const {
  check_time(t);
  const int n = size();
  Eigen::VectorXd logw(n);
  for (int x = 0; x < n; ++x) {
    logw(x) = impl_->log_initial(x) - impl_->schedule.value_component(t, x);
    if (!std::isfinite(logw(x))) {
      throw ConfigError("MeasureFamily: non-finite energy at t=" + format_double(t));
    }
  }
  const double peak = logw.maxCoeff();
  Eigen::VectorXd w = (logw.array() - peak).exp().matrix();
  w /= w.sum();
  return ProbabilityVector(std::move(w));
}

double MeasureFamily::measure_component(double t, int x) const {
  check_time(t);
  return std::exp(impl_->log_initial(x) - impl_->schedule.value_component(t, x) -
                  log_normalizer(t));
}

StateFunction MeasureFamily::potential_at(double t) const {
  check_time(t);
  const int n = size();
  StateFunction rate(n);
  for (int x = 0; x < n; ++x) rate(x) = impl_->schedule.rate_component(t, x);
  if (impl_->centered_for_free) return rate;
  const ProbabilityVector mu = measure_at(t);
  const double mean = rate.dot(mu.weights());
  return rate.array() - mean;
}

double MeasureFamily::potential_component(double t, int x) const {
  if (impl_->centered_for_free) {
    // Endpoint transfer over a uniform initial measure is exactly centered:
    // mu_t(0) rate(0) + mu_t(n) rate(n) = (-e w cos + e w cos)/(n+1) = 0.
    return impl_->schedule.rate_component(t, x);
  }
  check_time(t);
  const int n = size();
  // One pass for the normalizer and the weighted mean rate.
  double peak = -kInf;
  for (int y = 0; y < n; ++y) {
    const double lw = impl_->log_initial(y) - impl_->schedule.value_component(t, y);
    peak = std::max(peak, lw);
  }
  double z = 0.0, mean = 0.0;
  for (int y = 0; y < n; ++y) {
    const double w = std::exp(impl_->log_initial(y) -
                              impl_->schedule.value_component(t, y) - peak);
    z += w;
    mean += w * impl_->schedule.rate_component(t, y);
  }
  return impl_->schedule.rate_component(t, x) - mean / z;
}

ProbabilityVector MeasureFamily::reconstruct_measure(double t, double max_step) const {
  check_time(t);
  const int n = size();
  Eigen::VectorXd w(n);
  for (int x = 0; x < n; ++x) {
    const double integral = simpson_with_step(
        [&](double s) { return potential_component(s, x); }, 0.0, t, max_step);
    w(x) = impl_->initial[x] * std::exp(-integral);
  }
  w /= w.sum();
  return ProbabilityVector(std::move(w));
}

MeasureFamily MeasureFamily::restrict(const std::vector<int>& indices) const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || indices[k] >= size()) {
      throw ConfigError("MeasureFamily::restrict: index out of range");
    }
    w(static_cast<Eigen::Index>(k)) = impl_->initial[indices[k]];
  }
  w /= w.sum();
  return MeasureFamily(ProbabilityVector(std::move(w)),
                       EnergySchedule::restriction(impl_->schedule, indices));
}

}  // namespace fkprop
