#include "fkprop/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fkprop/numerics.hpp"

namespace fkprop {

// ---------------------------------------------------------------------------
// QMatrix

QMatrix::QMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() < 2) {
    throw DimensionError("QMatrix: need a square matrix of size >= 2");
  }
  const int n = static_cast<int>(entries_.rows());
  for (int x = 0; x < n; ++x) {
    double off_sum = 0.0;
    for (int y = 0; y < n; ++y) {
      if (x == y) continue;
      double r = entries_(x, y);
      if (!std::isfinite(r)) throw ConfigError("QMatrix: non-finite rate");
      if (r < 0.0) {
        if (r < -1e-12) {
          throw ConfigError("QMatrix: negative off-diagonal rate " +
                            format_double(r));
        }
        r = 0.0;
        entries_(x, y) = 0.0;
      }
      off_sum += r;
    }
    // A zero diagonal means "fill it in for me"; a nonzero one is validated.
    const double diag = entries_(x, x);
    if (diag != 0.0 && (!std::isfinite(diag) ||
                        std::abs(diag + off_sum) > 1e-9 * (1.0 + off_sum))) {
      throw ConfigError("QMatrix: row " + std::to_string(x) +
                        " does not sum to zero");
    }
    entries_(x, x) = -off_sum;  // enforce conservativity exactly
  }
}

double QMatrix::max_exit_rate() const {
  return entries_.diagonal().cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// EdgeSet

EdgeSet::EdgeSet(int state_count, std::vector<std::pair<int, int>> edges)
    : state_count_(state_count) {
  if (state_count < 2) throw ConfigError("EdgeSet: need at least two states");
  for (auto& [x, y] : edges) {
    if (x == y) throw ConfigError("EdgeSet: self-loop edge");
    if (x < 0 || y < 0 || x >= state_count || y >= state_count) {
      throw ConfigError("EdgeSet: edge endpoint out of range");
    }
    if (x > y) std::swap(x, y);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw ConfigError("EdgeSet: duplicate edge");
  }
  edges_ = std::move(edges);
}

EdgeSet EdgeSet::path(int state_count) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < state_count; ++i) edges.emplace_back(i, i + 1);
  return EdgeSet(state_count, std::move(edges));
}

EdgeSet EdgeSet::complete(int state_count) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < state_count; ++i) {
    for (int j = i + 1; j < state_count; ++j) edges.emplace_back(i, j);
  }
  return EdgeSet(state_count, std::move(edges));
}

bool EdgeSet::connected() const {
  std::vector<int> parent(state_count_);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& [x, y] : edges_) parent[find(x)] = find(y);
  const int root = find(0);
  for (int i = 1; i < state_count_; ++i) {
    if (find(i) != root) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// SpeedSchedule

SpeedSchedule SpeedSchedule::constant(double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw ConfigError("SpeedSchedule: value must be finite and >= 0");
  }
  SpeedSchedule s;
  s.constant_ = value;
  return s;
}

SpeedSchedule SpeedSchedule::piecewise_linear(std::vector<double> times,
                                              std::vector<double> values) {
  if (times.empty() || times.size() != values.size()) {
    throw ConfigError("SpeedSchedule: times/values mismatch");
  }
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    if (!(times[i] < times[i + 1])) {
      throw ConfigError("SpeedSchedule: times must be strictly increasing");
    }
  }
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("SpeedSchedule: values must be finite and >= 0");
    }
  }
  SpeedSchedule s;
  s.times_ = std::move(times);
  s.values_ = std::move(values);
  return s;
}

double SpeedSchedule::operator()(double t) const {
  if (times_.empty()) return constant_;
  if (t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - times_.begin()) - 1;
  const double w = (t - times_[j]) / (times_[j + 1] - times_[j]);
  return (1.0 - w) * values_[j] + w * values_[j + 1];
}

double SpeedSchedule::max_on(double a, double b) const {
  if (a > b) std::swap(a, b);
  if (times_.empty()) return constant_;
  double best = std::max((*this)(a), (*this)(b));
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (times_[i] > a && times_[i] < b) best = std::max(best, values_[i]);
  }
  return best;
}

// ---------------------------------------------------------------------------
// GeneratorFamily

struct GeneratorFamily::Impl {
  std::function<QMatrix(double)> builder;
  SpeedSchedule speed = SpeedSchedule::constant(0.0);
  std::string description;
};

GeneratorFamily::GeneratorFamily(std::shared_ptr<const Impl> impl)
    : impl_(std::move(impl)) {}

GeneratorFamily GeneratorFamily::metropolis(MeasureFamily measures, EdgeSet edges,
                                            SpeedSchedule speed) {
  if (edges.state_count() != measures.size()) {
    throw DimensionError("GeneratorFamily::metropolis: edge set size mismatch");
  }
  auto impl = std::make_shared<Impl>();
  impl->speed = std::move(speed);
  impl->description = "metropolis";
  impl->builder = [measures = std::move(measures),
                   edges = std::move(edges)](double t) {
    const int n = measures.size();
    const ProbabilityVector mu = measures.measure_at(t);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [x, y] : edges.edges()) {
      m(x, y) = 0.5 * std::min(mu[y] / mu[x], 1.0);
      m(y, x) = 0.5 * std::min(mu[x] / mu[y], 1.0);
    }
    return QMatrix(std::move(m));
  };
  return GeneratorFamily(std::move(impl));
}

GeneratorFamily GeneratorFamily::tabulated(std::vector<double> times,
                                           std::vector<QMatrix> values,
                                           SpeedSchedule speed) {
  if (times.empty() || times.size() != values.size()) {
    throw ConfigError("GeneratorFamily::tabulated: times/values mismatch");
  }
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    if (!(times[i] < times[i + 1])) {
      throw ConfigError("GeneratorFamily::tabulated: times must increase");
    }
  }
  const int n = values.front().size();
  for (const auto& q : values) {
    if (q.size() != n) {
      throw DimensionError("GeneratorFamily::tabulated: ragged matrices");
    }
  }
  auto impl = std::make_shared<Impl>();
  impl->speed = std::move(speed);
  impl->description = "tabulated";
  impl->builder = [times = std::move(times), values = std::move(values)](double t) {
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - times.begin()) - 1;
    const double w = (t - times[j]) / (times[j + 1] - times[j]);
    return QMatrix((1.0 - w) * values[j].entries() + w * values[j + 1].entries());
  };
  return GeneratorFamily(std::move(impl));
}

GeneratorFamily GeneratorFamily::custom(std::function<QMatrix(double)> builder,
                                        SpeedSchedule speed,
                                        std::string description) {
  if (!builder) throw ConfigError("GeneratorFamily::custom: empty builder");
  auto impl = std::make_shared<Impl>();
  impl->builder = std::move(builder);
  impl->speed = std::move(speed);
  impl->description = std::move(description);
  return GeneratorFamily(std::move(impl));
}

QMatrix GeneratorFamily::rates_at(double t) const { return impl_->builder(t); }
const SpeedSchedule& GeneratorFamily::speed() const { return impl_->speed; }
const std::string& GeneratorFamily::description() const {
  return impl_->description;
}

GeneratorFamily GeneratorFamily::restrict(const std::vector<int>& indices) const {
  if (indices.size() < 2) {
    throw ConfigError("GeneratorFamily::restrict: need at least two states");
  }
  std::set<int> distinct(indices.begin(), indices.end());
  if (distinct.size() != indices.size()) {
    throw ConfigError("GeneratorFamily::restrict: duplicate indices");
  }
  auto parent = impl_;
  auto idx = indices;
  auto impl = std::make_shared<Impl>();
  impl->speed = parent->speed;
  impl->description = parent->description + "|restricted";
  impl->builder = [parent, idx](double t) {
    const QMatrix full = parent->builder(t);
    const int m = static_cast<int>(idx.size());
    Eigen::MatrixXd sub(m, m);
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < m; ++b) sub(a, b) = full(idx[a], idx[b]);
      sub(a, a) = 0.0;  // recomputed by the QMatrix constructor
    }
    return QMatrix(std::move(sub));
  };
  return GeneratorFamily(std::move(impl));
}

// ---------------------------------------------------------------------------
// Free functions

double detailed_balance_defect(const QMatrix& rates, const ProbabilityVector& mu) {
  if (rates.size() != mu.size()) {
    throw DimensionError("detailed_balance_defect: size mismatch");
  }
  double worst = 0.0;
  for (int x = 0; x < rates.size(); ++x) {
    for (int y = x + 1; y < rates.size(); ++y) {
      worst = std::max(worst,
                       std::abs(mu[x] * rates(x, y) - mu[y] * rates(y, x)));
    }
  }
  return worst;
}

void require_detailed_balance(const QMatrix& rates, const ProbabilityVector& mu,
                              double tol) {
  const double defect = detailed_balance_defect(rates, mu);
  if (defect > tol) {
    throw PreconditionError("detailed balance violated: defect " +
                            format_double(defect) + " exceeds " +
                            format_double(tol));
  }
}

double dirichlet_form(const QMatrix& rates, const ProbabilityVector& mu,
                      const StateFunction& f, const StateFunction& g) {
  const int n = rates.size();
  if (mu.size() != n || f.size() != n || g.size() != n) {
    throw DimensionError("dirichlet_form: size mismatch");
  }
  double acc = 0.0;
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      if (x == y) continue;
      acc += (f(y) - f(x)) * (g(y) - g(x)) * rates(x, y) * mu[x];
    }
  }
  return 0.5 * acc;
}

Eigen::MatrixXd symmetrized_negative_generator(const QMatrix& rates,
                                               const ProbabilityVector& mu) {
  const int n = rates.size();
  if (mu.size() != n) {
    throw DimensionError("symmetrized_negative_generator: size mismatch");
  }
  Eigen::MatrixXd s(n, n);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      s(x, y) = -rates(x, y) * std::sqrt(mu[x] / mu[y]);
    }
  }
  return 0.5 * (s + s.transpose());
}

}  // namespace fkprop
