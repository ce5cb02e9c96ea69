#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "fkprop/errors.hpp"

namespace fkprop {

// Real-valued function on the (finite) state space, indexed like the labels.
using StateFunction = Eigen::VectorXd;

// Finite state space: an ordered list of distinct labels.
class StateSpace {
 public:
  explicit StateSpace(std::vector<std::string> labels);
  static StateSpace indexed(int count);  // labels "0", "1", ...

  int size() const { return static_cast<int>(labels_.size()); }
  const std::string& label(int i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
};

// Strictly positive weights summing to one (validated on construction).
class ProbabilityVector {
 public:
  explicit ProbabilityVector(Eigen::VectorXd weights);
  static ProbabilityVector uniform(int count);

  int size() const { return static_cast<int>(weights_.size()); }
  double operator[](int i) const { return weights_(i); }
  const Eigen::VectorXd& weights() const { return weights_; }

 private:
  Eigen::VectorXd weights_;
};

// <f, mu> = sum_x f(x) mu(x).
double expectation(const StateFunction& f, const ProbabilityVector& mu);

// Variance of f under mu.
double variance(const StateFunction& f, const ProbabilityVector& mu);

// Uniform time grid on [t_start, t_end] with `segments` equal steps.
class TimeGrid {
 public:
  TimeGrid(double t_start, double t_end, int segments);

  double t_start() const { return t0_; }
  double t_end() const { return t1_; }
  int segments() const { return segments_; }
  int knot_count() const { return segments_ + 1; }
  double step() const { return (t1_ - t0_) / segments_; }
  double knot(int i) const;
  std::vector<double> knots() const;
  bool contains(double t) const;

 private:
  double t0_, t1_;
  int segments_;
};

// Time-dependent energy schedule t |-> E_t (a vector over states). The family
// of measures is mu_t ~ exp(-E_t) mu_0, so E must be finite, continuous in t,
// piecewise-differentiable, and constant across states at t = 0 (otherwise
// mu at time 0 would not reproduce mu_0).
//
// Supported forms:
//   * linear:             E_t = t * base
//   * piecewise linear:   interpolates tabulated snapshots, clamped outside
//                         the knot range (time-derivative 0 there); at knots
//                         the right derivative is used
//   * endpoint transfer:  on a path of n+1 states, E_t(0) = -log(1+e sin wt),
//                         E_t(n) = -log(1-e sin wt), E_t = 0 in between;
//                         oscillates probability mass between the endpoints
//   * restriction:        component-wise restriction of a parent schedule to
//                         an index subset
// Instances are immutable and cheap to copy (shared representation).
class EnergySchedule {
 public:
  enum class Form { linear, piecewise_linear, endpoint_transfer, restriction };

  static EnergySchedule linear(StateFunction base);
  static EnergySchedule piecewise_linear(std::vector<double> times,
                                         std::vector<StateFunction> values);
  static EnergySchedule endpoint_transfer(int state_count, double eps,
                                          double omega);
  static EnergySchedule restriction(const EnergySchedule& parent,
                                    std::vector<int> indices);

  Form form() const;
  int size() const;

  double value_component(double t, int x) const;  // E_t(x)
  double rate_component(double t, int x) const;   // d/dt E_t(x), right deriv.
  StateFunction value_at(double t) const;
  StateFunction rate_at(double t) const;

  // Endpoint-transfer parameters (throws unless form() == endpoint_transfer).
  double transfer_eps() const;
  double transfer_omega() const;

 private:
  struct Impl;
  explicit EnergySchedule(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

// Family of probability measures mu_t = exp(-E_t) mu_0 / Z_t together with the
// centered potential H_t = d/dt E_t - <d/dt E_t, mu_t>, which satisfies
// d/dt mu_t = -H_t mu_t and <H_t, mu_t> = 0.
class MeasureFamily {
 public:
  MeasureFamily(ProbabilityVector initial, EnergySchedule schedule);

  int size() const;
  const ProbabilityVector& initial() const;
  const EnergySchedule& schedule() const;

  ProbabilityVector measure_at(double t) const;
  double measure_component(double t, int x) const;
  double log_normalizer(double t) const;  // log Z_t

  StateFunction potential_at(double t) const;   // H_t (centered)
  double potential_component(double t, int x) const;

  // Quadrature check of mu_t = mu_0 * exp(-int_0^t H_s ds) (renormalized to
  // absorb quadrature error): composite Simpson with substep <= max_step.
  ProbabilityVector reconstruct_measure(double t, double max_step) const;

  // Component-wise restriction to an index subset: initial weights are the
  // renormalized restriction of mu_0, the schedule restricts component-wise.
  MeasureFamily restrict(const std::vector<int>& indices) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

}  // namespace fkprop
