#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "fkprop/scenario.hpp"

namespace fkprop {

// Dense solution matrix of the backward/forward evolution equations for a
// time pair s <= t: entry (x, y) is the kernel q_{s,t}(x, y). kind==markov
// means the potential term was dropped (plain transition probabilities).
struct PropagatorMatrix {
  enum class Kind { feynman_kac, markov };

  double s = 0.0;
  double t = 0.0;
  Kind kind = Kind::feynman_kac;
  Eigen::MatrixXd entries;   // clamped to >= 0
  double min_entry_raw = 0.0;  // smallest entry before clamping
  double step = 0.0;           // solver step used

  std::string to_csv(const StateSpace& states) const;
};

// Solves the backward equation -d/ds M(s) = (lambda_s L_s - diag(H_s)) M(s)
// from the identity at time t down to s. Entries below -1e-8 raise
// SolverError; entries in [-1e-8, 0) are clamped to zero.
PropagatorMatrix solve_backward(const Scenario& sc, double s, double t);

// Solves the forward equation d/dt M(t) = M(t) (lambda_t L_t - diag(H_t))
// upward from the identity at s. Same result as solve_backward in exact
// arithmetic; solving both is a consistency check.
PropagatorMatrix solve_forward(const Scenario& sc, double s, double t);

// Backward solve with the potential dropped: transition probabilities of the
// underlying Markov process (rows sum to 1).
PropagatorMatrix markov_propagator(const Scenario& sc, double s, double t);

// One backward sweep from t capturing the solution at several start times
// (ascending s_values, all <= t). Cheaper than separate solves and exactly
// consistent with them up to partial-step placement.
std::vector<PropagatorMatrix> solve_backward_snapshots(
    const Scenario& sc, std::span<const double> s_values, double t,
    bool markov = false);

// int_s^t max_x H_r^-(x) dr by composite Simpson with substep <= solver step;
// exp of this is the growth factor in the pointwise and rough bounds.
double potential_negative_part_integral(const Scenario& sc, double s, double t);

// Residuals of the structural identities a propagator family must satisfy.
// All fields are defects (0 in exact arithmetic).
struct PropagatorDiagnostics {
  double s = 0.0, t = 0.0, midpoint = 0.0;
  double chapman_defect = 0.0;        // max |q_{s,m} q_{m,t} - q_{s,t}|
  double min_entry = 0.0;             // raw minimum entry of q_{s,t}
  double invariance_defect = 0.0;     // sum_y |(q^T mu_s)(y) - mu_t(y)|
  double pointwise_margin = 0.0;      // max(q - e^I p), positive part
  double markov_row_sum_defect = 0.0; // max_x |sum_y p(x,y) - 1|
  double growth_integral = 0.0;       // I = int_s^t max H_r^- dr

  std::string to_json() const;
};

PropagatorDiagnostics propagator_diagnostics(const Scenario& sc, double s,
                                             double t);

}  // namespace fkprop
