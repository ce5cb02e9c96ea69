#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fkprop/scenario.hpp"

namespace fkprop {

// Two states {0, 1}, uniform start, energy growing linearly on state 1,
// Metropolis exchange at unit speed, grid [0, 1] with 16 segments.
Scenario two_state_fixture();

// Same model with the jump dynamics switched off (speed 0): the propagator
// becomes the diagonal density ratio, which makes several bounds tight.
Scenario two_state_frozen();

// Path graph on `states` states with a time-constant uniform measure (zero
// potential) and Metropolis rates: plain symmetric random walk at the given
// speed.
Scenario uniform_path_scenario(int states, double t_end, int segments,
                               double lambda);

// The oscillating endpoint mass-transfer chain on {0, ..., n}: uniform start,
// probability mass (1 +/- eps sin(omega t))/(n+1) on the endpoints, uniform
// in between, Metropolis rates on the path graph.
Scenario endpoint_transfer_scenario(int n, double eps, double omega,
                                    double t_end, double grid_step,
                                    SpeedSchedule lambda);

// Four states in two disconnected pairs; energies shift mass between the
// pairs while each pair internally reproduces the two-state fixture. The
// declared subset {0, 1} is closed under the dynamics and its mass grows.
Scenario split_halves_scenario();

// One closed-form bound on a constant of the endpoint-transfer chain,
// compared against the exact value from the variational solvers.
struct BoundsRow {
  std::string name;
  double lower = 0.0;  // -inf when no lower bound is claimed
  double exact = 0.0;
  double upper = 0.0;  // +inf when no upper bound is claimed
  bool skipped = false;
  bool ok = true;
  std::string note;
};

struct TransferBoundsReport {
  int n = 0;
  double time = 0.0;
  bool relabeled = false;  // endpoints swapped so the shrinking one is state 0
  std::vector<BoundsRow> rows;

  bool all_ok() const;
  std::string to_csv() const;
  std::string to_json() const;
};

// Closed-form estimates for the endpoint-transfer chain (eps = 1/2,
// omega = 1) at one time: upper bounds for the two weighted constants (with
// the sup-potential variants when |H_t| <= 1), and two-sided bounds for the
// inverse spectral gap (lower bound requires n >= 4 and is skipped below).
TransferBoundsReport endpoint_transfer_bounds_report(int n, double time);

// The plateau-ramp function whose variance/energy ratio witnesses the n^2
// order of the inverse spectral gap: f(0) = 1, f(i) = i, f(n) = n - 1,
// evaluated on the endpoint-transfer chain at a uniform-measure time.
struct VarianceWitness {
  StateFunction f;
  double variance = 0.0;
  double dirichlet = 0.0;
  double ratio = 0.0;
};

VarianceWitness variance_lower_bound_witness(int n);

// Non-reversible nearest-neighbour generator that keeps the given measure
// family invariant under the *plain* Markov flow: symmetric base rate 1/2
// plus the minimal nonnegative per-bond adjustment making the net flux across
// every bond equal to -d/dt mu_t(0).
QMatrix nonlocal_drift_generator(int n, const MeasureFamily& measures,
                                 double t);

// Builds a Scenario from a JSON config document (schema in the README):
// sections states / measure / generator / lambda / time, optional solver and
// subset. All invariants are validated eagerly; error messages cite the
// offending JSON path.
Scenario load_scenario(const std::string& config_text);
Scenario load_scenario_file(const std::filesystem::path& path);

}  // namespace fkprop
