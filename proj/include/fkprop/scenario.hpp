#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fkprop/core_model.hpp"
#include "fkprop/generators.hpp"

namespace fkprop {

// Fixed-step solver settings for the propagator ODEs.
struct SolverConfig {
  double step = 1e-3;
};

// A complete model instance: state space, evolving measure family, generator
// family with speed factor, the reporting grid, and solver settings. An
// optional index subset marks a sub-population of interest.
struct Scenario {
  StateSpace states;
  MeasureFamily measures;
  GeneratorFamily generator;
  TimeGrid grid;
  SolverConfig solver;
  std::optional<std::vector<int>> subset;
  std::string name = "scenario";

  int size() const { return states.size(); }

  // lambda_t * L_t as a dense matrix.
  Eigen::MatrixXd markov_operator(double t) const;

  // lambda_t * L_t - diag(H_t): the backward-equation operator.
  Eigen::MatrixXd weighted_operator(double t) const;

  // Coarse bound on sup_t (lambda_t max|L_t(x,x)| + max|H_t|) over the grid,
  // sampled at grid knots and midpoints.
  double max_activity() const;

  // Stability guard for the fixed-step integrator: 0.1 / (1 + max_activity).
  double guard_step() const;

  // Throws ConfigError when step exceeds the guard.
  void validate_step(double step) const;

  // Checks detailed balance of L_t w.r.t. mu_t on all grid knots.
  void require_reversible(double tol = 1e-12) const;
};

// Scenario with solver step set to min(grid step, 0.999 * guard).
Scenario with_default_solver(Scenario s);

}  // namespace fkprop
