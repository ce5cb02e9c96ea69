#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fkprop/generators.hpp"
#include "fkprop/scenario.hpp"

namespace fkprop {

// Basis of the subspace { f : <f, mu> = 0 }, orthonormal w.r.t. the L^2(mu)
// inner product; columns of `columns` are the basis functions.
struct MeanZeroBasis {
  Eigen::MatrixXd columns;  // n x (n-1)

  static MeanZeroBasis build(const ProbabilityVector& mu);

  // Euclidean-orthonormal basis of the orthogonal complement of sqrt(mu)
  // (the same subspace seen through the similarity transform D^{1/2}).
  static Eigen::MatrixXd complement_of_sqrt(const ProbabilityVector& mu);
};

// Result of a variational constant computation: the optimal value and the
// function achieving it, plus conditioning diagnostics.
struct ConstantResult {
  double value = 0.0;
  StateFunction maximizer;
  double min_pivot = 0.0;   // smallest pivot of the projected Dirichlet form
  bool pivot_warning = false;
};

// Optimal constant in Var_mu(f) <= C * E(f): the inverse spectral gap of the
// symmetrized generator. Returns +infinity for reducible chains.
double poincare_constant(const QMatrix& rates, const ProbabilityVector& mu);

// Same, with the gap eigenvector attached (maximizer of Var/E). value may be
// +infinity, in which case the maximizer spans a nontrivial kernel direction.
ConstantResult poincare_constant_full(const QMatrix& rates,
                                      const ProbabilityVector& mu);

// Optimal constant in -int h f^2 dmu <= A * E(f) over mean-zero f: largest
// eigenvalue of the pencil (N, E) on the mean-zero subspace. May be <= 0;
// the exact supremum is returned either way.
ConstantResult weighted_poincare_quadratic(const QMatrix& rates,
                                           const ProbabilityVector& mu,
                                           const StateFunction& h);

// Optimal constant in (int h f dmu)^2 <= B * E(f) over mean-zero f: one
// linear solve against the projected Dirichlet form.
ConstantResult weighted_poincare_linear(const QMatrix& rates,
                                        const ProbabilityVector& mu,
                                        const StateFunction& h);

// (C * max_x h^-(x), C * Var_mu(h)): closed-form upper bounds for the two
// weighted constants in terms of the Poincare constant.
std::pair<double, double> comparison_bounds(double c, const ProbabilityVector& mu,
                                            const StateFunction& h);

struct LogSobolevOptions {
  int max_iterations = 10000;
  double rel_tol = 1e-10;
  int random_seeds = 16;
  std::uint64_t rng_seed = 0x5eedbeef12345678ULL;
};

struct LogSobolevResult {
  double value = 0.0;       // certified lower bound on the optimal constant
  StateFunction maximizer;
  int best_seed = -1;
  long iterations = 0;      // total ascent iterations across seeds
  bool converged = false;
};

// Lower bound on the optimal constant in Ent_mu(f^2) <= c * E(f), via
// multistart projected gradient ascent of the entropy/energy ratio on the
// unit L^2(mu) sphere. Deterministic. Every reported value is the exactly
// evaluated ratio at some explicit f, hence a valid lower bound.
LogSobolevResult log_sobolev_lower_bound(const QMatrix& rates,
                                         const ProbabilityVector& mu,
                                         const LogSobolevOptions& opt = {});

// Per-grid-knot constants of a scenario. Infinite values (reducible chain)
// propagate to every column of the affected row.
struct ConstantsRow {
  double time = 0.0;
  double c = 0.0;        // Poincare
  double a = 0.0;        // quadratic weighted constant
  double b = 0.0;        // linear weighted constant
  double c_ls_lower = 0.0;
  double a_comparison = 0.0;  // C * max h^-
  double b_comparison = 0.0;  // C * Var(h)
  double min_pivot = 0.0;
  long ls_iterations = 0;
  bool ls_converged = false;
};

struct ConstantsReport {
  std::string scenario_name;
  std::vector<ConstantsRow> rows;

  bool any_infinite() const;
  const ConstantsRow& row_at(double time) const;  // exact knot lookup
  // Piecewise-linear interpolation in time of a column accessor.
  double interpolate(double time, double ConstantsRow::*field) const;

  std::string to_csv() const;
  std::string to_json() const;
};

struct ConstantsOptions {
  bool with_log_sobolev = true;
  LogSobolevOptions ls;
};

ConstantsReport compute_constants(const Scenario& sc,
                                  const ConstantsOptions& opt = {});

}  // namespace fkprop
