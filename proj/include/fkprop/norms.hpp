#pragma once

#include <Eigen/Dense>
#include <string>

#include "fkprop/core_model.hpp"
#include "fkprop/propagator.hpp"

namespace fkprop {

// (sum_x |f(x)|^p mu(x))^{1/p}; p = infinity gives max |f|.
double lp_norm(const StateFunction& f, const ProbabilityVector& mu, double p);

struct OperatorNormResult {
  double value = 0.0;
  std::string method;        // exact_svd | boyd_power | closed_form |
                             // probe_lower_bound | gradient_ascent
  long iterations = 0;
  bool converged = true;
  StateFunction maximizer;   // achieves `value` (up to reported tolerance)
  double probe_lower = 0.0;  // best random-probe ratio
  bool sensitivity_flag = false;  // zero-entry lift changed the answer
};

// Exact sup_f ||K f||_{L^2(mu_s)} / ||f||_{L^2(mu_t)}: largest singular value
// of D_s^{1/2} K D_t^{-1/2}.
OperatorNormResult operator_norm_2(const Eigen::MatrixXd& kernel,
                                   const ProbabilityVector& mu_s,
                                   const ProbabilityVector& mu_t);

// Same with f restricted to the mean-zero subspace of mu_t.
OperatorNormResult operator_norm_2_meanzero(const Eigen::MatrixXd& kernel,
                                            const ProbabilityVector& mu_s,
                                            const ProbabilityVector& mu_t);

// sup_f ||K f||_{L^q(mu_s)} / ||f||_{L^p(mu_t)} for a nonnegative kernel and
// 1 <= p <= q <= infinity. p = q = 1, p = q = infinity and p = q = 2 are
// closed-form/exact; all other pairs need 1 < p <= q < infinity and use the
// alternating dual-exponent power iteration for nonnegative kernels with
// zero entries lifted by eta = 1e-12, cross-checked at eta/10, plus 1e4
// random nonnegative probes as a certified lower bound.
OperatorNormResult operator_norm_pq(const Eigen::MatrixXd& kernel,
                                    const ProbabilityVector& mu_s,
                                    const ProbabilityVector& mu_t, double p,
                                    double q);

// sup over mean-zero f (w.r.t. mu_t) of ||K f||_{L^p(mu_s)} / ||f||_{L^p(mu_t)}.
// Exact at p = 2; otherwise projected gradient ascent from probe seeds -- a
// certified lower bound whose method field says so.
OperatorNormResult operator_norm_p_meanzero(const Eigen::MatrixXd& kernel,
                                            const ProbabilityVector& mu_s,
                                            const ProbabilityVector& mu_t,
                                            double p);

// Convenience overloads taking a solved propagator matrix.
OperatorNormResult operator_norm_pq(const PropagatorMatrix& q,
                                    const ProbabilityVector& mu_s,
                                    const ProbabilityVector& mu_t, double p,
                                    double q_exp);

}  // namespace fkprop
