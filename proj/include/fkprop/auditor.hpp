#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "fkprop/inequalities.hpp"
#include "fkprop/norms.hpp"
#include "fkprop/propagator.hpp"
#include "fkprop/scenario.hpp"

namespace fkprop {

// One verified inequality instance. `pass` is exactly
// measured <= bound + tolerance; rows whose hypothesis failed are kept for
// falsification data but marked vacuous (the implication holds trivially).
struct AuditRow {
  double s = 0.0;
  double t = 0.0;
  bool hypothesis_ok = true;
  double hypothesis_margin = 0.0;  // min over sample times of lambda - threshold
  double lambda_required = 0.0;    // max threshold on [s, t] (0 if none)
  double measured = 0.0;
  double bound = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  bool vacuous = false;  // hypothesis failed; conclusion only informational
  std::string method;
  std::string note;
  Eigen::VectorXd witness;  // function achieving `measured` (may be empty)
};

// Flat audit result for one check over a scenario. all_pass() ignores
// vacuous rows: it is the "hypothesis implies conclusion" verdict.
struct AuditReport {
  std::string check_id;
  std::string scenario_name;
  std::map<std::string, double> parameters;
  std::vector<AuditRow> rows;

  bool all_pass() const;
  std::string to_csv() const;
  std::string to_json() const;
};

// Default acceptance slack for a bound: absolute 1e-7, switching to relative
// 1e-6 once the bound exceeds 10. Checks quote a wider slack where the
// measurement itself is a lower-bound search or quadrature.
double audit_tolerance(double bound);

// Pointwise speed threshold schedule for the p-norm contraction estimate:
// lambda_s = max(0, (p/4) a_s) + (p(p+3)/4) t b_s, evaluated on the constants
// grid, piecewise linear, with a 1% safety margin. binding_term records which
// summand dominates at each knot.
struct SpeedPlan {
  SpeedSchedule schedule = SpeedSchedule::constant(0.0);
  std::vector<double> times;
  std::vector<double> thresholds;  // before the safety margin
  std::vector<std::string> binding_term;
};

SpeedPlan plan_speed_for_contraction(const ConstantsReport& constants, double p,
                                     double t);

// Bounded p-norm estimate: for every grid s <= t, checks that the
// speed schedule dominates the threshold (p/4) a_r + (p(p+3)/4) t b_r on
// [s, t], measures ||q_{s,t}||_{p->p} against 2^{1/4}, and checks the
// two-norm variant ||q f||_p <= ||f||_p + 2^{1/4} ||f||_{p/2} on a
// deterministic probe battery.
AuditReport audit_contraction(const Scenario& sc, double p, double t);

// Integral recursion for <|q_{s,t}f|^p, mu_s> plus the side condition
// int_s^t p b_r / (4 lambda_r - p a_r) dr <= 1/(p+3) whenever the
// contraction threshold holds.
AuditReport audit_recursion(const Scenario& sc, double p, double t);

// Mean-zero exponential decay: part one is the exact L^2 operator norm on
// the mean-zero subspace against e^{-alpha (t-s)}; part two the L^p version
// (p a power of two) against e^{-alpha (t-s)} sqrt(2 + 1/(alpha beta)).
AuditReport audit_decay(const Scenario& sc, double p, double alpha, double beta,
                        double t);

// Variance-style decay with rate gamma for general (not mean-zero) f:
// the quadratic inequality with the (1 + 1/(kappa gamma)) mean term, and the
// p-th power version with the exponentially weighted time integral.
AuditReport audit_general_decay(const Scenario& sc, double p, double gamma,
                                double kappa, double t);

// Hypercontractivity: if int_s^t lambda_r / c_r dr >= (1/4) log((q-1)/(p-1))
// with c_r the certified log-Sobolev lower bound, then the p->q operator norm
// is at most exp(int_s^t max H_r^- dr). The time condition is evaluated twice
// (as computed, and with the log-Sobolev bound doubled) since only a lower
// bound on the optimal constant is certified.
AuditReport audit_hypercontractivity(const Scenario& sc, double p, double q_exp,
                                     double s, double t);

// A sub-population closed under the jump dynamics, carrying its conditional
// measures, recentered potential and mass curve.
struct RestrictedScenario {
  Scenario restricted;            // full sub-model on the subset
  std::vector<int> subset;        // sorted parent indices
  MeasureFamily parent_measures;  // for the mass curve (cheap shared copy)

  double mass(double t) const;       // total parent mass of the subset
  double mass_rate(double t) const;  // <H_t, conditional mu_t> = -d/dt log mass
};

// Validates closure of the subset under every generator (rates leaving the
// subset must vanish at all grid times, tolerance 1e-14; violation throws
// NotInvariantError naming the offending edge), builds the conditional
// measure family and restricted generator, and checks restricted detailed
// balance (residual <= 1e-12 at grid knots).
RestrictedScenario restrict_subset(const Scenario& sc,
                                   const std::vector<int>& subset);

// Audits the restricted-population bounds: the identity
// q block = (mass(t)/mass(s)) * restricted solve, the p-norm estimate with
// the mass-ratio factor, and both mean-zero decay bounds with the
// mass-ratio factor, all with constants computed on the restriction.
AuditReport audit_subset(const Scenario& sc, double p, double alpha,
                         double beta, double t);

// Unconditional norm bounds: the L^1 contraction (with equality on
// nonnegative functions), and exp(((p-1)/p) int_s^t max H_r^- dr) for
// p in {2, 4, infinity}.
AuditReport audit_rough(const Scenario& sc, double s, double t);

}  // namespace fkprop
