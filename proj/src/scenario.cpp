#include "fkprop/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "fkprop/numerics.hpp"

namespace fkprop {

Eigen::MatrixXd Scenario::markov_operator(double t) const {
  return generator.speed()(t) * generator.rates_at(t).entries();
}

Eigen::MatrixXd Scenario::weighted_operator(double t) const {
  Eigen::MatrixXd op = markov_operator(t);
  const StateFunction h = measures.potential_at(t);
  op.diagonal() -= h;
  return op;
}

double Scenario::max_activity() const {
  double worst = 0.0;
  const int samples = 2 * grid.segments();
  for (int i = 0; i <= samples; ++i) {
    const double t =
        grid.t_start() + (grid.t_end() - grid.t_start()) * i / samples;
    const double activity = generator.speed()(t) * generator.rates_at(t).max_exit_rate() +
                            measures.potential_at(t).cwiseAbs().maxCoeff();
    worst = std::max(worst, activity);
  }
  return worst;
}

double Scenario::guard_step() const { return 0.1 / (1.0 + max_activity()); }

void Scenario::validate_step(double step) const {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw ConfigError("solver step must be finite and > 0");
  }
  const double guard = guard_step();
  if (step > guard * (1.0 + 1e-12)) {
    throw ConfigError("solver step " + format_double(step) +
                      " exceeds stability guard " + format_double(guard));
  }
}

void Scenario::require_reversible(double tol) const {
  for (double t : grid.knots()) {
    require_detailed_balance(generator.rates_at(t), measures.measure_at(t), tol);
  }
}

Scenario with_default_solver(Scenario s) {
  s.solver.step = std::min(s.grid.step(), 0.999 * s.guard_step());
  return s;
}

}  // namespace fkprop
