#pragma once

#include <cstdint>
#include <vector>

#include "fkprop/rng.hpp"
#include "fkprop/scenario.hpp"

namespace fkprop {

// One simulated trajectory of the jump process on [s, t] together with the
// accumulated exponential weight exp(-int_s^t H_r(X_r) dr).
struct PathSample {
  std::vector<double> jump_times;  // strictly increasing, in (s, t)
  std::vector<int> states;         // visited states; jump_times.size() + 1
  double weight = 1.0;             // > 0
};

struct EstimatorResult {
  double mean = 0.0;
  double std_error = 0.0;
  long n_paths = 0;
  std::uint64_t seed = 0;
};

// 1.05 times the largest jump intensity lambda_r * max_x |L_r(x,x)| found by
// scanning [s, t] at substep solver_step / refinement. The thinning clock
// runs at this rate.
double dominating_rate(const Scenario& sc, double s, double t,
                       int refinement = 1);

// Simulates one path by thinning against `dominating`: candidate event times
// from an exponential clock, accepted as a jump x -> z with probability
// lambda_r L_r(x,z) / dominating. The weight integral uses composite Simpson
// with substep <= solver step on each inter-event segment. Throws
// DominatingRateError if an exact exit rate at a candidate time exceeds the
// dominating rate.
PathSample simulate_path(const Scenario& sc, double s, int x, double t,
                         double dominating, SplitMix64& rng);

// Convenience overload using dominating_rate(sc, s, t).
PathSample simulate_path(const Scenario& sc, double s, int x, double t,
                         SplitMix64& rng);

// Monte Carlo estimate of (q_{s,t} f)(x): mean and standard error of
// weight * f(X_t) over n_paths independent paths (stream i seeded from
// (seed, i), so the result does not depend on thread count). If the
// dominating rate is ever exceeded the scan is refined and the whole run
// restarts, at most three times.
EstimatorResult fk_estimate(const Scenario& sc, double s, int x, double t,
                            const StateFunction& f, long n_paths,
                            std::uint64_t seed);

// Same with weight frozen to 1: estimates (p_{s,t} f)(x).
EstimatorResult markov_estimate(const Scenario& sc, double s, int x, double t,
                                const StateFunction& f, long n_paths,
                                std::uint64_t seed);

}  // namespace fkprop
