#include "fkprop/montecarlo.hpp"

#include <algorithm>
#include <cmath>

#include "fkprop/numerics.hpp"
#include "fkprop/parallel.hpp"

namespace fkprop {
namespace {

void check_path_arguments(const Scenario& sc, double s, int x, double t) {
  if (!(s <= t)) throw ConfigError("path simulation requires s <= t");
  if (s < sc.grid.t_start() - 1e-12 || t > sc.grid.t_end() + 1e-12) {
    throw ConfigError("path window must lie inside the scenario time grid");
  }
  if (x < 0 || x >= sc.size()) {
    throw ConfigError("start state index out of range");
  }
}

// int_a^b H_r(state) dr by composite Simpson with substep <= solver step.
double potential_integral(const Scenario& sc, int state, double a, double b) {
  if (b <= a) return 0.0;
  return simpson_with_step(
      [&](double r) { return sc.measures.potential_component(r, state); }, a, b,
      sc.solver.step);
}

}  // namespace

double dominating_rate(const Scenario& sc, double s, double t,
                       int refinement) {
  if (!(s <= t)) throw ConfigError("dominating_rate requires s <= t");
  if (refinement < 1) refinement = 1;
  const double substep = sc.solver.step / refinement;
  const int samples =
      std::max(1, static_cast<int>(std::ceil((t - s) / substep - 1e-12)));
  double peak = 0.0;
  for (int i = 0; i <= samples; ++i) {
    const double r = i == samples ? t : s + i * substep;
    const double lam = sc.generator.speed()(r);
    if (lam == 0.0) continue;
    peak = std::max(peak, lam * sc.generator.rates_at(r).max_exit_rate());
  }
  return 1.05 * peak;
}

PathSample simulate_path(const Scenario& sc, double s, int x, double t,
                         double dominating, SplitMix64& rng) {
  check_path_arguments(sc, s, x, t);
  if (dominating < 0.0) throw ConfigError("dominating rate must be >= 0");

  PathSample path;
  path.states.push_back(x);
  int state = x;
  double clock = s;
  double weight_integral = 0.0;

  while (true) {
    double next = t;
    if (dominating > 0.0) {
      next = clock + rng.exponential(dominating);
    }
    if (next >= t) {
      weight_integral += potential_integral(sc, state, clock, t);
      break;
    }
    weight_integral += potential_integral(sc, state, clock, next);
    clock = next;

    const QMatrix rates = sc.generator.rates_at(clock);
    const double lam = sc.generator.speed()(clock);
    const double exit = lam * std::abs(rates(state, state));
    if (exit > dominating) {
      throw DominatingRateError(
          "exact exit rate " + format_double(exit) + " at time " +
          format_double(clock) + " exceeds the dominating rate " +
          format_double(dominating));
    }
    const double u = rng.uniform() * dominating;
    double acc = 0.0;
    int target = -1;
    for (int z = 0; z < sc.size(); ++z) {
      if (z == state) continue;
      acc += lam * rates(state, z);
      if (u < acc) {
        target = z;
        break;
      }
    }
    if (target >= 0) {
      state = target;
      path.jump_times.push_back(clock);
      path.states.push_back(state);
    }
  }
  path.weight = std::exp(-weight_integral);
  return path;
}

PathSample simulate_path(const Scenario& sc, double s, int x, double t,
                         SplitMix64& rng) {
  return simulate_path(sc, s, x, t, dominating_rate(sc, s, t), rng);
}

namespace {

EstimatorResult estimate_impl(const Scenario& sc, double s, int x, double t,
                              const StateFunction& f, long n_paths,
                              std::uint64_t seed, bool with_weight) {
  check_path_arguments(sc, s, x, t);
  if (n_paths < 2) throw ConfigError("estimators need at least two paths");
  if (f.size() != sc.size()) {
    throw DimensionError("test function has the wrong dimension");
  }

  const int max_attempts = 4;
  for (int attempt = 0;; ++attempt) {
    const double dominating = dominating_rate(sc, s, t, 1 << attempt);
    try {
      std::vector<double> values(static_cast<std::size_t>(n_paths));
      parallel_for(0, n_paths, [&](std::int64_t i) {
        SplitMix64 rng(derive_stream_seed(seed, static_cast<std::uint64_t>(i)));
        const PathSample path = simulate_path(sc, s, x, t, dominating, rng);
        values[static_cast<std::size_t>(i)] =
            (with_weight ? path.weight : 1.0) * f(path.states.back());
      });
      const double n = static_cast<double>(n_paths);
      // A degenerate sample (all values identical, e.g. frozen dynamics) has
      // exactly zero spread; skip the arithmetic that would turn the rounding
      // of mean = sum/n into a spurious tiny standard error.
      const bool degenerate =
          std::all_of(values.begin(), values.end(),
                      [&](double v) { return v == values.front(); });
      const double mean = degenerate ? values.front() : pairwise_sum(values) / n;
      double variance = 0.0;
      if (!degenerate) {
        for (double& v : values) {
          const double d = v - mean;
          v = d * d;
        }
        variance = pairwise_sum(values) / (n - 1.0);
      }
      EstimatorResult out;
      out.mean = mean;
      out.std_error = std::sqrt(std::max(0.0, variance) / n);
      out.n_paths = n_paths;
      out.seed = seed;
      return out;
    } catch (const DominatingRateError&) {
      if (attempt + 1 >= max_attempts) throw;
    }
  }
}

}  // namespace

EstimatorResult fk_estimate(const Scenario& sc, double s, int x, double t,
                            const StateFunction& f, long n_paths,
                            std::uint64_t seed) {
  return estimate_impl(sc, s, x, t, f, n_paths, seed, true);
}

EstimatorResult markov_estimate(const Scenario& sc, double s, int x, double t,
                                const StateFunction& f, long n_paths,
                                std::uint64_t seed) {
  return estimate_impl(sc, s, x, t, f, n_paths, seed, false);
}

}  // namespace fkprop
