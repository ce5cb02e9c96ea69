#include <doctest.h>

#include <cmath>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fkprop/inequalities.hpp"
#include "fkprop/io.hpp"
#include "fkprop/numerics.hpp"
#include "fkprop/propagator.hpp"
#include "fkprop/scenarios.hpp"
#include "test_helpers.hpp"

using namespace fkprop;

namespace {

constexpr double kTwoPi = 6.283185307179586;

// Field-by-field model comparison sampled on the grid knots.
void check_equivalent(const Scenario& a, const Scenario& b) {
  REQUIRE(a.size() == b.size());
  CHECK(a.name == b.name);
  CHECK(a.grid.t_start() == doctest::Approx(b.grid.t_start()).epsilon(1e-12));
  CHECK(a.grid.t_end() == doctest::Approx(b.grid.t_end()).epsilon(1e-12));
  CHECK(a.grid.segments() == b.grid.segments());
  CHECK(a.solver.step == doctest::Approx(b.solver.step).epsilon(1e-12));
  CHECK(a.subset.has_value() == b.subset.has_value());
  if (a.subset && b.subset) CHECK(*a.subset == *b.subset);
  for (int j = 0; j <= a.grid.segments(); ++j) {
    const double u = a.grid.knot(j);
    const ProbabilityVector mu_a = a.measures.measure_at(u);
    const ProbabilityVector mu_b = b.measures.measure_at(u);
    const StateFunction h_a = a.measures.potential_at(u);
    const StateFunction h_b = b.measures.potential_at(u);
    const QMatrix la = a.generator.rates_at(u);
    const QMatrix lb = b.generator.rates_at(u);
    CHECK(a.generator.speed()(u) == doctest::Approx(b.generator.speed()(u)));
    for (int x = 0; x < a.size(); ++x) {
      CHECK(mu_a[x] == doctest::Approx(mu_b[x]).epsilon(1e-13));
      CHECK(h_a(x) == doctest::Approx(h_b(x)).epsilon(1e-12));
      for (int y = 0; y < a.size(); ++y) {
        CHECK(la(x, y) == doctest::Approx(lb(x, y)).epsilon(1e-12));
      }
    }
  }
}

}  // namespace

TEST_CASE("built-in fixtures have the documented shape") {
  const Scenario two = two_state_fixture();
  CHECK(two.size() == 2);
  CHECK(two.name == "two-state");
  CHECK(two.grid.segments() == 16);
  CHECK(two.solver.step == 0.001);
  CHECK(!two.subset.has_value());
  CHECK(two.generator.speed()(0.3) == 1.0);

  const Scenario frozen = two_state_frozen();
  CHECK(frozen.name == "two-state-frozen");
  CHECK(frozen.generator.speed()(0.5) == 0.0);

  const Scenario path = uniform_path_scenario(5, 2.0, 8, 3.0);
  CHECK(path.size() == 5);
  CHECK(path.name == "uniform-path-5");
  CHECK(path.grid.t_end() == 2.0);
  for (double u : {0.0, 1.3, 2.0}) {
    CHECK(path.measures.potential_at(u).cwiseAbs().maxCoeff() == 0.0);
    CHECK(path.measures.measure_at(u)[2] == doctest::Approx(0.2));
  }

  const Scenario halves = split_halves_scenario();
  CHECK(halves.size() == 4);
  REQUIRE(halves.subset.has_value());
  CHECK(*halves.subset == std::vector<int>{0, 1});
  // no edges between the halves
  const QMatrix rates = halves.generator.rates_at(0.25);
  CHECK(rates(0, 2) == 0.0);
  CHECK(rates(1, 3) == 0.0);
  CHECK(rates(0, 1) > 0.0);
  CHECK(rates(2, 3) > 0.0);
}

TEST_CASE("fixture builders validate their arguments") {
  CHECK_THROWS_AS(uniform_path_scenario(1, 1.0, 4, 1.0), ConfigError);
  CHECK_THROWS_AS(uniform_path_scenario(3, -1.0, 4, 1.0), ConfigError);
  CHECK_THROWS_AS(uniform_path_scenario(3, 1.0, 0, 1.0), ConfigError);
  CHECK_THROWS_AS(uniform_path_scenario(3, 1.0, 4, -2.0), ConfigError);
  CHECK_THROWS_AS(
      endpoint_transfer_scenario(1, 0.5, 1.0, 1.0, 0.5, SpeedSchedule::constant(1.0)),
      ConfigError);
  CHECK_THROWS_AS(
      endpoint_transfer_scenario(4, 0.5, 1.0, 1.0, 0.3, SpeedSchedule::constant(1.0)),
      ConfigError);  // step does not divide the horizon
}

TEST_CASE("endpoint transfer scenario carries the oscillating measure") {
  const Scenario sc = endpoint_transfer_scenario(
      6, 0.5, 1.0, kTwoPi, kTwoPi / 16.0, SpeedSchedule::constant(1.0));
  CHECK(sc.size() == 7);
  CHECK(sc.name == "endpoint-transfer-n6");
  const double t = 1.1;
  const ProbabilityVector mu = sc.measures.measure_at(t);
  const double s = 0.5 * std::sin(t);
  CHECK(mu[0] == doctest::Approx((1.0 + s) / 7.0).epsilon(1e-12));
  CHECK(mu[6] == doctest::Approx((1.0 - s) / 7.0).epsilon(1e-12));
  for (int x = 1; x < 6; ++x) {
    CHECK(mu[x] == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  }
  sc.require_reversible();
}

TEST_CASE("closed-form bounds hold on the transfer chain at the uniform time") {
  const TransferBoundsReport rep = endpoint_transfer_bounds_report(10, 0.0);
  CHECK(rep.n == 10);
  CHECK(rep.time == 0.0);
  CHECK(!rep.relabeled);
  CHECK(rep.all_ok());
  REQUIRE(rep.rows.size() == 6);
  CHECK(rep.rows[0].name == "quadratic-constant");
  CHECK(rep.rows[0].upper == doctest::Approx(22.0).epsilon(1e-12));
  CHECK(rep.rows[1].name == "linear-constant");
  CHECK(rep.rows[1].upper == doctest::Approx(22.0).epsilon(1e-12));
  CHECK(rep.rows[2].name == "inverse-gap-upper");
  CHECK(rep.rows[2].upper == doctest::Approx(55.0).epsilon(1e-12));
  // uniform measure at t = 0: inverse gap of the flat 11-path walk
  CHECK(rep.rows[2].exact ==
        doctest::Approx(24.687075039354077).epsilon(1e-9));
  CHECK(rep.rows[3].name == "inverse-gap-lower");
  CHECK(rep.rows[3].lower ==
        doctest::Approx(1296.0 / (48.0 * 121.0)).epsilon(1e-12));
  CHECK(rep.rows[4].name == "quadratic-constant-unit-sup");
  CHECK(rep.rows[4].upper == doctest::Approx(44.0).epsilon(1e-12));
  CHECK(rep.rows[5].name == "linear-constant-unit-sup");
  CHECK(rep.rows[5].upper == doctest::Approx(88.0).epsilon(1e-12));
  for (const BoundsRow& row : rep.rows) CHECK(!row.skipped);
}

TEST_CASE("transfer bounds relabel when the first endpoint is draining") {
  // at t = pi the mass of state 0 is shrinking (H(0) > 0), so the closed
  // forms apply to the reversed path; constants are relabeling-invariant
  const TransferBoundsReport rep =
      endpoint_transfer_bounds_report(10, 3.141592653589793);
  CHECK(rep.relabeled);
  CHECK(rep.all_ok());
  CHECK(rep.rows[0].note.find("reversed") != std::string::npos);
  // the measure is uniform at t = pi as well, so the exact values match t = 0
  const TransferBoundsReport base = endpoint_transfer_bounds_report(10, 0.0);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    CHECK(rep.rows[i].exact ==
          doctest::Approx(base.rows[i].exact).epsilon(1e-9));
  }
}

TEST_CASE("transfer bounds skip the gap lower bound for short chains") {
  const TransferBoundsReport rep = endpoint_transfer_bounds_report(3, 0.7);
  REQUIRE(rep.rows.size() == 6);
  CHECK(rep.rows[3].name == "inverse-gap-lower");
  CHECK(rep.rows[3].skipped);
  CHECK(rep.rows[3].ok);
  CHECK(std::isnan(rep.rows[3].exact));
  CHECK(rep.rows[3].note.find("n >= 4") != std::string::npos);
  CHECK(rep.all_ok());
  CHECK_THROWS_AS(endpoint_transfer_bounds_report(1, 0.0), ConfigError);
}

TEST_CASE("transfer bounds serialize to csv and json") {
  const TransferBoundsReport rep = endpoint_transfer_bounds_report(4, 0.3);
  const std::string csv = rep.to_csv();
  CHECK(csv.rfind("name,lower,exact,upper,ok,skipped,note\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);  // header + 6 rows
  const std::string js = rep.to_json();
  CHECK(js.find("\"all_ok\"") != std::string::npos);
  CHECK(js.find("\"relabeled\"") != std::string::npos);
}

TEST_CASE("plateau-ramp witness certifies the quadratic variance order") {
  const VarianceWitness w = variance_lower_bound_witness(10);
  REQUIRE(w.f.size() == 11);
  CHECK(w.f(0) == 1.0);
  CHECK(w.f(10) == 9.0);
  CHECK(w.variance == doctest::Approx(92.0 / 11.0).epsilon(1e-12));
  CHECK(w.dirichlet == doctest::Approx(4.0 / 11.0).epsilon(1e-12));
  CHECK(w.ratio == doctest::Approx(23.0).epsilon(1e-12));
  // the witness is a genuine lower bound for the exact inverse gap
  const TransferBoundsReport rep = endpoint_transfer_bounds_report(10, 0.0);
  CHECK(w.ratio <= rep.rows[2].exact + 1e-9);
  CHECK_THROWS_AS(variance_lower_bound_witness(3), PreconditionError);
}

TEST_CASE("drift generator keeps the measure family invariant without reversibility") {
  const int n = 6;
  MeasureFamily measures(ProbabilityVector::uniform(n + 1),
                         EnergySchedule::endpoint_transfer(n + 1, 0.5, 1.0));

  // exact flux identity: d/dt mu_t = mu_t L_t (plain flow, unit speed)
  for (double t : {0.0, 0.9, 2.2, 4.4}) {
    const QMatrix rates = nonlocal_drift_generator(n, measures, t);
    const ProbabilityVector mu = measures.measure_at(t);
    const StateFunction h = measures.potential_at(t);
    Eigen::VectorXd flow = Eigen::VectorXd::Zero(n + 1);
    for (int y = 0; y <= n; ++y) {
      for (int x = 0; x <= n; ++x) flow(y) += mu[x] * rates(x, y);
    }
    for (int y = 0; y <= n; ++y) {
      CHECK(flow(y) == doctest::Approx(-h(y) * mu[y]).epsilon(1e-10));
    }
    // nearest-neighbour structure
    for (int x = 0; x <= n; ++x) {
      for (int y = 0; y <= n; ++y) {
        if (std::abs(x - y) > 1) CHECK(rates(x, y) == 0.0);
      }
    }
  }

  // the adjustment is genuinely non-reversible away from the symmetric times
  {
    const QMatrix rates = nonlocal_drift_generator(n, measures, 0.0);
    CHECK(detailed_balance_defect(rates, measures.measure_at(0.0)) > 1e-3);
  }
  // at cos(t) = 0 the measure is momentarily stationary, so every bond must
  // carry zero net flux; for a birth-death chain that is detailed balance
  {
    const double t = 1.5707963267948966;
    const QMatrix rates = nonlocal_drift_generator(n, measures, t);
    const ProbabilityVector mu = measures.measure_at(t);
    CHECK(detailed_balance_defect(rates, mu) <= 1e-12);
    for (int y = 1; y <= n; ++y) {
      CHECK(mu[y - 1] * rates(y - 1, y) ==
            doctest::Approx(mu[y] * rates(y, y - 1)).epsilon(1e-12));
    }
  }

  // kernel-level invariance of the plain flow: mu_s p_{s,t} = mu_t
  Scenario sc{StateSpace::indexed(n + 1),
              measures,
              GeneratorFamily::custom(
                  [measures, n](double t) {
                    return nonlocal_drift_generator(n, measures, t);
                  },
                  SpeedSchedule::constant(1.0), "bond-drift"),
              TimeGrid(0.0, kTwoPi, 16),
              SolverConfig{1e-3},
              std::nullopt,
              "drift"};
  const double s = 0.0, t = 2.0;
  const PropagatorMatrix p = markov_propagator(sc, s, t);
  const Eigen::VectorXd pushed =
      p.entries.transpose() * sc.measures.measure_at(s).weights();
  const Eigen::VectorXd target = sc.measures.measure_at(t).weights();
  CHECK((pushed - target).cwiseAbs().maxCoeff() <= 1e-8);

  CHECK_THROWS_AS(nonlocal_drift_generator(0, measures, 0.0), ConfigError);
  CHECK_THROWS_AS(nonlocal_drift_generator(4, measures, 0.0), DimensionError);
}

TEST_CASE("config loader reproduces the built-in fixtures") {
  check_equivalent(load_scenario_file(testing::config_path("two_state.json")),
                   two_state_fixture());
  check_equivalent(
      load_scenario_file(testing::config_path("two_state_frozen.json")),
      two_state_frozen());
  check_equivalent(load_scenario_file(testing::config_path("halves.json")),
                   split_halves_scenario());
  check_equivalent(
      load_scenario_file(testing::config_path("uniform_path4.json")),
      uniform_path_scenario(4, 1.0, 16, 1.0));
  check_equivalent(
      load_scenario_file(testing::config_path("transfer_n10.json")),
      endpoint_transfer_scenario(10, 0.5, 1.0, kTwoPi, kTwoPi / 15.0,
                                 SpeedSchedule::constant(1.0)));
}

TEST_CASE("config loader accepts the fast transfer configuration") {
  const Scenario sc =
      load_scenario_file(testing::config_path("transfer_n10_l242.json"));
  CHECK(sc.size() == 11);
  CHECK(sc.name == "endpoint-transfer-n10-fast");
  CHECK(sc.generator.speed()(0.5) == 242.0);
  CHECK(sc.grid.t_end() == 1.0);
  sc.require_reversible();
}

TEST_CASE("config loader parses inline documents") {
  const std::string text = R"({
    "name": "inline",
    "states": { "labels": ["low", "high"] },
    "measure": {
      "mu0": [0.25, 0.75],
      "energy": { "form": "piecewise_linear",
                  "times": [0.0, 1.0],
                  "values": [[0.0, 0.0], [0.0, 2.0]] }
    },
    "generator": { "builder": "metropolis", "edges": [[0, 1]] },
    "lambda": { "form": "piecewise_linear", "times": [0.0, 1.0], "values": [1.0, 3.0] },
    "time": { "t_end": 1.0, "segments": 8 },
    "subset": [1, 0]
  })";
  const Scenario sc = load_scenario(text);
  CHECK(sc.name == "inline");
  CHECK(sc.states.label(0) == "low");
  CHECK(sc.states.label(1) == "high");
  CHECK(sc.measures.initial()[1] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(sc.generator.speed()(0.5) == doctest::Approx(2.0).epsilon(1e-12));
  REQUIRE(sc.subset.has_value());
  CHECK(*sc.subset == std::vector<int>{1, 0});
  // defaulted solver step obeys the stability guard
  CHECK(sc.solver.step <= 0.999 * sc.guard_step() + 1e-15);
}

TEST_CASE("config loader normalizes measures with a warning") {
  const std::string text = R"({
    "states": { "count": 2 },
    "measure": { "mu0": [2.0, 6.0],
                 "energy": { "form": "linear", "base": [0.0, 0.0] } },
    "generator": { "builder": "metropolis", "edges": "path" },
    "lambda": { "form": "constant", "value": 1.0 },
    "time": { "t_end": 1.0, "segments": 4 }
  })";
  std::ostringstream captured;
  std::streambuf* old = std::cerr.rdbuf(captured.rdbuf());
  const Scenario sc = load_scenario(text);
  std::cerr.rdbuf(old);
  CHECK(captured.str().find("normalizing") != std::string::npos);
  CHECK(sc.measures.initial()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(sc.measures.initial()[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("config loader accepts a reversible tabulated generator") {
  // uniform measure; symmetric rates tabulated at two times
  const std::string text = R"({
    "states": { "count": 2 },
    "measure": { "energy": { "form": "linear", "base": [0.0, 0.0] } },
    "generator": { "builder": "tabulated",
                   "times": [0.0, 1.0],
                   "matrices": [[[-1.0, 1.0], [1.0, -1.0]],
                                [[-2.0, 2.0], [2.0, -2.0]]] },
    "lambda": { "form": "constant", "value": 1.0 },
    "time": { "t_end": 1.0, "segments": 4 }
  })";
  const Scenario sc = load_scenario(text);
  CHECK(sc.generator.rates_at(0.5)(0, 1) == doctest::Approx(1.5).epsilon(1e-12));
  sc.require_reversible();
}

TEST_CASE("config errors cite the offending path") {
  const auto message_of = [](const std::string& text) {
    try {
      load_scenario(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("(no error)");
  };

  CHECK(message_of(R"({"states": {"count": 2}})")
            .find("/measure: missing required field") != std::string::npos);
  CHECK(message_of(R"({"wrong": 1})").find("/wrong: unknown field") !=
        std::string::npos);
  CHECK(message_of(R"({"states": {"count": 2, "labels": ["a", "b"]}})")
            .find("exactly one of count, labels") != std::string::npos);
  CHECK(message_of(R"({"states": {"count": 1}})").find("/states/count") !=
        std::string::npos);

  const std::string base_prefix = R"({
    "states": { "count": 2 },
    "measure": { "mu0": MU,
                 "energy": { "form": "linear", "base": [0.0, 1.0] } },
    "generator": { "builder": "metropolis", "edges": "path" },
    "lambda": { "form": "constant", "value": 1.0 },
    "time": { "t_end": 1.0, "segments": 4 }
  })";
  auto with_mu = [&](const std::string& mu) {
    std::string text = base_prefix;
    return text.replace(text.find("MU"), 2, mu);
  };
  CHECK(message_of(with_mu("[0.5, -0.5]")).find("/measure/mu0") !=
        std::string::npos);
  CHECK(message_of(with_mu("[0.5]")).find("expected 2 entries") !=
        std::string::npos);
  CHECK(message_of(with_mu("\"gaussian\"")).find("unknown preset") !=
        std::string::npos);

  // malformed JSON reports a line number
  CHECK(message_of("{\n\"states\": 1,\n}").find("parse error at line 3") !=
        std::string::npos);

  // energy / lambda / generator form validation
  CHECK(message_of(R"({
    "states": { "count": 2 },
    "measure": { "energy": { "form": "cubic" } },
    "generator": { "builder": "metropolis", "edges": "path" },
    "lambda": { "form": "constant", "value": 1.0 },
    "time": { "t_end": 1.0, "segments": 4 }
  })").find("/measure/energy/form") != std::string::npos);
  CHECK(message_of(R"({
    "states": { "count": 2 },
    "measure": { "energy": { "form": "linear", "base": [0.0, 1.0] } },
    "generator": { "builder": "metropolis", "edges": "path" },
    "lambda": { "form": "constant", "value": -2.0 },
    "time": { "t_end": 1.0, "segments": 4 }
  })").find("/lambda/value") != std::string::npos);
  CHECK(message_of(R"({
    "states": { "count": 2 },
    "measure": { "energy": { "form": "linear", "base": [0.0, 1.0] } },
    "generator": { "builder": "spectral", "edges": "path" },
    "lambda": { "form": "constant", "value": 1.0 },
    "time": { "t_end": 1.0, "segments": 4 }
  })").find("/generator/builder") != std::string::npos);
  CHECK(message_of(R"({
    "states": { "count": 3 },
    "measure": { "energy": { "form": "linear", "base": [0.0, 0.0, 0.0] } },
    "generator": { "builder": "metropolis", "edges": [[0, 7]] },
    "lambda": { "form": "constant", "value": 1.0 },
    "time": { "t_end": 1.0, "segments": 4 }
  })").find("/generator/edges/0") != std::string::npos);

  // time block: segments and step are mutually exclusive, steps must divide
  CHECK(message_of(R"({
    "states": { "count": 2 },
    "measure": { "energy": { "form": "linear", "base": [0.0, 1.0] } },
    "generator": { "builder": "metropolis", "edges": "path" },
    "lambda": { "form": "constant", "value": 1.0 },
    "time": { "t_end": 1.0, "segments": 4, "step": 0.25 }
  })").find("exactly one of segments, step") != std::string::npos);
  CHECK(message_of(R"({
    "states": { "count": 2 },
    "measure": { "energy": { "form": "linear", "base": [0.0, 1.0] } },
    "generator": { "builder": "metropolis", "edges": "path" },
    "lambda": { "form": "constant", "value": 1.0 },
    "time": { "t_end": 1.0, "step": 0.3 }
  })").find("/time/step") != std::string::npos);

  // subset validation
  CHECK(message_of(R"({
    "states": { "count": 3 },
    "measure": { "energy": { "form": "linear", "base": [0.0, 0.0, 0.0] } },
    "generator": { "builder": "metropolis", "edges": "path" },
    "lambda": { "form": "constant", "value": 1.0 },
    "time": { "t_end": 1.0, "segments": 4 },
    "subset": [0, 0]
  })").find("/subset/1: duplicate") != std::string::npos);

  // solver step beyond the stability guard
  CHECK(message_of(R"({
    "states": { "count": 2 },
    "measure": { "energy": { "form": "linear", "base": [0.0, 1.0] } },
    "generator": { "builder": "metropolis", "edges": "path" },
    "lambda": { "form": "constant", "value": 1.0 },
    "time": { "t_end": 1.0, "segments": 4 },
    "solver": { "step": 0.9 }
  })").find("/solver/step") != std::string::npos);

  // a tabulated generator that breaks detailed balance is rejected
  CHECK(message_of(R"({
    "states": { "count": 2 },
    "measure": { "energy": { "form": "linear", "base": [0.0, 0.0] } },
    "generator": { "builder": "tabulated",
                   "times": [0.0, 1.0],
                   "matrices": [[[-1.0, 1.0], [2.0, -2.0]],
                                [[-1.0, 1.0], [2.0, -2.0]]] },
    "lambda": { "form": "constant", "value": 1.0 },
    "time": { "t_end": 1.0, "segments": 4 }
  })").find("/generator") != std::string::npos);
}

TEST_CASE("file loader prefixes errors with the path") {
  const auto dir = testing::fresh_temp_dir("cfg");
  const auto bad = dir / "bad.json";
  write_file_atomic(bad, "{ not json ]");
  try {
    load_scenario_file(bad);
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(bad.string()) != std::string::npos);
  }
  CHECK_THROWS_AS(load_scenario_file(dir / "missing.json"), Error);
}
