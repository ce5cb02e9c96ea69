#include <doctest.h>

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "fkprop/propagator.hpp"
#include "fkprop/scenarios.hpp"
#include "test_helpers.hpp"

using namespace fkprop;

namespace {
// log(2 / (1 + e^{-1})): growth integral of the two-state model over [0, 1].
constexpr double kTwoStateGrowth = 0.3798854930417221;
}  // namespace

TEST_CASE("backward and forward solves agree") {
  const Scenario sc = two_state_fixture();
  const PropagatorMatrix back = solve_backward(sc, 0.0, 1.0);
  const PropagatorMatrix fwd = solve_forward(sc, 0.0, 1.0);
  CHECK((back.entries - fwd.entries).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(back.kind == PropagatorMatrix::Kind::feynman_kac);
  CHECK(back.s == 0.0);
  CHECK(back.t == 1.0);
}

TEST_CASE("s = t gives the identity") {
  const Scenario sc = two_state_fixture();
  const PropagatorMatrix id = solve_backward(sc, 0.5, 0.5);
  CHECK((id.entries - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() ==
        0.0);
  const PropagatorMatrix idm = markov_propagator(sc, 0.5, 0.5);
  CHECK((idm.entries - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("window validation") {
  const Scenario sc = two_state_fixture();
  CHECK_THROWS_AS(solve_backward(sc, 0.8, 0.2), ConfigError);
  CHECK_THROWS_AS(solve_backward(sc, -0.5, 1.0), ConfigError);
  CHECK_THROWS_AS(solve_backward(sc, 0.0, 1.5), ConfigError);
}

TEST_CASE("time-homogeneous case matches the matrix exponential") {
  // Flat energy => H = 0 and L constant in t: q_{s,t} = exp((t-s) lambda L).
  Scenario sc = uniform_path_scenario(4, 1.0, 16, 1.3);
  sc.solver.step = 1e-3;  // fine step: compare against the exact exponential
  const PropagatorMatrix q = solve_backward(sc, 0.2, 0.9);
  const Eigen::MatrixXd l = sc.generator.rates_at(0.0).entries();
  const Eigen::MatrixXd expm = (0.7 * 1.3 * l).exp();
  CHECK((q.entries - expm).cwiseAbs().maxCoeff() <= 1e-8);
  // Markov propagator coincides when the potential vanishes.
  const PropagatorMatrix p = markov_propagator(sc, 0.2, 0.9);
  CHECK((p.entries - q.entries).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("two-state kernel under frozen dynamics is exactly diagonal growth") {
  // With the jump dynamics switched off the backward equation decouples:
  // q_{0,1} = diag(exp(G), exp(G - 1)) with G = log(2/(1+e^{-1})).
  const Scenario sc = two_state_frozen();
  const PropagatorMatrix q = solve_backward(sc, 0.0, 1.0);
  CHECK(q.entries(0, 1) == 0.0);
  CHECK(q.entries(1, 0) == 0.0);
  CHECK(q.entries(0, 0) ==
        doctest::Approx(std::exp(kTwoStateGrowth)).epsilon(1e-10));
  CHECK(q.entries(1, 1) ==
        doctest::Approx(std::exp(kTwoStateGrowth - 1.0)).epsilon(1e-10));
}

TEST_CASE("growth integral has its closed form on the two-state model") {
  const Scenario sc = two_state_fixture();
  // H_t^- attains its max at state 0 where H_t(0) = -e^{-t}/(1+e^{-t});
  // the integral over [0,1] is log(2/(1+e^{-1})).
  CHECK(potential_negative_part_integral(sc, 0.0, 1.0) ==
        doctest::Approx(kTwoStateGrowth).epsilon(1e-12));
  CHECK(potential_negative_part_integral(sc, 0.3, 0.3) == 0.0);
}

TEST_CASE("snapshots agree with individual solves") {
  const Scenario sc = two_state_fixture();
  const std::vector<double> starts = {0.0, 0.25, 0.5, 0.75};
  const auto snaps = solve_backward_snapshots(sc, starts, 1.0);
  REQUIRE(snaps.size() == starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    CHECK(snaps[i].s == starts[i]);
    const PropagatorMatrix direct = solve_backward(sc, starts[i], 1.0);
    CHECK((snaps[i].entries - direct.entries).cwiseAbs().maxCoeff() <= 1e-12);
  }
  const auto msnaps = solve_backward_snapshots(sc, starts, 1.0, /*markov=*/true);
  CHECK(msnaps[1].kind == PropagatorMatrix::Kind::markov);
  const PropagatorMatrix mdirect = markov_propagator(sc, 0.25, 1.0);
  CHECK((msnaps[1].entries - mdirect.entries).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("structural identities hold on the two-state model") {
  const Scenario sc = two_state_fixture();
  const PropagatorDiagnostics d = propagator_diagnostics(sc, 0.0, 1.0);
  CHECK(d.chapman_defect <= 1e-9);
  CHECK(d.min_entry >= 0.0);
  CHECK(d.invariance_defect <= 1e-9);
  CHECK(d.pointwise_margin <= 1e-9);
  CHECK(d.markov_row_sum_defect <= 1e-10);
  CHECK(d.growth_integral == doctest::Approx(kTwoStateGrowth).epsilon(1e-12));
}

TEST_CASE("intertwining: q transports mu_s to mu_t exactly in the limit") {
  // sum_x mu_s(x) q_{s,t}(x, y) = mu_t(y): the defining property of the
  // normalized kernel.
  const Scenario sc = endpoint_transfer_scenario(6, 0.5, 1.0, 2.0, 0.125,
                                                 SpeedSchedule::constant(1.0));
  const PropagatorMatrix q = solve_backward(sc, 0.25, 1.75);
  const Eigen::VectorXd pushed =
      q.entries.transpose() * sc.measures.measure_at(0.25).weights();
  const Eigen::VectorXd target = sc.measures.measure_at(1.75).weights();
  CHECK((pushed - target).cwiseAbs().sum() <= 1e-8);
}

TEST_CASE("markov rows sum to one and dominate the normalized kernel bound") {
  const Scenario sc = endpoint_transfer_scenario(6, 0.5, 1.0, 2.0, 0.125,
                                                 SpeedSchedule::constant(1.0));
  const PropagatorMatrix q = solve_backward(sc, 0.0, 2.0);
  const PropagatorMatrix p = markov_propagator(sc, 0.0, 2.0);
  for (int x = 0; x < sc.size(); ++x) {
    CHECK(p.entries.row(x).sum() == doctest::Approx(1.0).epsilon(1e-10));
  }
  const double growth = potential_negative_part_integral(sc, 0.0, 2.0);
  const Eigen::MatrixXd gap = std::exp(growth) * p.entries - q.entries;
  CHECK(gap.minCoeff() >= -1e-9);
}

TEST_CASE("solver step override is validated against the stability guard") {
  Scenario sc = two_state_fixture();
  CHECK_NOTHROW(sc.validate_step(sc.guard_step() * 0.5));
  CHECK_THROWS_AS(sc.validate_step(sc.guard_step() * 2.0), ConfigError);
  CHECK_THROWS_AS(sc.validate_step(0.0), ConfigError);
}

TEST_CASE("kernel CSV lists labeled entries") {
  const Scenario sc = two_state_fixture();
  const PropagatorMatrix q = solve_backward(sc, 0.0, 1.0);
  const std::string csv = q.to_csv(sc.states);
  CHECK(csv.rfind("# s=0 t=1 kind=feynman_kac", 0) == 0);
  CHECK(csv.find("from,to,value\n") != std::string::npos);
  CHECK(csv.find("\n0,1,") != std::string::npos);
  // 2x2 kernel: comment line + header + 4 rows
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}
