#include <doctest.h>

#include <cmath>

#include "fkprop/norms.hpp"
#include "fkprop/numerics.hpp"
#include "fkprop/scenarios.hpp"
#include "test_helpers.hpp"

using namespace fkprop;
using fkprop::testing::random_measure;
using fkprop::testing::sphere_search_max;

namespace {

// ||f||_{L^p(mu)} computed straightforwardly for cross-checking.
double naive_lp(const StateFunction& f, const ProbabilityVector& mu, double p) {
  if (std::isinf(p)) return f.cwiseAbs().maxCoeff();
  double acc = 0.0;
  for (int i = 0; i < f.size(); ++i) acc += mu[i] * std::pow(std::abs(f(i)), p);
  return std::pow(acc, 1.0 / p);
}

// Random nonnegative kernel with a few exact zeros.
Eigen::MatrixXd random_kernel(int rows, int cols, SplitMix64& rng) {
  Eigen::MatrixXd k(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double u = rng.uniform();
      k(i, j) = u < 0.15 ? 0.0 : u;
    }
  }
  return k;
}

}  // namespace

TEST_CASE("weighted p-norms") {
  Eigen::VectorXd w(3);
  w << 0.2, 0.3, 0.5;
  const ProbabilityVector mu(w);
  StateFunction f(3);
  f << 1.0, -2.0, 0.5;
  for (double p : {1.0, 1.5, 2.0, 4.0, 17.0}) {
    CHECK(lp_norm(f, mu, p) == doctest::Approx(naive_lp(f, mu, p)).epsilon(1e-14));
  }
  CHECK(lp_norm(f, mu, kInf) == 2.0);
  CHECK(lp_norm(StateFunction::Zero(3), mu, 2.0) == 0.0);
  CHECK_THROWS_AS(lp_norm(f, mu, 0.5), ConfigError);
}

TEST_CASE("norm limits: p-norm increases with p and tends to the sup norm") {
  SplitMix64 rng(600);
  const ProbabilityVector mu = random_measure(5, rng);
  const StateFunction f = fkprop::testing::random_function(5, rng);
  double prev = lp_norm(f, mu, 1.0);
  for (double p : {1.5, 2.0, 3.0, 8.0, 32.0, 128.0}) {
    const double cur = lp_norm(f, mu, p);
    CHECK(cur >= prev - 1e-13);
    prev = cur;
  }
  CHECK(prev == doctest::Approx(lp_norm(f, mu, kInf)).epsilon(1e-2));
}

TEST_CASE("closed forms at p = q = 1 and p = q = infinity") {
  SplitMix64 rng(601);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 4;
    const ProbabilityVector mu_s = random_measure(n, rng);
    const ProbabilityVector mu_t = random_measure(n, rng);
    const Eigen::MatrixXd k = random_kernel(n, n, rng);

    // ||K||_{1->1} = max_y  (sum_x mu_s(x) K(x,y)) / mu_t(y)
    const OperatorNormResult one = operator_norm_pq(k, mu_s, mu_t, 1.0, 1.0);
    double expect1 = 0.0;
    for (int y = 0; y < n; ++y) {
      double col = 0.0;
      for (int x = 0; x < n; ++x) col += mu_s[x] * k(x, y);
      expect1 = std::max(expect1, col / mu_t[y]);
    }
    CHECK(one.value == doctest::Approx(expect1).epsilon(1e-12));
    CHECK(one.method == "closed_form");

    // ||K||_{inf->inf} = max_x sum_y K(x,y)
    const OperatorNormResult inf =
        operator_norm_pq(k, mu_s, mu_t, kInf, kInf);
    CHECK(inf.value == doctest::Approx(k.rowwise().sum().maxCoeff()).epsilon(1e-12));

    // maximizers certify the reported values
    CHECK(lp_norm(k * inf.maximizer, mu_s, kInf) /
              lp_norm(inf.maximizer, mu_t, kInf) ==
          doctest::Approx(inf.value).epsilon(1e-10));
    CHECK(lp_norm(k * one.maximizer, mu_s, 1.0) /
              lp_norm(one.maximizer, mu_t, 1.0) ==
          doctest::Approx(one.value).epsilon(1e-10));
  }
}

TEST_CASE("p = q = 2 matches a weighted singular value problem") {
  SplitMix64 rng(602);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 5;
    const ProbabilityVector mu_s = random_measure(n, rng);
    const ProbabilityVector mu_t = random_measure(n, rng);
    const Eigen::MatrixXd k = random_kernel(n, n, rng);

    const OperatorNormResult two = operator_norm_2(k, mu_s, mu_t);
    const Eigen::MatrixXd scaled = mu_s.weights().cwiseSqrt().asDiagonal() * k *
                                   mu_t.weights().cwiseSqrt().cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
    CHECK(two.value == doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
    CHECK(two.method == "exact_svd");

    // the pq entry point routes p = q = 2 to the same answer
    const OperatorNormResult via_pq = operator_norm_pq(k, mu_s, mu_t, 2.0, 2.0);
    CHECK(via_pq.value == doctest::Approx(two.value).epsilon(1e-12));

    // certification
    CHECK(lp_norm(k * two.maximizer, mu_s, 2.0) /
              lp_norm(two.maximizer, mu_t, 2.0) ==
          doctest::Approx(two.value).epsilon(1e-10));
  }
}

TEST_CASE("general (p, q) norms match a derivative-free search") {
  SplitMix64 rng(603);
  for (int trial = 0; trial < 3; ++trial) {
    const int n = 4;
    const ProbabilityVector mu_s = random_measure(n, rng);
    const ProbabilityVector mu_t = random_measure(n, rng);
    const Eigen::MatrixXd k = random_kernel(n, n, rng);
    for (auto [p, q] : {std::pair{2.0, 4.0}, {4.0, 4.0}, {1.5, 3.0}}) {
      const OperatorNormResult r = operator_norm_pq(k, mu_s, mu_t, p, q);
      CHECK(r.converged);
      // certification at the reported maximizer
      const double certified =
          lp_norm(k * r.maximizer, mu_s, q) / lp_norm(r.maximizer, mu_t, p);
      CHECK(certified == doctest::Approx(r.value).epsilon(1e-8));
      // search can exceed the iteration's answer by at most roundoff, and
      // must come close to it from below (for nonnegative kernels the
      // maximizer is nonnegative, which the absolute value covers)
      const double searched = sphere_search_max(
          n,
          [&](const Eigen::VectorXd& v) {
            const StateFunction f = v.cwiseAbs();
            const double denom = lp_norm(f, mu_t, p);
            if (denom <= 1e-14) return -kInf;
            return lp_norm(k * f, mu_s, q) / denom;
          },
          2000, rng);
      CHECK(searched <= r.value * (1.0 + 1e-8));
      CHECK(searched >= r.value * (1.0 - 1e-4));
      CHECK(r.probe_lower <= r.value * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("interpolation-style monotonicity of the norm in q") {
  // For fixed p, larger target exponent can only increase the norm.
  SplitMix64 rng(604);
  const int n = 4;
  const ProbabilityVector mu_s = random_measure(n, rng);
  const ProbabilityVector mu_t = random_measure(n, rng);
  const Eigen::MatrixXd k = random_kernel(n, n, rng);
  double prev = 0.0;
  for (double q : {2.0, 3.0, 4.0, 8.0}) {
    const double cur = operator_norm_pq(k, mu_s, mu_t, 2.0, q).value;
    CHECK(cur >= prev - 1e-10);
    prev = cur;
  }
  CHECK_THROWS_AS(operator_norm_pq(k, mu_s, mu_t, 4.0, 2.0), ConfigError);
  CHECK_THROWS_AS(operator_norm_pq(k, mu_s, mu_t, 0.5, 2.0), ConfigError);
}

TEST_CASE("frozen two-state kernel saturates its growth bound in every norm") {
  // With the dynamics switched off, q_{0,1} = diag(e^G, e^{G-1}) and the
  // measured p -> p norm equals exp(((p-1)/p) G) for every p: the mass
  // growth bound holds with equality on this fixture.
  Scenario sc = two_state_frozen();
  sc.solver.step = 1e-4;  // fine step: compare against analytic constants
  const PropagatorMatrix q = solve_backward(sc, 0.0, 1.0);
  const ProbabilityVector mu0 = sc.measures.measure_at(0.0);
  const ProbabilityVector mu1 = sc.measures.measure_at(1.0);
  const double growth = potential_negative_part_integral(sc, 0.0, 1.0);
  CHECK(growth == doctest::Approx(0.3798854930417221).epsilon(1e-12));
  for (double p : {1.0, 2.0, 4.0, kInf}) {
    const OperatorNormResult r = operator_norm_pq(q.entries, mu0, mu1, p, p);
    const double frac = std::isinf(p) ? 1.0 : (p - 1.0) / p;
    CHECK(r.value == doctest::Approx(std::exp(frac * growth)).epsilon(1e-9));
  }
  // frozen reference value for the p = 2 case: exp(G/2)
  CHECK(operator_norm_2(q.entries, mu0, mu1).value ==
        doctest::Approx(1.2091803658925369).epsilon(1e-9));
}

TEST_CASE("mean-zero norms are dominated by the full norms") {
  SplitMix64 rng(605);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 4;
    const ProbabilityVector mu_s = random_measure(n, rng);
    const ProbabilityVector mu_t = random_measure(n, rng);
    const Eigen::MatrixXd k = random_kernel(n, n, rng);

    const double full2 = operator_norm_2(k, mu_s, mu_t).value;
    const OperatorNormResult mz2 = operator_norm_2_meanzero(k, mu_s, mu_t);
    CHECK(mz2.value <= full2 * (1.0 + 1e-12));
    // certification: maximizer is mean-zero under mu_t
    CHECK(expectation(mz2.maximizer, mu_t) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(lp_norm(k * mz2.maximizer, mu_s, 2.0) /
              lp_norm(mz2.maximizer, mu_t, 2.0) ==
          doctest::Approx(mz2.value).epsilon(1e-9));

    for (double p : {2.0, 4.0}) {
      const OperatorNormResult mzp = operator_norm_p_meanzero(k, mu_s, mu_t, p);
      const double fullp = operator_norm_pq(k, mu_s, mu_t, p, p).value;
      CHECK(mzp.value <= fullp * (1.0 + 1e-8));
      CHECK(expectation(mzp.maximizer, mu_t) ==
            doctest::Approx(0.0).epsilon(1e-9));
      const double certified = lp_norm(k * mzp.maximizer, mu_s, p) /
                               lp_norm(mzp.maximizer, mu_t, p);
      CHECK(certified == doctest::Approx(mzp.value).epsilon(1e-8));
    }
  }
}

TEST_CASE("mean-zero p = 2 agrees between the exact and ascent entry points") {
  SplitMix64 rng(606);
  const int n = 5;
  const ProbabilityVector mu_s = random_measure(n, rng);
  const ProbabilityVector mu_t = random_measure(n, rng);
  const Eigen::MatrixXd k = random_kernel(n, n, rng);
  const double exact = operator_norm_2_meanzero(k, mu_s, mu_t).value;
  const OperatorNormResult via_p = operator_norm_p_meanzero(k, mu_s, mu_t, 2.0);
  CHECK(via_p.value == doctest::Approx(exact).epsilon(1e-10));
}

TEST_CASE("mean-zero search agreement at p = 4") {
  SplitMix64 rng(607);
  const int n = 4;
  const ProbabilityVector mu_s = random_measure(n, rng);
  const ProbabilityVector mu_t = random_measure(n, rng);
  const Eigen::MatrixXd k = random_kernel(n, n, rng);
  const OperatorNormResult r = operator_norm_p_meanzero(k, mu_s, mu_t, 4.0);
  const double searched = sphere_search_max(
      n,
      [&](const Eigen::VectorXd& v) {
        const StateFunction f = v.array() - expectation(v, mu_t);
        const double denom = lp_norm(f, mu_t, 4.0);
        if (denom <= 1e-14) return -kInf;
        return lp_norm(k * f, mu_s, 4.0) / denom;
      },
      4000, rng);
  CHECK(searched <= r.value * (1.0 + 1e-8));
  CHECK(searched >= r.value * (1.0 - 1e-4));
}

TEST_CASE("propagator overload uses the kernel entries") {
  const Scenario sc = two_state_fixture();
  const PropagatorMatrix q = solve_backward(sc, 0.0, 1.0);
  const ProbabilityVector mu0 = sc.measures.measure_at(0.0);
  const ProbabilityVector mu1 = sc.measures.measure_at(1.0);
  const OperatorNormResult a = operator_norm_pq(q, mu0, mu1, 2.0, 2.0);
  const OperatorNormResult b = operator_norm_pq(q.entries, mu0, mu1, 2.0, 2.0);
  CHECK(a.value == b.value);
}
