#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "fkprop/numerics.hpp"

using namespace fkprop;

TEST_CASE("simpson integrates cubics exactly") {
  auto cubic = [](double x) { return 2.0 * x * x * x - x * x + 3.0 * x - 5.0; };
  // antiderivative: x^4/2 - x^3/3 + 3x^2/2 - 5x
  auto F = [](double x) {
    return 0.5 * x * x * x * x - x * x * x / 3.0 + 1.5 * x * x - 5.0 * x;
  };
  const double exact = F(2.5) - F(-1.0);
  CHECK(simpson(cubic, -1.0, 2.5, 2) == doctest::Approx(exact).epsilon(1e-14));
  CHECK(simpson(cubic, -1.0, 2.5, 10) == doctest::Approx(exact).epsilon(1e-14));
}

TEST_CASE("simpson validates subinterval count") {
  auto f = [](double) { return 1.0; };
  CHECK_THROWS_AS(simpson(f, 0.0, 1.0, 3), ConfigError);
  CHECK_THROWS_AS(simpson(f, 0.0, 1.0, 0), ConfigError);
  CHECK(simpson(f, 2.0, 2.0, 4) == 0.0);
}

TEST_CASE("simpson_with_step converges on sin") {
  const double exact = 2.0;  // int_0^pi sin
  const double pi = 3.14159265358979323846;
  CHECK(simpson_with_step([](double x) { return std::sin(x); }, 0.0, pi, 1e-3) ==
        doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("even_subintervals rounds up to an even count") {
  CHECK(even_subintervals(0.0, 1.0, 0.5) == 2);
  CHECK(even_subintervals(0.0, 1.0, 0.3) == 4);
  CHECK(even_subintervals(0.0, 1.0, 1e9) == 2);
  CHECK(even_subintervals(0.0, 0.0, 0.1) == 2);
  CHECK_THROWS_AS(even_subintervals(0.0, 1.0, 0.0), ConfigError);
}

TEST_CASE("simpson_tabulated matches callable simpson on even tables") {
  auto f = [](double x) { return std::exp(-x) * std::cos(3.0 * x); };
  const double h = 0.01;
  std::vector<double> table;
  for (int i = 0; i <= 200; ++i) table.push_back(f(i * h));
  const double via_table = simpson_tabulated(table, h);
  const double via_callable = simpson(f, 0.0, 2.0, 200);
  CHECK(via_table == doctest::Approx(via_callable).epsilon(1e-15));
}

TEST_CASE("simpson_tabulated handles odd segment counts with a 3/8 tail") {
  auto f = [](double x) { return x * x * x - 2.0 * x; };  // cubic: exact
  const double h = 0.125;
  std::vector<double> table;
  for (int i = 0; i <= 9; ++i) table.push_back(f(i * h));  // 9 segments
  const double upper = 9 * h;
  const double exact = upper * upper * upper * upper / 4.0 - upper * upper;
  CHECK(simpson_tabulated(table, h) == doctest::Approx(exact).epsilon(1e-13));
}

TEST_CASE("simpson_tabulated degenerate tables") {
  std::vector<double> one{1.0};
  CHECK_THROWS_AS(simpson_tabulated(one, 0.1), ConfigError);
  std::vector<double> two{1.0, 3.0};  // single segment: trapezoid
  CHECK(simpson_tabulated(two, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("pairwise_sum is accurate and order-deterministic") {
  std::vector<double> values;
  values.reserve(1000000);
  long double reference = 0.0L;
  for (int i = 0; i < 1000000; ++i) {
    const double v = ((i % 2 == 0) ? 1.0 : -1.0) * (1.0 + 1e-8 * i) / (i + 1.0);
    values.push_back(v);
    reference += static_cast<long double>(v);
  }
  const double sum = pairwise_sum(values);
  CHECK(std::abs(sum - static_cast<double>(reference)) < 1e-12);
  CHECK(pairwise_sum(values) == sum);  // deterministic
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
  CHECK(pairwise_sum(std::vector<double>{4.25}) == 4.25);
}

TEST_CASE("format_double round-trips and spells infinities") {
  for (double v : {0.0, 1.0, -1.0, 0.1, 1e-300, -2.5e300, 3.141592653589793,
                   0.7310585786300049}) {
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(format_double(kInf) == "inf");
  CHECK(format_double(-kInf) == "-inf");
}

TEST_CASE("fnv1a_hex matches the reference vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}
