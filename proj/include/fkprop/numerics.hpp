#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fkprop/errors.hpp"

namespace fkprop {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Composite Simpson rule on [a, b] with an even number of subintervals.
// The integrand is evaluated at the 2m+1 nodes of the uniform refinement.
template <class F>
double simpson(F&& f, double a, double b, int subintervals) {
  if (subintervals <= 0 || subintervals % 2 != 0) {
    throw ConfigError("simpson: subinterval count must be positive and even");
  }
  if (a == b) return 0.0;
  const double h = (b - a) / subintervals;
  double odd = 0.0, even = 0.0;
  for (int i = 1; i < subintervals; i += 2) odd += f(a + i * h);
  for (int i = 2; i < subintervals; i += 2) even += f(a + i * h);
  return (h / 3.0) * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

// Subinterval count for integrating over [a, b] with substep <= max_step,
// rounded up to the next even number (>= 2).
inline int even_subintervals(double a, double b, double max_step) {
  if (!(max_step > 0.0)) throw ConfigError("even_subintervals: step must be > 0");
  const double len = std::abs(b - a);
  if (len == 0.0) return 2;
  int m = static_cast<int>(std::ceil(len / max_step - 1e-12));
  if (m < 2) m = 2;
  if (m % 2 != 0) ++m;
  return m;
}

template <class F>
double simpson_with_step(F&& f, double a, double b, double max_step) {
  if (a == b) return 0.0;
  return simpson(f, a, b, even_subintervals(a, b, max_step));
}

// Composite Simpson on a uniform table of samples (spacing h). When the
// number of segments is odd, the last three segments use the 3/8 rule.
double simpson_tabulated(std::span<const double> values, double h);

// Deterministic pairwise (cascade) summation; order independent of thread
// partitioning as long as the input order is fixed.
double pairwise_sum(std::span<const double> values);

// Shortest round-trip decimal formatting used by every writer ("%.17g",
// infinities spelled "inf"/"-inf").
std::string format_double(double v);

// FNV-1a 64-bit hash of a byte string, in fixed-width hex. Used to fingerprint
// run manifests; not cryptographic.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace fkprop
