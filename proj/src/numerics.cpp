#include "fkprop/numerics.hpp"

#include <array>
#include <cinttypes>
#include <cstdint>

namespace fkprop {

double simpson_tabulated(std::span<const double> values, double h) {
  const std::size_t n = values.size();
  if (n < 2) throw ConfigError("simpson_tabulated: need at least two samples");
  if (!(h > 0.0)) throw ConfigError("simpson_tabulated: spacing must be > 0");
  std::size_t segments = n - 1;
  if (segments == 1) {  // single segment: trapezoid is all we can do
    return 0.5 * h * (values[0] + values[1]);
  }
  double total = 0.0;
  std::size_t simpson_segments = segments;
  if (segments % 2 != 0) {
    simpson_segments = segments - 3;  // leave a 3-segment tail for the 3/8 rule
    if (segments == 3) simpson_segments = 0;
  }
  for (std::size_t i = 0; i + 2 <= simpson_segments; i += 2) {
    total += (h / 3.0) * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
  }
  if (segments % 2 != 0) {
    const std::size_t j = simpson_segments;
    total += (3.0 * h / 8.0) *
             (values[j] + 3.0 * values[j + 1] + 3.0 * values[j + 2] + values[j + 3]);
  }
  return total;
}

namespace {
double pairwise_sum_impl(const double* data, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(data, half) + pairwise_sum_impl(data + half, n - half);
}
}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return std::string(buf.data());
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= static_cast<std::uint64_t>(c);
    hash *= 0x100000001b3ULL;
  }
  std::array<char, 20> buf{};
  std::snprintf(buf.data(), buf.size(), "%016" PRIx64, hash);
  return std::string(buf.data());
}

}  // namespace fkprop
