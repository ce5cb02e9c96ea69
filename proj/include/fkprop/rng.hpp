#pragma once

#include <cmath>
#include <cstdint>

namespace fkprop {

// SplitMix64: tiny counter-friendly PRNG with a cheap, well-mixing seeding
// function. Every Monte Carlo path gets its own stream derived from
// (run seed, path index), so results are independent of scheduling order.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0, 1]: never returns 0, so -log(u) is always finite.
  double uniform_pos() {
    const std::uint64_t bits = next_u64() >> 11;  // 53 random bits
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

 private:
  std::uint64_t state_;
};

// Stateless mix of a run seed and a stream index into a fresh SplitMix64 seed.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x632be59bd9b4e019ULL * (index + 1);
  z = (z ^ (z >> 31)) * 0x7fb5d329728ea185ULL;
  z = (z ^ (z >> 27)) * 0x81dadef4bc2dd44dULL;
  return z ^ (z >> 33);
}

}  // namespace fkprop
