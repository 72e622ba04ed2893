#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>

namespace nritv {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a role tag.
inline uint64_t derive_seed(uint64_t master, uint64_t role) {
  return splitmix64(master ^ splitmix64(role));
}

/// mt19937_64 with explicitly coded draw shapes. The standard pins the
/// engine's output sequence but not the distribution adaptors, so the
/// uniform/Gaussian transforms live here to keep byte-reproducibility a
/// property of the seed alone.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t bits() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double uniform01_open_low() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform integer in [0, m), rejection-sampled (unbiased).
  uint64_t below(uint64_t m) {
    if (m == 0) return 0;
    uint64_t threshold = -m % m;  // = 2^64 mod m
    for (;;) {
      uint64_t r = gen_();
      if (r >= threshold) return r % m;
    }
  }

  /// One Box-Muller pair of independent standard normals.
  std::pair<double, double> gauss_pair() {
    double u1 = uniform01_open_low();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace nritv
