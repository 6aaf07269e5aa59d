#pragma once

// Seeded, portable random number generation for the Monte Carlo harness.
//
// std::mt19937_64 is bit-reproducible across standard library
// implementations, but std::*_distribution is not.  All variates are
// therefore derived from the raw 64-bit stream with fixed arithmetic,
// so a given seed produces the same draws everywhere.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

namespace locreg {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed from (master, label, a, b).
/// Replicate streams are derived as derive_seed(master, experiment_id, r),
/// which makes parallel and serial runs draw identical numbers.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = master;
  splitmix64(s);
  s ^= fnv1a64(label);
  splitmix64(s);
  s ^= a;
  splitmix64(s);
  s ^= b;
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on the open interval (0, 1); rejects the measure-zero 0.
  double uniform_open01() {
    double u;
    do {
      u = uniform01();
    } while (u == 0.0);
    return u;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// N(0, sigma^2) via Box-Muller.
  double normal(double sigma = 1.0) {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return sigma * std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Exponential with the given rate (mean 1/rate).
  double exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be > 0");
    return -std::log(uniform_open01()) / rate;
  }

  /// Uniform integer in {0, ..., n-1}, unbiased.
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be >= 1");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<int>(x % un);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace locreg
