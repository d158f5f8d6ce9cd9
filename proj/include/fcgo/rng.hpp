#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fcgo {

/// Deterministic random source.  The mt19937_64 stream is fixed by the
/// standard, and the mapping to doubles below avoids std::uniform_real_
/// distribution (whose output is implementation-defined), so sequences are
/// reproducible across platforms for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  /// Uniform in [0, 1).
  double unit() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [a, b).
  double uniform(double a, double b) { return a + (b - a) * unit(); }

  /// Uniform integer in [lo, hi] (inclusive).
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    // Simple modulo mapping; bias is irrelevant for test-parameter draws.
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<std::int64_t>(gen_() % span);
  }

  /// Standard normal via Box-Muller (deterministic given the stream).
  double normal() {
    double u1 = unit(), u2 = unit();
    while (u1 <= 0.0) u1 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace fcgo
