#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rolab {

// Deterministic random source. Every stochastic component in the project
// draws from one of these, seeded explicitly; nothing reads global entropy.
//
// The draw protocol is pinned so that independent re-implementations (test
// oracles) can reproduce streams exactly:
//   - engine: std::mt19937_64
//   - uniform(): (next() >> 11) * 2^-53, in [0, 1)
//   - gaussian(): Box-Muller on two uniforms, the sine partner is cached
//   - uniform_int(n): next() % n  (modulo bias is ~2^-57 for desk-scale n)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n) {
    return static_cast<int>(next() % static_cast<std::uint64_t>(n));
  }

  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(next() % static_cast<std::uint64_t>(n));
  }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;  // keep log() finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

  // Stable sub-stream derivation (splitmix64 finalizer over seed^stream).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ull);
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rolab
