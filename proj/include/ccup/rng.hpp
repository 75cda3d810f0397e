#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ccup {

// Thin wrapper around mt19937_64 with hand-rolled uniform draws so that
// seeded runs replay identically regardless of libstdc++ distribution
// internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Random point on the probability simplex (normalized exponentials).
  std::vector<double> simplex(std::size_t n) {
    std::vector<double> v(n);
    double total = 0.0;
    for (auto& x : v) {
      x = -std::log(1.0 - uniform());
      total += x;
    }
    for (auto& x : v) x /= total;
    return v;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ccup
