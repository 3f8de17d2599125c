#pragma once

// SplitMix64 (Steele, Lea, Flood 2014): the k-th output is mix(seed + k * 0x9E3779B97F4A7C15),
// so the stream is a pure function of (seed, counter). Uniform doubles take the top 53 bits;
// normals use Box-Muller. Nothing here depends on platform-defined std:: distributions, which
// keeps seeded outputs byte-identical across compilers.

#include <cmath>
#include <cstdint>

#include "fraqmap/core.hpp"

namespace fraqmap {

class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Standard normal; consumes two uniforms per call (the second Box-Muller variate is dropped).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
  }

private:
  std::uint64_t state_;
};

} // namespace fraqmap
