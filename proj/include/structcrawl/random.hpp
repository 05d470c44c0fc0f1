#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace structcrawl {

// std:: distributions are implementation-defined; these draws are not, so
// seeded runs reproduce across standard libraries.

inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return draw % n;
}

/// Uniform in [0, 1).
inline double uniform_real(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::uint64_t uniform_between(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
  return hi <= lo ? lo : lo + uniform_index(rng, hi - lo + 1);
}

}  // namespace structcrawl
