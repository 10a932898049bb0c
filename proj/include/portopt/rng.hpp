#pragma once

#include <cstdint>
#include <random>

namespace portopt {

// mt19937_64 output is fixed by the standard; the helpers below avoid the
// implementation-defined std distributions so seeds replay on any toolchain.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Unbiased integer in [0, bound) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

inline bool coin(Rng& rng) { return (rng() >> 63) != 0; }

}  // namespace portopt
