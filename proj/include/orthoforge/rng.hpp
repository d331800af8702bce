#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace orthoforge {

// All randomness in the toolkit goes through these helpers on top of the
// standard mt19937_64 engine. The engine's bit stream is pinned by the
// standard; std::uniform_int_distribution and friends are not, so we draw
// values ourselves to keep artifacts byte-identical across toolchains.
using Rng = std::mt19937_64;

// Uniform integer in [0, n). Modulo bias is irrelevant next to determinism
// for the n we use (raster dims, id counts).
inline std::uint64_t uniform_u64(Rng& rng, std::uint64_t n) {
  return rng() % n;
}

// Uniform double in [0, 1), 53 bits.
inline double uniform_real(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_real(rng);
}

// Standard normal via Box-Muller, one value per call (the cosine branch).
inline double normal(Rng& rng) {
  double u1 = uniform_real(rng);
  while (u1 <= 0.0) u1 = uniform_real(rng);
  const double u2 = uniform_real(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_u64(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace orthoforge
