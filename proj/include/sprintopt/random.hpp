#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

namespace sprintopt {

/// 64-bit engine used everywhere a seed is accepted. Distributions below are
/// implemented directly on the raw bits so sequences do not depend on the
/// standard library's distribution implementations.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent child seed from (seed, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
}

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double low, double high) {
  return low + (high - low) * uniform01(rng);
}

/// Uniform integer in [low, high].
inline std::int64_t uniform_int(Rng& rng, std::int64_t low, std::int64_t high) {
  const auto span = static_cast<std::uint64_t>(high - low) + 1u;
  if (span == 0) return static_cast<std::int64_t>(rng());
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t r = rng();
  while (r >= limit) r = rng();
  return low + static_cast<std::int64_t>(r % span);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(n) - 1));
}

inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace sprintopt
