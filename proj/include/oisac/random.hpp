// ============================================================================
// random.hpp -- counter-based random streams
//
// Every variate is a pure function of (seed, stream, i, j), so Monte Carlo
// results do not depend on how work is split across threads.
// ============================================================================
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace oisac::random {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Hash of a (seed, stream, i, j, lane) key. Each component is absorbed through
/// a full mixing round so that neighbouring counters decorrelate.
constexpr std::uint64_t key_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t i,
                                 std::uint64_t j, std::uint64_t lane) noexcept {
  constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;
  std::uint64_t h = mix64(seed + golden);
  h = mix64(h ^ (stream + 1 * golden));
  h = mix64(h ^ (i + 2 * golden));
  h = mix64(h ^ (j + 3 * golden));
  h = mix64(h ^ (lane + 4 * golden));
  return h;
}

/// Uniform in the open interval (0, 1).
constexpr double to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

struct Key {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t i = 0;
  std::uint64_t j = 0;

  [[nodiscard]] double uniform(std::uint64_t lane = 0) const noexcept {
    return to_unit_open(key_hash(seed, stream, i, j, lane));
  }

  /// Exp(rate) by inverse CDF.
  [[nodiscard]] double exponential(double rate, std::uint64_t lane = 0) const noexcept {
    return -std::log(uniform(lane)) / rate;
  }

  /// N(0, 1) by Box-Muller on lanes (lane, lane + 1).
  [[nodiscard]] double standard_normal(std::uint64_t lane = 0) const noexcept {
    const double u1 = uniform(lane);
    const double u2 = uniform(lane + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

}  // namespace oisac::random
