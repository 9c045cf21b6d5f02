#pragma once

#include <cstdint>
#include <random>

namespace fmqkd {

using Rng = std::mt19937_64;

// Independent, named substreams of one experiment seed.
enum class Stream : std::uint32_t {
  Alice = 1,
  Bob = 2,
  Channel = 3,
  Drift = 4,
  Calibration = 5,
  Sampling = 6,
  Monitor = 7,
  Birefringence = 8,
};

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t salt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(salt),
                    static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline bool bernoulli(Rng& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform01(rng) < p;
}

}  // namespace fmqkd
