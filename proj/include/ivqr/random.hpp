#pragma once

#include <cstdint>
#include <random>

namespace ivqr {

// SplitMix64 finalizer; used to derive independent stream seeds from
// (seed, stream index) pairs.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
  return Engine(mix_seed(seed, stream));
}

inline double standard_normal(Engine& engine) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine);
}

}  // namespace ivqr
