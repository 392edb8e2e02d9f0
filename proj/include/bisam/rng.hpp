#pragma once

#include <cstdint>
#include <random>

namespace bisam {

using Rng = std::mt19937_64;

/// Mixes a master seed and a stream index into an independent seed
/// (splitmix64 finalizer). Used to derive per-replication and per-chain
/// streams so that parallel execution order never affects results.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  // 53 random bits, offset by half an ulp so 0 is never returned.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

/// Gamma(shape, rate = 1).
inline double standard_gamma(Rng& rng, double shape) {
  std::gamma_distribution<double> dist(shape, 1.0);
  return dist(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform_open(rng) < p; }

}  // namespace bisam
