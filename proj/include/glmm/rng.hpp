#pragma once

#include <cstdint>
#include <random>

namespace glmm {

using Engine = std::mt19937_64;

/// Stream purposes; part of the key so that streams for different roles
/// never collide even when the remaining counters agree.
enum class StreamTag : std::uint64_t {
  Latent = 1,
  Minibatch = 2,
  Noise = 3,
  PsiPass = 4,
  Gibbs = 5,
  Data = 6,
  Replication = 7,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Counter-based stream derivation: the engine for (seed, tag, a, b) depends
/// only on those values, so any schedule of parallel work reproduces it.
Engine make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0);

std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0) noexcept;

inline double uniform01(Engine& eng) { return std::uniform_real_distribution<double>(0.0, 1.0)(eng); }

inline double std_normal(Engine& eng) { return std::normal_distribution<double>(0.0, 1.0)(eng); }

}  // namespace glmm
