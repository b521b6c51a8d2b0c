#pragma once

#include <cstdint>
#include <random>

namespace bobw {

/// Purpose tags for the per-run random streams. Keeping the environment,
/// trajectory and feedback draws on separate streams means swapping the
/// learner does not shift the environment's sequence.
enum class Stream : std::uint32_t {
  environment = 1,
  trajectory = 2,
  feedback = 3,
  instance = 4,
};

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t seed, Stream purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), 0x6f62u};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace bobw
