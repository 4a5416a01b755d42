#pragma once

#include <cstdint>
#include <random>

namespace wss {

/// Seeded random stream used everywhere a draw is made.
using Rng = std::mt19937_64;

/// Stream identifiers for child RNG derivation. Values are part of the
/// on-disk reproducibility contract; do not renumber.
enum class StreamId : std::uint64_t {
  kTrain = 1,
  kValidation = 2,
  kTest = 3,
  kAdaptation = 4,
  kCosetPattern = 16,
  kInit = 17,
  kShuffle = 18,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Mixes a master seed with two stream coordinates into an independent seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0);

inline Rng child_stream(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(derive_seed(master, stream, index));
}

inline Rng child_stream(std::uint64_t master, StreamId stream, std::uint64_t index = 0) {
  return child_stream(master, static_cast<std::uint64_t>(stream), index);
}

}  // namespace wss
