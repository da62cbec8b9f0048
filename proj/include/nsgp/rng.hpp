#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nsgp {

struct RngSeed {
  std::uint64_t value = 0;
};

using Rng = std::mt19937_64;

// Counter-based stream derivation. A stream is identified by the root seed
// plus a path of integers (e.g. {stage, partition, fold}); the derived seed
// depends only on that path, never on the order streams are requested in.
std::uint64_t mix64(std::uint64_t x);
RngSeed derive_seed(RngSeed root, std::initializer_list<std::uint64_t> path);
Rng make_rng(RngSeed root, std::initializer_list<std::uint64_t> path);

// Stage tags used as the first element of a stream path.
namespace stream {
inline constexpr std::uint64_t kMixture = 1;
inline constexpr std::uint64_t kChain = 2;
inline constexpr std::uint64_t kPredict = 3;
inline constexpr std::uint64_t kHoldout = 4;
inline constexpr std::uint64_t kBootstrap = 5;
inline constexpr std::uint64_t kSynth = 6;
inline constexpr std::uint64_t kEvaluate = 7;
}  // namespace stream

}  // namespace nsgp
