#pragma once

#include <cstdint>
#include <random>

namespace spikedet {

/// SplitMix64 finalizer. Bijective on 64-bit words with good avalanche;
/// used to turn structured seeds into well-mixed engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic child-seed derivation:
///   derive_seed(base, k) = splitmix64(base XOR splitmix64(k))
/// Streams for distinct k are decorrelated regardless of the base seed,
/// so replicate k of cell c can use
///   derive_seed(derive_seed(master, c), k)
/// and the result depends only on (master, c, k), never on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace spikedet
