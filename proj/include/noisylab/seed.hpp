#ifndef NOISYLAB_SEED_HPP
#define NOISYLAB_SEED_HPP

#include <cstdint>
#include <random>

namespace noisylab {

/// splitmix64 finalizer over (seed, stream); used to derive independent
/// sub-seeds from one user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(derive_seed(seed, stream));
}

}  // namespace noisylab

#endif  // NOISYLAB_SEED_HPP
