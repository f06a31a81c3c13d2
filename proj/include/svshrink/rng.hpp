#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace svshrink {

/// splitmix64 finalizer; full avalanche, so nearby inputs give unrelated outputs.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and a path of
/// integers (snr index, replicate index, role, ...). Adding new consumers
/// with distinct paths never perturbs existing streams.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix_seed(master);
  for (std::uint64_t v : path) s = mix_seed(s ^ mix_seed(v));
  return s;
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace svshrink
