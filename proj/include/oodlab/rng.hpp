#pragma once

#include <cstdint>
#include <random>

namespace oodlab {

// Seeding discipline: one 64-bit master seed per run. Independent streams
// (data generation, shuffles, initialization, ...) get their own generator,
// seeded with derive_seed(master, stream_id). Stream derivation is the
// splitmix64 output function applied to master + stream increments, so
// distinct stream ids give decorrelated mt19937_64 streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master + 0x9E3779B97F4A7C15ull * (stream + 1));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace oodlab
