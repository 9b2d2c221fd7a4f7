#pragma once

#include <cstdint>
#include <random>

namespace predec {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

// Seed for stream `stream` of run `seed`. Streams are derived by hashing the
// counter, so shot i always sees the same generator regardless of how shots
// are split across workers.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

Rng make_rng(std::uint64_t seed, std::uint64_t stream);

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace predec
