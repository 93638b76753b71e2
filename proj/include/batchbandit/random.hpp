#pragma once

#include <cstdint>
#include <random>

namespace batchbandit {

// All randomness flows through this engine. std::mt19937_64 is fully
// specified by the standard, so its output stream is identical on every
// platform; distributions come from Boost.Random, whose algorithms are
// fixed (the standard library's are implementation-defined).
using Rng = std::mt19937_64;

// SplitMix64 finalizer (Steele, Lea & Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed of an independent substream: mix64(mix64(parent) ^ index). Used for
// run r of a campaign (parent = master seed) and for nested streams.
constexpr std::uint64_t substream_seed(std::uint64_t parent, std::uint64_t index) noexcept {
    return mix64(mix64(parent) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline Rng make_rng(std::uint64_t parent, std::uint64_t index) {
    return Rng(substream_seed(parent, index));
}

}  // namespace batchbandit
