#pragma once

#include <cstdint>
#include <random>

namespace screener {

/// Random stream used throughout the library. Each caller owns its stream.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive child seeds deterministically.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for node `key` under `parent` in the seed derivation tree
/// (experiment -> repeat -> subject). Independent of evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t key) noexcept {
  return mix64(mix64(parent) ^ (key * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

inline Rng make_rng(std::uint64_t parent, std::uint64_t key) {
  return Rng{derive_seed(parent, key)};
}

}  // namespace screener
