#pragma once

#include <cstdint>
#include <random>

namespace addle {

// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

// Independent seed for a named stream of a master seed:
// splitmix64(master + (stream + 1) * 0x9E3779B97F4A7C15).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

// Stream ids used when expanding a master seed into per-stage seeds.
namespace stream {
inline constexpr std::uint64_t simulate = 1;
inline constexpr std::uint64_t split = 2;
inline constexpr std::uint64_t train = 3;
inline constexpr std::uint64_t finetune = 4;
}  // namespace stream

}  // namespace addle
