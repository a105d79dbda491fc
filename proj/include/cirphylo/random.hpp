#pragma once

#include <cstdint>
#include <random>

namespace cirphylo {

using Rng = std::mt19937_64;

// Seed used by the CLI when --seed is not given.
inline constexpr std::uint64_t default_seed = 20050615;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Independent stream for task `task` of a run seeded with `seed`.  Every parallel
// workload derives its per-task generator here, so results do not depend on how
// tasks are distributed over workers.
inline Rng make_stream(std::uint64_t seed, std::uint64_t task) {
  std::uint64_t state = seed ^ (0xd1b54a32d192ed03ULL * (task + 1));
  std::seed_seq seq{
      static_cast<std::uint32_t>(detail::splitmix64(state)),
      static_cast<std::uint32_t>(detail::splitmix64(state)),
      static_cast<std::uint32_t>(detail::splitmix64(state)),
      static_cast<std::uint32_t>(detail::splitmix64(state)),
      static_cast<std::uint32_t>(task), static_cast<std::uint32_t>(task >> 32),
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng{seq};
}

}  // namespace cirphylo
