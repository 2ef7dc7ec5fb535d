#pragma once

#include <cstdint>
#include <initializer_list>

namespace macroreal {

// One splitmix64 output step applied to `x`.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Child seed for a path of indices below a master seed: each index is folded
// in with one splitmix64 step, so (master, 1, 2) and (master, 2, 1) differ.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t index : path) s = splitmix64(s ^ splitmix64(index + 1));
  return s;
}

}  // namespace macroreal
