#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace emm {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive child seeds from a master seed.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based child seed: depends only on (master, stream, index), never on
/// scheduling order.
[[nodiscard]] constexpr std::uint64_t child_seed(std::uint64_t master,
                                                 std::uint64_t stream,
                                                 std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

/// FNV-1a, for turning string cell ids into stream numbers.
[[nodiscard]] constexpr std::uint64_t stream_id(std::string_view key) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : key) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace emm
