#pragma once

#include <cstdint>
#include <string_view>

namespace wfmini {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t task_seed(std::uint64_t global_seed, std::string_view task_name) noexcept {
  return global_seed ^ fnv1a64(task_name);
}

constexpr std::uint64_t rank_seed(std::uint64_t task_seed, int rank_id) noexcept {
  return task_seed ^ static_cast<std::uint64_t>(rank_id);
}

constexpr std::uint64_t block_seed(std::uint64_t seed, std::uint64_t block) noexcept {
  return splitmix64(seed ^ splitmix64(block + 1));
}

}  // namespace wfmini
