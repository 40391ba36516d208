#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <type_traits>

namespace needscope {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic substream seed from a root seed and any number of keys.
// Parallel tasks keyed the same way draw identical sequences regardless of
// scheduling.
template <typename... Keys>
std::uint64_t derive_seed(std::uint64_t seed, const Keys&... keys) {
  std::uint64_t h = splitmix64(seed);
  auto mix = [&h](std::uint64_t k) { h = splitmix64(h ^ splitmix64(k)); };
  auto fold = [&](const auto& key) {
    if constexpr (std::is_convertible_v<decltype(key), std::string_view>) {
      mix(fnv1a64(std::string_view(key)));
    } else {
      mix(static_cast<std::uint64_t>(key));
    }
  };
  (fold(keys), ...);
  return h;
}

using Rng = std::mt19937_64;

}  // namespace needscope
