#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cir {

using Rng = std::mt19937_64;

// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream derived from a master seed and a name, so that adding
// randomness to one stage never perturbs another.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
  return splitmix64(seed ^ fnv1a(name));
}

inline Rng substream(std::uint64_t seed, std::string_view name) {
  return Rng(substream_seed(seed, name));
}

// Uniform index in [0, n). Avoids std::uniform_int_distribution so that
// sampled sequences do not depend on the standard library vendor.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t limit = Rng::max() - (Rng::max() % n);
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % n);
}

// Standard normal via Box-Muller on 53-bit uniforms.
double standard_normal(Rng& rng);

template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(first[i - 1], first[uniform_index(rng, i)]);
  }
}

}  // namespace cir
