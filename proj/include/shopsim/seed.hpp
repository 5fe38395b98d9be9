#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace shopsim {

std::uint64_t fnv1a64(std::string_view text);

// Named sub-seed: every concern (sampling, issue assignment, guidance
// dimensions, splits) draws from its own stream derived from one root.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

// Index in [0, n). Uses raw engine output so results do not depend on the
// standard library's distribution implementation.
inline std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

template <class It>
void seeded_shuffle(It first, It last, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = draw_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace shopsim
