#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace asu {

// mt19937_64 has a standard-mandated output sequence; the helpers below avoid
// std distributions, whose outputs differ between standard libraries.
using Engine = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent stream seed from a base seed and a tag.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Uniform integer in [0, n) by rejection sampling. n must be > 0.
std::uint64_t uniform_index(Engine& engine, std::uint64_t n);

/// Uniform double in [0, 1) with 53 random bits.
double uniform_unit(Engine& engine);

double standard_normal(Engine& engine);

std::vector<std::size_t> permutation(std::size_t n, Engine& engine);

template <typename T>
void shuffle(std::span<T> items, Engine& engine) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(engine, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace asu
