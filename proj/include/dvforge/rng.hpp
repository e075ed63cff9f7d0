#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace dvf {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng, double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// First k entries of a seeded Fisher-Yates shuffle of 0..n-1.
inline std::vector<int> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(ids[i], ids[i + uniform_index(rng, n - i)]);
  }
  ids.resize(k);
  return ids;
}

inline std::vector<int> shuffled_indices(Rng& rng, std::size_t n) {
  return sample_without_replacement(rng, n, n);
}

// FNV-1a over a string key; used to derive per-cell child seeds.
inline std::uint64_t seed_hash(const std::string& key) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace dvf
