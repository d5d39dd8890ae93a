#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pixeldoc {

using Rng = std::mt19937_64;

/// Counter-based stream derivation: every (root, purpose, index) triple gets an
/// independent seed, so work items can be generated in any order or thread.
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t root, std::string_view purpose, std::uint64_t index = 0) {
  return Rng(derive_seed(root, purpose, index));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Inclusive on both ends.
inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return std::bernoulli_distribution(p)(rng);
}

}  // namespace pixeldoc
