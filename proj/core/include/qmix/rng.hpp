#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace qmix {

// 64-bit avalanche mixer (splitmix64 finalizer).  All randomness in the
// library is derived by hashing (seed, stream, counter) tuples through this,
// so every Monte Carlo sample is reproducible independently of evaluation
// order and thread count.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a) {
  return mix64(seed ^ mix64(a));
}

inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix64(derive_key(seed, a) ^ mix64(b + 0x632be59bd9b4e019ull));
}

inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                std::uint64_t c) {
  return mix64(derive_key(seed, a, b) ^ mix64(c + 0x9e6c63d0876a9a47ull));
}

// Uniform double in (0,1); never returns an exact endpoint.
inline double u01(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Sequential stream seeded from a derived key.  Small state, cheap to
// construct per sample.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t key) : state_(key) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double next_u01() { return u01(next()); }

  // Unbiased integer in [0, bound) via rejection on the top of the range.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = -bound % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
};

// Standard normal from two 64-bit lanes (Box-Muller, cosine branch).
inline double gaussian_from_bits(std::uint64_t lane0, std::uint64_t lane1) {
  const double u1 = u01(lane0);
  const double u2 = u01(lane1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Counter-indexed coupling stream: value #i of the stream identified by
// `key` is a pure function of (key, i).
struct CouplingStream {
  std::uint64_t key = 0;

  double gaussian(std::uint64_t counter) const {
    return gaussian_from_bits(mix64(key ^ (2 * counter + 1)),
                              mix64(key ^ (2 * counter + 2)) ^ 0x5851f42d4c957f2dull);
  }

  double rademacher(std::uint64_t counter) const {
    return (mix64(key ^ (2 * counter + 1)) & 1) ? 1.0 : -1.0;
  }
};

// Draws uniform r-subsets of a fixed pool by partial Fisher-Yates shuffle,
// undoing the swaps afterwards so repeated draws cost O(r), not O(pool).
class SubsetSampler {
 public:
  explicit SubsetSampler(std::vector<int> pool) : pool_(std::move(pool)) {}

  const std::vector<int>& pool() const { return pool_; }

  // Overwrites `out` with an r-subset (order unspecified, no duplicates).
  void sample(int r, SplitMix64& rng, std::vector<int>& out) {
    const std::size_t n = pool_.size();
    out.resize(static_cast<std::size_t>(r));
    swaps_.clear();
    for (int t = 0; t < r; ++t) {
      const std::size_t j =
          static_cast<std::size_t>(t) + rng.next_below(static_cast<std::uint64_t>(n - t));
      std::swap(pool_[t], pool_[j]);
      swaps_.push_back({static_cast<std::size_t>(t), j});
      out[static_cast<std::size_t>(t)] = pool_[t];
    }
    for (std::size_t i = swaps_.size(); i-- > 0;) {
      std::swap(pool_[swaps_[i].first], pool_[swaps_[i].second]);
    }
  }

 private:
  std::vector<int> pool_;
  std::vector<std::pair<std::size_t, std::size_t>> swaps_;
};

}  // namespace qmix
