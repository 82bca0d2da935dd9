#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "qmix/estimate.hpp"
#include "qmix/rng.hpp"

namespace qmix::overlap_stats {

// A set of domains A_i with subset sizes r_i and a set of edges (i, j),
// i < j, naming the intersections |R_i ∩ R_j| that enter the sign exponent.
struct OverlapConfig {
  std::vector<std::vector<int>> domains;  // positive indices, no repeats
  std::vector<int> sizes;                 // r_i <= |A_i|
  std::vector<std::pair<int, int>> edges; // 0-based domain indices, i < j

  void validate() const;  // throws std::invalid_argument on violation
  int max_index() const;
};

// Uniform r-subset of the given domain (unsorted).
std::vector<int> sample_uniform_subset(const std::vector<int>& domain, int r, SplitMix64& rng);

// Expected sign of the intersection of a fixed p-subset with a uniform
// q-subset of an m-set: sum_k (-1)^k C(p,k) C(m-p,q-k) / C(m,q).
// Exact rational arithmetic for m <= 64, log-gamma with compensated
// summation beyond.
double expected_intersection_sign(int p, int q, int m);

// E[(-1)^{|R1 ∩ R2|}] for independent uniform subsets R1 (r1 of n1) and
// R2 (r2 of n2) whose domains share exactly `a` elements: mixture of
// expected_intersection_sign over the hypergeometric overlap count.
double exact_pair_sign_expectation(int n1, int n2, int a, int r1, int r2);

// Monte Carlo estimate of E[(-1)^{sum over edges |R_i ∩ R_j|}].
MomentEstimate sign_expectation_mc(const OverlapConfig& cfg, std::uint64_t samples,
                                   SplitMix64& rng);

// Exact value when the edge set is empty or a vertex-disjoint matching
// (independent pairs multiply); Monte Carlo fallback otherwise.
MomentEstimate sign_expectation_exact_or_mc(const OverlapConfig& cfg, std::uint64_t mc_samples,
                                            SplitMix64& rng);

// Monte Carlo estimate of E[C(sum over edges |R_i ∩ R_j|, k)], k <= 8.
MomentEstimate falling_factorial_moment_mc(const OverlapConfig& cfg, int k,
                                           std::uint64_t samples, SplitMix64& rng);

// Monte Carlo estimate of P(X_{e1} ∩ X_{e2} != empty) for two distinct
// edges, where X_e = R_i ∩ R_j.
MomentEstimate pair_disjointness_probability_mc(const OverlapConfig& cfg,
                                                std::pair<int, int> edge1,
                                                std::pair<int, int> edge2,
                                                std::uint64_t samples, SplitMix64& rng);

}  // namespace qmix::overlap_stats
