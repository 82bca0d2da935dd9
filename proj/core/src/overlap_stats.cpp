#include "qmix/overlap_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

namespace qmix::overlap_stats {

namespace {

using int128 = __int128;
using uint128 = unsigned __int128;

// C(n, k) for n <= 64 fits in uint64_t (max C(64,32) ~ 1.8e18).
const std::uint64_t* binomial_row(int n) {
  static const auto table = [] {
    auto rows = new std::uint64_t[65][65]();
    for (int i = 0; i <= 64; ++i) {
      rows[i][0] = 1;
      for (int j = 1; j <= i; ++j) {
        rows[i][j] = rows[i - 1][j - 1] + (j <= i - 1 ? rows[i - 1][j] : 0);
      }
    }
    return rows;
  }();
  return table[n];
}

std::uint64_t binom_u64(int n, int k) {
  if (k < 0 || k > n) return 0;
  return binomial_row(n)[k];
}

double log_binom(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

int128 gcd128(int128 a, int128 b) {
  uint128 x = a < 0 ? static_cast<uint128>(-a) : static_cast<uint128>(a);
  uint128 y = b < 0 ? static_cast<uint128>(-b) : static_cast<uint128>(b);
  while (y != 0) {
    uint128 t = x % y;
    x = y;
    y = t;
  }
  return static_cast<int128>(x);
}

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Signed numerator of expected_intersection_sign times C(m,q), exact for
// m <= 64: sum_k (-1)^k C(p,k) C(m-p,q-k).
int128 intersection_sign_numerator(int p, int q, int m) {
  int128 total = 0;
  const int klo = std::max(0, q - (m - p));
  const int khi = std::min(p, q);
  for (int k = klo; k <= khi; ++k) {
    const int128 term = static_cast<int128>(binom_u64(p, k)) *
                        static_cast<int128>(binom_u64(m - p, q - k));
    total += (k % 2 == 0) ? term : -term;
  }
  return total;
}

double ratio128(int128 num, int128 den) {
  if (num == 0) return 0.0;
  const int128 g = gcd128(num, den);
  return static_cast<double>(num / g) / static_cast<double>(den / g);
}

}  // namespace

double expected_intersection_sign(int p, int q, int m) {
  if (m < 0 || p < 0 || q < 0 || p > m || q > m) {
    throw std::invalid_argument("expected_intersection_sign: need 0 <= p,q <= m");
  }
  if (m <= 64) {
    return ratio128(intersection_sign_numerator(p, q, m),
                    static_cast<int128>(binom_u64(m, q)));
  }
  const double log_den = log_binom(m, q);
  const int klo = std::max(0, q - (m - p));
  const int khi = std::min(p, q);
  KahanSum acc;
  for (int k = klo; k <= khi; ++k) {
    const double magnitude = std::exp(log_binom(p, k) + log_binom(m - p, q - k) - log_den);
    acc.add((k % 2 == 0) ? magnitude : -magnitude);
  }
  return acc.sum;
}

double exact_pair_sign_expectation(int n1, int n2, int a, int r1, int r2) {
  if (n1 < 0 || n2 < 0 || a < 0 || a > std::min(n1, n2) || r1 < 0 || r1 > n1 || r2 < 0 ||
      r2 > n2) {
    throw std::invalid_argument("exact_pair_sign_expectation: domain violation");
  }
  if (a == 0 || r1 == 0 || r2 == 0) return 1.0;
  const int tlo = std::max(0, r1 - (n1 - a));
  const int thi = std::min(r1, a);
  if (n1 <= 64 && n2 <= 64) {
    int128 num = 0;
    for (int t = tlo; t <= thi; ++t) {
      const int128 weight = static_cast<int128>(binom_u64(a, t)) *
                            static_cast<int128>(binom_u64(n1 - a, r1 - t));
      num += weight * intersection_sign_numerator(t, r2, n2);
    }
    const int128 den = static_cast<int128>(binom_u64(n1, r1)) *
                       static_cast<int128>(binom_u64(n2, r2));
    return ratio128(num, den);
  }
  const double log_den1 = log_binom(n1, r1);
  KahanSum acc;
  for (int t = tlo; t <= thi; ++t) {
    const double pmf = std::exp(log_binom(a, t) + log_binom(n1 - a, r1 - t) - log_den1);
    acc.add(pmf * expected_intersection_sign(t, r2, n2));
  }
  return acc.sum;
}

void OverlapConfig::validate() const {
  if (domains.size() != sizes.size()) {
    throw std::invalid_argument("OverlapConfig: one size per domain required");
  }
  for (std::size_t i = 0; i < domains.size(); ++i) {
    const auto& dom = domains[i];
    std::set<int> distinct(dom.begin(), dom.end());
    if (distinct.size() != dom.size()) {
      throw std::invalid_argument("OverlapConfig: domain " + std::to_string(i) +
                                  " repeats an index");
    }
    if (!dom.empty() && *distinct.begin() <= 0) {
      throw std::invalid_argument("OverlapConfig: domain " + std::to_string(i) +
                                  " contains a nonpositive index");
    }
    if (sizes[i] < 0 || sizes[i] > static_cast<int>(dom.size())) {
      throw std::invalid_argument("OverlapConfig: subset size for domain " + std::to_string(i) +
                                  " exceeds the domain");
    }
  }
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= static_cast<int>(domains.size()) ||
        j >= static_cast<int>(domains.size()) || i >= j) {
      throw std::invalid_argument("OverlapConfig: edge endpoints must name domains with i < j");
    }
  }
}

int OverlapConfig::max_index() const {
  int top = 0;
  for (const auto& dom : domains) {
    for (int x : dom) top = std::max(top, x);
  }
  return top;
}

std::vector<int> sample_uniform_subset(const std::vector<int>& domain, int r, SplitMix64& rng) {
  if (r < 0 || r > static_cast<int>(domain.size())) {
    throw std::invalid_argument("sample_uniform_subset: subset size exceeds domain");
  }
  SubsetSampler sampler(domain);
  std::vector<int> out;
  sampler.sample(r, rng, out);
  return out;
}

namespace {

// Epoch-stamped membership marks over the index range, O(set size) per use
// with no clearing between uses.
class StampCounter {
 public:
  explicit StampCounter(int max_index) : stamp_(static_cast<std::size_t>(max_index) + 1, 0) {}

  void mark(const std::vector<int>& s) {
    if (epoch_ == std::numeric_limits<std::uint32_t>::max()) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      epoch_ = 0;
    }
    ++epoch_;
    for (int x : s) stamp_[static_cast<std::size_t>(x)] = epoch_;
  }

  bool marked(int x) const { return stamp_[static_cast<std::size_t>(x)] == epoch_; }

  int count_marked(const std::vector<int>& s) const {
    int count = 0;
    for (int x : s) count += marked(x) ? 1 : 0;
    return count;
  }

 private:
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

std::vector<int> vertices_of(const std::vector<std::pair<int, int>>& edges) {
  std::set<int> vs;
  for (const auto& [i, j] : edges) {
    vs.insert(i);
    vs.insert(j);
  }
  return {vs.begin(), vs.end()};
}

MomentEstimate mc_mean(double sum, double sum_sq, std::uint64_t n, Method method) {
  const double mean = sum / static_cast<double>(n);
  double variance = 0.0;
  if (n > 1) {
    variance = (sum_sq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
    variance = std::max(variance, 0.0);
  }
  return {mean, std::sqrt(variance / static_cast<double>(n)), n, method};
}

// Draws the subsets for the requested vertices (ascending order, one stream)
// and returns per-vertex views into `storage`.
class FamilySampler {
 public:
  FamilySampler(const OverlapConfig& cfg, const std::vector<int>& vertices) {
    for (int v : vertices) {
      samplers_.emplace_back(cfg.domains[static_cast<std::size_t>(v)]);
      sizes_.push_back(cfg.sizes[static_cast<std::size_t>(v)]);
      slot_of_vertex_.resize(
          std::max(slot_of_vertex_.size(), static_cast<std::size_t>(v) + 1), -1);
      slot_of_vertex_[static_cast<std::size_t>(v)] = static_cast<int>(samplers_.size()) - 1;
    }
    draws_.resize(samplers_.size());
  }

  void draw(SplitMix64& rng) {
    for (std::size_t s = 0; s < samplers_.size(); ++s) {
      samplers_[s].sample(sizes_[s], rng, draws_[s]);
    }
  }

  const std::vector<int>& subset(int vertex) const {
    return draws_[static_cast<std::size_t>(slot_of_vertex_[static_cast<std::size_t>(vertex)])];
  }

 private:
  std::vector<SubsetSampler> samplers_;
  std::vector<int> sizes_;
  std::vector<int> slot_of_vertex_;
  std::vector<std::vector<int>> draws_;
};

}  // namespace

MomentEstimate sign_expectation_mc(const OverlapConfig& cfg, std::uint64_t samples,
                                   SplitMix64& rng) {
  cfg.validate();
  if (samples == 0) {
    throw std::invalid_argument("sign_expectation_mc: need at least one sample");
  }
  const auto vertices = vertices_of(cfg.edges);
  FamilySampler sampler(cfg, vertices);
  StampCounter stamps(cfg.max_index());
  double sum = 0.0;
  for (std::uint64_t s = 0; s < samples; ++s) {
    sampler.draw(rng);
    int exponent = 0;
    for (const auto& [i, j] : cfg.edges) {
      stamps.mark(sampler.subset(i));
      exponent += stamps.count_marked(sampler.subset(j));
    }
    sum += (exponent % 2 == 0) ? 1.0 : -1.0;
  }
  // Signs are +/-1, so the second moment is exactly the sample count.
  return mc_mean(sum, static_cast<double>(samples), samples, Method::kReducedMc);
}

MomentEstimate sign_expectation_exact_or_mc(const OverlapConfig& cfg, std::uint64_t mc_samples,
                                            SplitMix64& rng) {
  cfg.validate();
  if (cfg.edges.empty()) {
    return {1.0, 0.0, 0, Method::kFiniteNFormula};
  }
  std::set<int> seen;
  bool vertex_disjoint = true;
  for (const auto& [i, j] : cfg.edges) {
    if (!seen.insert(i).second || !seen.insert(j).second) {
      vertex_disjoint = false;
      break;
    }
  }
  if (vertex_disjoint) {
    StampCounter stamps(cfg.max_index());
    double product = 1.0;
    for (const auto& [i, j] : cfg.edges) {
      const auto& di = cfg.domains[static_cast<std::size_t>(i)];
      const auto& dj = cfg.domains[static_cast<std::size_t>(j)];
      stamps.mark(di);
      const int a = stamps.count_marked(dj);
      product *= exact_pair_sign_expectation(static_cast<int>(di.size()),
                                             static_cast<int>(dj.size()), a,
                                             cfg.sizes[static_cast<std::size_t>(i)],
                                             cfg.sizes[static_cast<std::size_t>(j)]);
    }
    return {product, 0.0, 0, Method::kFiniteNFormula};
  }
  return sign_expectation_mc(cfg, mc_samples, rng);
}

MomentEstimate falling_factorial_moment_mc(const OverlapConfig& cfg, int k,
                                           std::uint64_t samples, SplitMix64& rng) {
  cfg.validate();
  if (k < 0 || k > 8) {
    throw std::invalid_argument("falling_factorial_moment_mc: order must lie in [0, 8]");
  }
  if (samples == 0) {
    throw std::invalid_argument("falling_factorial_moment_mc: need at least one sample");
  }
  double k_factorial = 1.0;
  for (int i = 2; i <= k; ++i) k_factorial *= i;
  const auto vertices = vertices_of(cfg.edges);
  FamilySampler sampler(cfg, vertices);
  StampCounter stamps(cfg.max_index());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::uint64_t s = 0; s < samples; ++s) {
    sampler.draw(rng);
    int total = 0;
    for (const auto& [i, j] : cfg.edges) {
      stamps.mark(sampler.subset(i));
      total += stamps.count_marked(sampler.subset(j));
    }
    double statistic = 1.0;
    for (int i = 0; i < k; ++i) statistic *= static_cast<double>(total - i);
    statistic /= k_factorial;
    sum += statistic;
    sum_sq += statistic * statistic;
  }
  return mc_mean(sum, sum_sq, samples, Method::kReducedMc);
}

MomentEstimate pair_disjointness_probability_mc(const OverlapConfig& cfg,
                                                std::pair<int, int> edge1,
                                                std::pair<int, int> edge2,
                                                std::uint64_t samples, SplitMix64& rng) {
  cfg.validate();
  if (edge1 == edge2) {
    throw std::invalid_argument("pair_disjointness_probability_mc: edges must be distinct");
  }
  if (samples == 0) {
    throw std::invalid_argument("pair_disjointness_probability_mc: need at least one sample");
  }
  const std::vector<std::pair<int, int>> edges{edge1, edge2};
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= static_cast<int>(cfg.domains.size()) ||
        j >= static_cast<int>(cfg.domains.size()) || i >= j) {
      throw std::invalid_argument("pair_disjointness_probability_mc: edge endpoints invalid");
    }
  }
  const auto vertices = vertices_of(edges);
  FamilySampler sampler(cfg, vertices);
  StampCounter stamps(cfg.max_index());
  std::vector<int> x1;
  std::vector<int> x2;
  double sum = 0.0;
  for (std::uint64_t s = 0; s < samples; ++s) {
    sampler.draw(rng);
    x1.clear();
    x2.clear();
    stamps.mark(sampler.subset(edge1.first));
    for (int x : sampler.subset(edge1.second)) {
      if (stamps.marked(x)) x1.push_back(x);
    }
    stamps.mark(sampler.subset(edge2.first));
    for (int x : sampler.subset(edge2.second)) {
      if (stamps.marked(x)) x2.push_back(x);
    }
    stamps.mark(x1);
    const bool collision = std::any_of(x2.begin(), x2.end(),
                                       [&](int x) { return stamps.marked(x); });
    sum += collision ? 1.0 : 0.0;
  }
  // The indicator squares to itself, so sum doubles as the second moment.
  return mc_mean(sum, sum, samples, Method::kReducedMc);
}

}  // namespace qmix::overlap_stats
