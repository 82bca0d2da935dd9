#include "qmix/syk.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "qmix/errors.hpp"
#include "qmix/overlap_stats.hpp"

namespace qmix::syk {

namespace {

constexpr std::complex<double> kQuarterPhase[4] = {
    {1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};

// Number of r-subsets of an n-set, saturating at `cap` (values below the
// saturation point are exact in double precision).
double subset_count_capped(int n, int r, double cap) {
  if (r < 0 || r > n) return 0.0;
  double c = 1.0;
  for (int k = 1; k <= r; ++k) {
    c = c * static_cast<double>(n - r + k) / static_cast<double>(k);
    if (c > cap) return cap * 2.0;
  }
  return c;
}

// Visits every r-subset of positions {0, ..., n-1} in colexicographic order
// (sorted by largest element, then recursively).  `visit` receives the
// current position vector; returning false stops the walk.
template <class F>
void for_each_colex_subset(int n, int r, F&& visit) {
  if (r < 0 || r > n) return;
  std::vector<int> c(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) c[static_cast<std::size_t>(i)] = i;
  for (;;) {
    if (!visit(std::span<const int>(c))) return;
    int i = 0;
    while (i < r) {
      const int limit = (i + 1 < r) ? c[static_cast<std::size_t>(i + 1)] : n;
      if (c[static_cast<std::size_t>(i)] + 1 < limit) break;
      ++i;
    }
    if (i == r) return;
    ++c[static_cast<std::size_t>(i)];
    for (int j = 0; j < i; ++j) c[static_cast<std::size_t>(j)] = j;
  }
}

std::vector<int> sorted_domain(const SykModelSpec& spec) {
  std::vector<int> d = spec.domain;
  std::sort(d.begin(), d.end());
  return d;
}

void validate_word_labels(const SykFamily& family, const Word& word) {
  for (int ell : word) {
    if (ell < 0 || ell >= family.labels()) {
      throw std::invalid_argument("word letter " + std::to_string(ell) +
                                  " is outside the family's label range");
    }
  }
}

void require_positive_lengths(const SykFamily& family, const Word& word) {
  for (int ell : word) {
    if (family.spec(ell).interaction_length < 1) {
      throw std::invalid_argument("label " + std::to_string(ell) +
                                  " has interaction length 0; the model is a "
                                  "scalar and has no coupling sum");
    }
  }
}

int quarter_phase_exponent(const SykFamily& family, const Word& word) {
  int total = 0;
  for (int ell : word) {
    total += (family.spec(ell).interaction_length / 2) % 4;
  }
  return total % 4;
}

struct MeanResult {
  double mean = 0.0;
  double std_err = 0.0;
};

MeanResult mean_from_sums(double sum, double sum_sq, std::uint64_t n) {
  MeanResult r;
  if (n == 0) return r;
  const double nd = static_cast<double>(n);
  r.mean = sum / nd;
  if (n >= 2) {
    double var = (sum_sq - sum * sum / nd) / (nd - 1.0);
    if (var < 0.0) var = 0.0;
    r.std_err = std::sqrt(var / nd);
  }
  return r;
}

}  // namespace

const char* coupling_law_name(CouplingLaw law) {
  switch (law) {
    case CouplingLaw::kGaussian:
      return "gaussian";
    case CouplingLaw::kRademacher:
      return "rademacher";
  }
  return "unknown";
}

void SykModelSpec::validate() const {
  if (domain.empty()) {
    throw std::invalid_argument("model domain is empty");
  }
  for (int idx : domain) {
    if (idx < 1) {
      throw std::invalid_argument("domain indices must be >= 1 (got " +
                                  std::to_string(idx) + ")");
    }
  }
  std::vector<int> sorted = domain;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("domain indices must be pairwise distinct");
  }
  if (interaction_length < 0 || interaction_length > size()) {
    throw std::invalid_argument("interaction length " +
                                std::to_string(interaction_length) +
                                " is outside [0, |domain|]");
  }
}

SykFamily::SykFamily(std::vector<SykModelSpec> specs) : specs_(std::move(specs)) {
  if (specs_.empty()) {
    throw std::invalid_argument("family needs at least one model");
  }
  const int n = specs_.front().size();
  std::vector<std::vector<int>> sorted;
  sorted.reserve(specs_.size());
  for (const auto& s : specs_) {
    s.validate();
    if (s.size() != n) {
      throw std::invalid_argument(
          "all models in a family must share one domain size (got " +
          std::to_string(s.size()) + " vs " + std::to_string(n) + ")");
    }
    sorted.push_back(sorted_domain(s));
  }
  const std::size_t k = specs_.size();
  overlaps_.assign(k * k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      const auto& a = sorted[i];
      const auto& b = sorted[j];
      int count = 0;
      std::size_t x = 0, y = 0;
      while (x < a.size() && y < b.size()) {
        if (a[x] < b[y]) {
          ++x;
        } else if (a[x] > b[y]) {
          ++y;
        } else {
          ++count;
          ++x;
          ++y;
        }
      }
      overlaps_[i * k + j] = count;
      overlaps_[j * k + i] = count;
    }
  }
}

int SykFamily::domain_size() const { return specs_.front().size(); }

int SykFamily::overlap(int i, int j) const {
  const int k = labels();
  if (i < 0 || i >= k || j < 0 || j >= k) {
    throw std::invalid_argument("overlap label out of range");
  }
  return overlaps_[static_cast<std::size_t>(i) * static_cast<std::size_t>(k) +
                   static_cast<std::size_t>(j)];
}

double SykFamily::lambda_hat(int i, int j) const {
  const double n = static_cast<double>(domain_size());
  const double ri = static_cast<double>(spec(i).interaction_length);
  const double rj = static_cast<double>(spec(j).interaction_length);
  return ri * rj * static_cast<double>(overlap(i, j)) / (n * n);
}

int SykFamily::parity(int k) const { return spec(k).interaction_length % 2; }

// ---------------------------------------------------------------------------
// Dense sampling.

majorana::DenseOperator sample_hamiltonian(const SykModelSpec& spec, SplitMix64& rng,
                                           int qubit_cap, std::uint64_t enumeration_cap) {
  spec.validate();
  const int r = spec.interaction_length;
  if (r < 1) {
    throw std::invalid_argument("interaction length must be >= 1 to sample");
  }
  const std::vector<int> domain = sorted_domain(spec);
  const int n = static_cast<int>(domain.size());
  const int max_index = domain.back();
  const int qubits = (max_index + 1) / 2;
  if (qubits > qubit_cap) {
    throw CapExceeded("dense sampling needs " + std::to_string(qubits) +
                      " qubits, above the cap of " + std::to_string(qubit_cap));
  }
  const double count = subset_count_capped(n, r, static_cast<double>(enumeration_cap));
  if (count > static_cast<double>(enumeration_cap)) {
    throw CapExceeded("coupling enumeration exceeds the cap of " +
                      std::to_string(enumeration_cap) + " subsets");
  }
  const double norm = 1.0 / std::sqrt(count);
  const std::complex<double> prefactor = kQuarterPhase[(r / 2) % 4];

  const Eigen::Index dim = Eigen::Index{1} << qubits;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);

  std::vector<int> generators(static_cast<std::size_t>(r));
  for_each_colex_subset(n, r, [&](std::span<const int> positions) {
    double j;
    if (spec.law == CouplingLaw::kGaussian) {
      j = gaussian_from_bits(rng.next(), rng.next());
    } else {
      j = (rng.next() & 1) ? 1.0 : -1.0;
    }
    for (int t = 0; t < r; ++t) {
      generators[static_cast<std::size_t>(t)] = domain[static_cast<std::size_t>(positions[static_cast<std::size_t>(t)])];
    }
    const std::complex<double> coeff = prefactor * (j * norm);
    // Column action of g_{i_1} ... g_{i_r} (indices ascending): the rightmost
    // generator acts first.  Generator g <= qubits is X on qubit g behind a
    // Z-prefix; generator qubits + g is Y on qubit g behind the same prefix.
    // Qubit 1 owns the most significant bit of the basis index.
    for (Eigen::Index col = 0; col < dim; ++col) {
      std::uint64_t x = static_cast<std::uint64_t>(col);
      std::complex<double> amp = coeff;
      for (int t = r - 1; t >= 0; --t) {
        const int g = generators[static_cast<std::size_t>(t)];
        const bool x_type = g <= qubits;
        const int qubit = x_type ? g : g - qubits;  // 1-based
        const int bit = qubits - qubit;
        const std::uint64_t prefix_mask =
            ((std::uint64_t{1} << (qubit - 1)) - 1) << (bit + 1);
        if (std::popcount(x & prefix_mask) & 1) amp = -amp;
        if (!x_type) {
          amp *= ((x >> bit) & 1) ? std::complex<double>(0.0, -1.0)
                                  : std::complex<double>(0.0, 1.0);
        }
        x ^= std::uint64_t{1} << bit;
      }
      h(static_cast<Eigen::Index>(x), col) += amp;
    }
    return true;
  });

  double herm = 0.0;
  for (Eigen::Index a = 0; a < dim; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      herm = std::max(herm, std::abs(h(a, b) - std::conj(h(b, a))));
    }
  }
  if (herm > 1e-10) {
    throw std::logic_error("sampled hamiltonian failed the self-adjointness check");
  }
  return majorana::DenseOperator{qubits, std::move(h)};
}

// ---------------------------------------------------------------------------
// Monte Carlo via support-indexed coefficient tables.

namespace {

using SupportKey = std::array<std::uint64_t, 4>;

struct KeyHash {
  std::size_t operator()(const SupportKey& k) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (std::uint64_t w : k) h = mix64(h ^ w);
    return static_cast<std::size_t>(h);
  }
};

using SupportMap = std::unordered_map<SupportKey, double, KeyHash>;

SupportKey key_xor(const SupportKey& a, const SupportKey& b) {
  return {a[0] ^ b[0], a[1] ^ b[1], a[2] ^ b[2], a[3] ^ b[3]};
}

int key_weight(const SupportKey& k) {
  return std::popcount(k[0]) + std::popcount(k[1]) + std::popcount(k[2]) +
         std::popcount(k[3]);
}

int key_inversion_parity(const SupportKey& a, const SupportKey& b) {
  return majorana::inversion_parity(std::span<const std::uint64_t>(a.data(), a.size()),
                                    std::span<const std::uint64_t>(b.data(), b.size()));
}

struct LabelTable {
  bool used = false;
  std::vector<SupportKey> subsets;  // colex order over the sorted domain
  double norm = 0.0;                // C(n, r)^{-1/2}
  CouplingLaw law = CouplingLaw::kGaussian;
};

// Folds one half of the word into a support-indexed table of real
// coefficients: sum over subset choices of the coupling product times the
// inversion sign, keyed by the symmetric difference of the chosen supports.
// All quarter-phase prefactors are handled globally by the caller.
void fold_half(std::span<const int> half, const std::vector<LabelTable>& tables,
               const std::vector<std::vector<double>>& coupled, SupportMap& cur,
               SupportMap& nxt) {
  cur.clear();
  cur.emplace(SupportKey{0, 0, 0, 0}, 1.0);
  for (int ell : half) {
    const auto& table = tables[static_cast<std::size_t>(ell)];
    const auto& j = coupled[static_cast<std::size_t>(ell)];
    nxt.clear();
    for (const auto& [key, c] : cur) {
      for (std::size_t rank = 0; rank < table.subsets.size(); ++rank) {
        const SupportKey& sub = table.subsets[rank];
        const double signed_c =
            key_inversion_parity(key, sub) ? -c * j[rank] : c * j[rank];
        nxt[key_xor(key, sub)] += signed_c;
      }
    }
    cur.swap(nxt);
  }
}

// sum_s L[s] R[s] tr(Psi_s Psi_s) with tr(Psi_s^2) = (-1)^{w(w-1)/2}.
double join_halves(const SupportMap& left, const SupportMap& right) {
  const SupportMap& small = left.size() <= right.size() ? left : right;
  const SupportMap& large = left.size() <= right.size() ? right : left;
  double total = 0.0;
  for (const auto& [key, c] : small) {
    const auto it = large.find(key);
    if (it == large.end()) continue;
    const int w = key_weight(key) & 3;
    const double term = c * it->second;
    total += (w == 2 || w == 3) ? -term : term;
  }
  return total;
}

}  // namespace

MomentEstimate mc_joint_moment(const SykFamily& family, const Word& word,
                               std::uint64_t samples, const McOptions& opts) {
  validate_word_labels(family, word);
  require_positive_lengths(family, word);
  if (samples == 0) {
    throw std::invalid_argument("sample count must be positive");
  }
  if (opts.threads < 1) {
    throw std::invalid_argument("thread count must be >= 1");
  }
  if (word.empty()) {
    return MomentEstimate{1.0, 0.0, samples, Method::kDenseMc};
  }

  // Per-label subset tables for the labels the word uses.
  std::vector<LabelTable> tables(static_cast<std::size_t>(family.labels()));
  for (int ell : word) {
    auto& table = tables[static_cast<std::size_t>(ell)];
    if (table.used) continue;
    table.used = true;
    const SykModelSpec& spec = family.spec(ell);
    const std::vector<int> domain = sorted_domain(spec);
    if (domain.back() > opts.index_cap) {
      throw CapExceeded("domain index " + std::to_string(domain.back()) +
                        " exceeds the support capacity of " +
                        std::to_string(opts.index_cap));
    }
    const double count = subset_count_capped(spec.size(), spec.interaction_length,
                                             static_cast<double>(opts.enumeration_cap));
    if (count > static_cast<double>(opts.enumeration_cap)) {
      throw CapExceeded("coupling enumeration exceeds the cap of " +
                        std::to_string(opts.enumeration_cap) + " subsets");
    }
    table.norm = 1.0 / std::sqrt(count);
    table.law = spec.law;
    table.subsets.reserve(static_cast<std::size_t>(count));
    for_each_colex_subset(spec.size(), spec.interaction_length,
                          [&](std::span<const int> positions) {
                            SupportKey key{0, 0, 0, 0};
                            for (int p : positions) {
                              const int bit = domain[static_cast<std::size_t>(p)] - 1;
                              key[static_cast<std::size_t>(bit >> 6)] |=
                                  std::uint64_t{1} << (bit & 63);
                            }
                            table.subsets.push_back(key);
                            return true;
                          });
  }

  const int phase = quarter_phase_exponent(family, word);
  // Samples are join * i^phase with join real, so only phase 0 and 2 leave a
  // real part; odd phases average a quantity that is identically zero.
  const double phase_re = kQuarterPhase[phase].real();

  const std::size_t d = word.size();
  const std::size_t h = d / 2;
  const std::span<const int> left_half(word.data(), h);
  const std::span<const int> right_half(word.data() + h, d - h);
  const bool halves_equal =
      h == d - h && std::equal(left_half.begin(), left_half.end(), right_half.begin());

  const std::uint64_t chunk_count = std::min<std::uint64_t>(64, samples);
  std::vector<double> chunk_sum(chunk_count, 0.0);
  std::vector<double> chunk_sum_sq(chunk_count, 0.0);
  std::atomic<std::uint64_t> next_chunk{0};

  auto worker = [&]() {
    SupportMap left, right, scratch;
    std::vector<std::vector<double>> coupled(tables.size());
    for (std::size_t ell = 0; ell < tables.size(); ++ell) {
      coupled[ell].resize(tables[ell].subsets.size());
    }
    for (;;) {
      const std::uint64_t c = next_chunk.fetch_add(1);
      if (c >= chunk_count) return;
      const std::uint64_t lo = c * samples / chunk_count;
      const std::uint64_t hi = (c + 1) * samples / chunk_count;
      double sum = 0.0, sum_sq = 0.0;
      for (std::uint64_t s = lo; s < hi; ++s) {
        for (std::size_t ell = 0; ell < tables.size(); ++ell) {
          const auto& table = tables[ell];
          if (!table.used) continue;
          const CouplingStream stream{derive_key(opts.seed, s, ell)};
          auto& j = coupled[ell];
          if (table.law == CouplingLaw::kGaussian) {
            for (std::size_t rank = 0; rank < j.size(); ++rank) {
              j[rank] = stream.gaussian(rank) * table.norm;
            }
          } else {
            for (std::size_t rank = 0; rank < j.size(); ++rank) {
              j[rank] = stream.rademacher(rank) * table.norm;
            }
          }
        }
        fold_half(left_half, tables, coupled, left, scratch);
        double join;
        if (halves_equal) {
          join = join_halves(left, left);
        } else {
          fold_half(right_half, tables, coupled, right, scratch);
          join = join_halves(left, right);
        }
        const double value = phase_re * join;
        sum += value;
        sum_sq += value * value;
      }
      chunk_sum[c] = sum;
      chunk_sum_sq[c] = sum_sq;
    }
  };

  const unsigned hw = std::thread::hardware_concurrency();
  const std::uint64_t worker_count =
      std::min<std::uint64_t>(static_cast<std::uint64_t>(opts.threads),
                              std::max<std::uint64_t>(1, hw ? hw : 1));
  if (worker_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(worker_count));
    for (std::uint64_t t = 0; t < worker_count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  double sum = 0.0, sum_sq = 0.0;
  for (std::uint64_t c = 0; c < chunk_count; ++c) {
    sum += chunk_sum[c];
    sum_sq += chunk_sum_sq[c];
  }
  const MeanResult m = mean_from_sums(sum, sum_sq, samples);
  return MomentEstimate{m.mean, m.std_err, samples, Method::kDenseMc};
}

// ---------------------------------------------------------------------------
// Exact small-system expectation.

namespace {

double coupling_group_moment(CouplingLaw law, int count) {
  if (count % 2 != 0) return 0.0;
  if (law == CouplingLaw::kRademacher) return 1.0;
  double m = 1.0;
  for (int x = count - 1; x > 1; x -= 2) m *= static_cast<double>(x);
  return m;
}

struct ExactGroup {
  std::uint64_t rank = 0;
  majorana::MajoranaMonomial monomial;
  int count = 0;
};

struct ExactContext {
  const SykFamily* family = nullptr;
  Word word;
  std::vector<std::vector<int>> domains;       // sorted, per label
  std::vector<std::vector<int>> suffix_count;  // positions of label strictly after t
  std::vector<std::vector<ExactGroup>> groups;
  std::vector<std::unordered_set<std::uint64_t>> used_ranks;
  std::vector<int> odd_groups;  // per label
  std::vector<majorana::MajoranaMonomial> stack;
  std::complex<double> total{0.0, 0.0};
  double law_weight_cache = 0.0;
};

void exact_leaf(ExactContext& ctx) {
  const majorana::MajoranaMonomial& prod = ctx.stack.back();
  if (!prod.is_scalar()) return;
  double weight = 1.0;
  for (std::size_t ell = 0; ell < ctx.groups.size(); ++ell) {
    const CouplingLaw law = ctx.family->spec(static_cast<int>(ell)).law;
    for (const auto& g : ctx.groups[ell]) {
      weight *= coupling_group_moment(law, g.count);
      if (weight == 0.0) return;
    }
  }
  ctx.total += weight * prod.scalar();
}

void exact_rec(ExactContext& ctx, std::size_t t) {
  if (t == ctx.word.size()) {
    exact_leaf(ctx);
    return;
  }
  const int ell = ctx.word[t];
  const std::size_t l = static_cast<std::size_t>(ell);
  const int remaining_after = ctx.suffix_count[l][t];

  // Deeper recursion can grow ctx.groups[l], so never hold references into it
  // across the recursive call; take the subset monomial by value.
  auto descend = [&](majorana::MajoranaMonomial subset) {
    ctx.stack.push_back(majorana::multiply(ctx.stack.back(), subset));
    exact_rec(ctx, t + 1);
    ctx.stack.pop_back();
  };

  // Reuse one of the subsets already on this label.
  const std::size_t group_count = ctx.groups[l].size();
  for (std::size_t gi = 0; gi < group_count; ++gi) {
    const int odd_delta = (ctx.groups[l][gi].count % 2 == 0) ? 1 : -1;
    if (ctx.odd_groups[l] + odd_delta > remaining_after) continue;
    ctx.groups[l][gi].count += 1;
    ctx.odd_groups[l] += odd_delta;
    descend(ctx.groups[l][gi].monomial);
    ctx.groups[l][gi].count -= 1;
    ctx.odd_groups[l] -= odd_delta;
  }

  // Introduce a fresh subset: only feasible if the new odd group can still be
  // closed by the remaining positions of this label.
  if (ctx.odd_groups[l] + 1 > remaining_after) return;
  const SykModelSpec& spec = ctx.family->spec(ell);
  const auto& domain = ctx.domains[l];
  std::vector<int> indices(static_cast<std::size_t>(spec.interaction_length));
  std::uint64_t rank = 0;
  for_each_colex_subset(spec.size(), spec.interaction_length,
                        [&](std::span<const int> positions) {
                          const std::uint64_t this_rank = rank++;
                          if (ctx.used_ranks[l].count(this_rank)) return true;
                          for (std::size_t i = 0; i < positions.size(); ++i) {
                            indices[i] = domain[static_cast<std::size_t>(positions[i])];
                          }
                          ctx.groups[l].push_back(ExactGroup{
                              this_rank,
                              majorana::MajoranaMonomial(std::span<const int>(indices)),
                              1});
                          ctx.used_ranks[l].insert(this_rank);
                          ctx.odd_groups[l] += 1;
                          descend(ctx.groups[l].back().monomial);
                          ctx.odd_groups[l] -= 1;
                          ctx.used_ranks[l].erase(this_rank);
                          ctx.groups[l].pop_back();
                          return true;
                        });
}

}  // namespace

MomentEstimate exact_joint_moment_small(const SykFamily& family, const Word& word,
                                        double term_cap) {
  validate_word_labels(family, word);
  require_positive_lengths(family, word);
  if (word.empty()) {
    return MomentEstimate{1.0, 0.0, 0, Method::kExactSmall};
  }

  const std::size_t k = static_cast<std::size_t>(family.labels());
  std::vector<int> counts(k, 0);
  for (int ell : word) counts[static_cast<std::size_t>(ell)] += 1;
  for (std::size_t ell = 0; ell < k; ++ell) {
    if (counts[ell] % 2 != 0) {
      // An odd power of some coupling family: every term has a vanishing
      // coupling moment.
      return MomentEstimate{0.0, 0.0, 0, Method::kExactSmall};
    }
  }

  double cost = 1.0;
  double norm = 1.0;
  for (std::size_t ell = 0; ell < k; ++ell) {
    if (counts[ell] == 0) continue;
    const SykModelSpec& spec = family.spec(static_cast<int>(ell));
    const double m =
        subset_count_capped(spec.size(), spec.interaction_length, term_cap * 4.0);
    for (int half = 0; half < counts[ell] / 2; ++half) {
      cost *= m;
      norm /= m;
      if (cost > term_cap) {
        throw CapExceeded("exact enumeration needs about " +
                          std::to_string(cost) + " terms, above the cap of " +
                          std::to_string(term_cap));
      }
    }
  }

  ExactContext ctx;
  ctx.family = &family;
  ctx.word = word;
  ctx.domains.resize(k);
  ctx.suffix_count.assign(k, std::vector<int>(word.size(), 0));
  ctx.groups.resize(k);
  ctx.used_ranks.resize(k);
  ctx.odd_groups.assign(k, 0);
  for (std::size_t ell = 0; ell < k; ++ell) {
    if (counts[ell] > 0) ctx.domains[ell] = sorted_domain(family.spec(static_cast<int>(ell)));
  }
  // suffix_count[l][t] = occurrences of label l strictly after position t.
  for (std::size_t ell = 0; ell < k; ++ell) {
    int running = 0;
    for (std::size_t t = word.size(); t-- > 0;) {
      ctx.suffix_count[ell][t] = running;
      if (static_cast<std::size_t>(word[t]) == ell) ++running;
    }
  }
  ctx.stack.emplace_back();  // identity

  exact_rec(ctx, 0);

  const std::complex<double> value =
      ctx.total * kQuarterPhase[quarter_phase_exponent(family, word)] * norm;
  if (std::abs(value.imag()) > 1e-9 * (1.0 + std::abs(value.real()))) {
    throw std::logic_error("exact joint moment has a non-real residue");
  }
  return MomentEstimate{value.real(), 0.0, 0, Method::kExactSmall};
}

// ---------------------------------------------------------------------------
// Pair-partition estimator and the limiting family.

MomentEstimate finite_n_pair_moment(const SykFamily& family, const Word& word,
                                    const PairFormulaOptions& opts) {
  validate_word_labels(family, word);
  if (word.empty()) {
    return MomentEstimate{1.0, 0.0, 0, Method::kFiniteNFormula};
  }
  if (word.size() % 2 != 0) {
    return MomentEstimate{0.0, 0.0, 0, Method::kFiniteNFormula};
  }

  SplitMix64 rng(derive_key(opts.seed, 0x70e1'5a1e'0ffeull));
  double value = 0.0;
  double variance = 0.0;
  std::uint64_t mc_samples = 0;
  bool any_mc = false;

  partitions::pair_partitions_below_kernel(word, [&](const partitions::PairPartition& p) {
    const auto& pairs = p.pairs;
    const std::size_t blocks = pairs.size();
    overlap_stats::OverlapConfig cfg;
    cfg.domains.reserve(blocks);
    cfg.sizes.reserve(blocks);
    int sign_exponent = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
      const int ell = word[static_cast<std::size_t>(pairs[b].first - 1)];
      const SykModelSpec& spec = family.spec(ell);
      cfg.domains.push_back(spec.domain);
      cfg.sizes.push_back(spec.interaction_length);
    }
    for (std::size_t b1 = 0; b1 < blocks; ++b1) {
      for (std::size_t b2 = b1 + 1; b2 < blocks; ++b2) {
        // Blocks are sorted by opener, so (b1, b2) cross exactly when the
        // second opener sits inside the first block's span.
        if (pairs[b2].first < pairs[b1].second && pairs[b1].second < pairs[b2].second) {
          cfg.edges.emplace_back(static_cast<int>(b1), static_cast<int>(b2));
          sign_exponent += cfg.sizes[b1] * cfg.sizes[b2];
        }
      }
    }
    const MomentEstimate est =
        overlap_stats::sign_expectation_exact_or_mc(cfg, opts.mc_samples, rng);
    const double sgn = (sign_exponent % 2 != 0) ? -1.0 : 1.0;
    value += sgn * est.value;
    variance += est.std_err * est.std_err;
    if (est.method == Method::kReducedMc) {
      any_mc = true;
      mc_samples += est.samples;
    }
    return true;
  });

  return MomentEstimate{value, std::sqrt(variance), mc_samples,
                        any_mc ? Method::kReducedMc : Method::kFiniteNFormula};
}

partitions::QMatrix limit_qmatrix(const SykFamily& family) {
  const int k = family.labels();
  std::vector<std::vector<double>> lambda(static_cast<std::size_t>(k),
                                          std::vector<double>(static_cast<std::size_t>(k), 0.0));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      lambda[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          family.lambda_hat(i, j);
    }
  }
  return limit_qmatrix(family, lambda);
}

partitions::QMatrix limit_qmatrix(const SykFamily& family,
                                  const std::vector<std::vector<double>>& lambda) {
  const int k = family.labels();
  if (lambda.size() != static_cast<std::size_t>(k)) {
    throw std::invalid_argument("lambda matrix must be labels x labels");
  }
  for (const auto& row : lambda) {
    if (row.size() != static_cast<std::size_t>(k)) {
      throw std::invalid_argument("lambda matrix must be labels x labels");
    }
  }
  partitions::QMatrix q(k, 1.0);
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) {
      const double lam = lambda[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const double mirror = lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      if (std::isnan(lam) || lam < 0.0) {
        throw std::invalid_argument("decay rates must be in [0, +infinity]");
      }
      if (!(lam == mirror)) {
        throw std::invalid_argument("lambda matrix must be symmetric");
      }
      const double magnitude = std::exp(-2.0 * lam);
      const int sign_parity = (family.parity(i) * family.parity(j)) % 2;
      q.set(i, j, sign_parity ? -magnitude : magnitude);
    }
  }
  return q;
}

double limit_moment(const SykFamily& family, const Word& word) {
  return partitions::qgaussian_moment(word, limit_qmatrix(family));
}

double limit_moment(const SykFamily& family, const Word& word,
                    const std::vector<std::vector<double>>& lambda) {
  return partitions::qgaussian_moment(word, limit_qmatrix(family, lambda));
}

std::vector<int> sweep_parity(const std::vector<SykFamily>& sweep) {
  if (sweep.empty()) {
    throw std::invalid_argument("sweep is empty");
  }
  const int k = sweep.front().labels();
  for (const auto& f : sweep) {
    if (f.labels() != k) {
      throw std::invalid_argument("all families in a sweep must share the label count");
    }
  }
  std::vector<int> parity(static_cast<std::size_t>(k), 0);
  for (int ell = 0; ell < k; ++ell) {
    parity[static_cast<std::size_t>(ell)] = sweep.front().parity(ell);
    for (const auto& f : sweep) {
      if (f.parity(ell) != parity[static_cast<std::size_t>(ell)]) {
        throw std::invalid_argument(
            "label " + std::to_string(ell) +
            " mixes interaction-length parities across the sweep; the limiting "
            "coupling sign is undefined");
      }
    }
  }
  return parity;
}

}  // namespace qmix::syk
