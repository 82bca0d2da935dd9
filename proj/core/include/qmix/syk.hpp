#pragma once

#include <cstdint>
#include <vector>

#include "qmix/estimate.hpp"
#include "qmix/majorana.hpp"
#include "qmix/partitions.hpp"
#include "qmix/rng.hpp"

namespace qmix::syk {

using partitions::Word;

enum class CouplingLaw { kGaussian, kRademacher };

const char* coupling_law_name(CouplingLaw law);

// One model: an index set A (the domain), an interaction length r, and the
// coupling law (mean 0, variance 1).
struct SykModelSpec {
  int label = 0;             // informational id; library words index by position
  std::vector<int> domain;   // positive, pairwise distinct indices
  int interaction_length = 0;
  CouplingLaw law = CouplingLaw::kGaussian;

  int size() const { return static_cast<int>(domain.size()); }
  void validate() const;  // throws std::invalid_argument
};

// A family of models sharing one domain size n, with pairwise overlaps
// a_{ij} = |A_i ∩ A_j| and finite-size rate estimates
// lambda_hat(i,j) = r_i r_j a_{ij} / n^2 recorded at construction.
class SykFamily {
 public:
  explicit SykFamily(std::vector<SykModelSpec> specs);

  int labels() const { return static_cast<int>(specs_.size()); }
  const SykModelSpec& spec(int k) const { return specs_.at(static_cast<std::size_t>(k)); }
  const std::vector<SykModelSpec>& specs() const { return specs_; }
  int domain_size() const;
  int overlap(int i, int j) const;
  double lambda_hat(int i, int j) const;
  int parity(int k) const;  // r_k mod 2

 private:
  std::vector<SykModelSpec> specs_;
  std::vector<int> overlaps_;  // flattened labels x labels
};

// H = i^{floor(r/2)} C(n,r)^{-1/2} sum_R J_R Psi_R over all r-subsets of the
// domain, couplings drawn sequentially from `rng` in colexicographic subset
// order.  Dense 2^q x 2^q realization with q = ceil(max index / 2).
majorana::DenseOperator sample_hamiltonian(const SykModelSpec& spec, SplitMix64& rng,
                                           int qubit_cap = 10,
                                           std::uint64_t enumeration_cap = 1'000'000);

struct McOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  int index_cap = 256;  // largest domain index the support keys can hold
  std::uint64_t enumeration_cap = 1'000'000;
};

// Monte Carlo mean of the normalized trace of H_{w_1} ... H_{w_d} over
// independent coupling draws.  Each draw's trace is evaluated exactly by
// folding the word halves into support-indexed coefficient tables, so no
// exponential-size matrices are formed.  Couplings are a pure function of
// (seed, sample, label, subset rank): results do not depend on the thread
// count, and chunked reduction makes them bit-stable too.
MomentEstimate mc_joint_moment(const SykFamily& family, const Word& word,
                               std::uint64_t samples, const McOptions& opts = {});

// Exact E[tr(H_{w_1} ... H_{w_d})] by exhaustive enumeration over subset
// assignments grouped by repeated couplings, with per-group moments from the
// coupling law (gaussian: (2m-1)!!, rademacher: 1).  Cost is roughly
// prod_k C(n, r_k)^{count_k / 2}; throws CapExceeded past `term_cap`.
MomentEstimate exact_joint_moment_small(const SykFamily& family, const Word& word,
                                        double term_cap = 1e7);

struct PairFormulaOptions {
  std::uint64_t mc_samples = 200000;  // per partition that needs sampling
  std::uint64_t seed = 0x5eedf00dULL;
};

// Pair-partition estimator: sum over pair partitions below the word kernel of
// (-1)^{sum of r_i r_j over crossing pairs} times the expected intersection
// sign, the latter exact when the crossing pairs are vertex-disjoint and
// Monte Carlo otherwise.  Scales to large n; no matrices are built.
MomentEstimate finite_n_pair_moment(const SykFamily& family, const Word& word,
                                    const PairFormulaOptions& opts = {});

// Coupling matrix of the limiting mixed family:
// q_{ij} = (-1)^{r_i r_j} e^{-2 lambda_{ij}}, with lambda from the family's
// finite-size lambda_hat by default or declared explicitly (entries in
// [0, +infinity]; e^{-infinity} = 0).
partitions::QMatrix limit_qmatrix(const SykFamily& family);
partitions::QMatrix limit_qmatrix(const SykFamily& family,
                                  const std::vector<std::vector<double>>& lambda);

// Moment of the limiting family via the pair-partition moment formula.
double limit_moment(const SykFamily& family, const Word& word);
double limit_moment(const SykFamily& family, const Word& word,
                    const std::vector<std::vector<double>>& lambda);

// Per-label interaction-length parity across a declared family sequence;
// throws std::invalid_argument when some label mixes parities (the limiting
// coupling sign is only defined along constant-parity sequences).
std::vector<int> sweep_parity(const std::vector<SykFamily>& sweep);

}  // namespace qmix::syk
