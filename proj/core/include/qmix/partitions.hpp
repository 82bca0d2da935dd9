#pragma once

#include <functional>
#include <map>
#include <utility>
#include <vector>

namespace qmix::partitions {

// A word is a sequence of labels (0-based) drawn from a finite label set.
using Word = std::vector<int>;

// Pair partition of the positions 1..2d, stored as (e, z) pairs with e < z,
// sorted by e (so pairs.front().first == 1 whenever nonempty).
struct PairPartition {
  std::vector<std::pair<int, int>> pairs;

  int size() const { return static_cast<int>(2 * pairs.size()); }

  friend bool operator==(const PairPartition&, const PairPartition&) = default;
};

// Symmetric coupling matrix q_{ij} for a label set {0, ..., size-1}; entries
// must lie in [-1, 1].
class QMatrix {
 public:
  explicit QMatrix(int labels, double fill = 0.0);

  static QMatrix constant(int labels, double value) { return QMatrix(labels, value); }

  int labels() const { return labels_; }

  double operator()(int i, int j) const { return q_[index(i, j)]; }

  void set(int i, int j, double value);

 private:
  std::size_t index(int i, int j) const;

  int labels_;
  std::vector<double> q_;
};

// Visits every pair partition of {1..d2}; stop early by returning false.
// d2 must be even and <= cap.
void enumerate_pair_partitions(int d2, const std::function<bool(const PairPartition&)>& visit,
                               int cap = 24);

// Visits the pair partitions whose every pair joins equal letters of `word`.
void pair_partitions_below_kernel(const Word& word,
                                  const std::function<bool(const PairPartition&)>& visit);

// Number of crossing block pairs, irrespective of labels.
int crossing_number(const PairPartition& p);

// Crossing counts keyed by ordered label pairs: blocks v1 < v2 (ordered by
// first element) crossing with v1 labeled i and v2 labeled j contribute to
// key (i, j).  Requires p to join only equal letters of `word`.
std::map<std::pair<int, int>, int> crossing_counts(const PairPartition& p, const Word& word);

// Joint moment of a word in the mixed family: sum over pair partitions below
// the word's kernel of the product of q_{ij} over crossings.  Odd length
// gives 0; the empty word gives 1.
double qgaussian_moment(const Word& word, const QMatrix& q);

// Expansion of s_{w_1} ... s_{w_d} applied to the vacuum in the basis of
// simple tensors, keyed by the surviving label sequence (the empty key is
// the vacuum component).  Each partial pairing sigma of the positions
// contributes q-weights from (a) crossing pair blocks and (b) singletons
// lying strictly inside a pair.
std::map<Word, double> wick_vector_expansion(const Word& word, const QMatrix& q,
                                             int length_cap = 12);

// Polynomial in one variable attached to a label; coeffs[k] multiplies x^k.
struct LabeledPolynomial {
  int label = 0;
  std::vector<double> coeffs;
};

// Moment of a product of single-variable polynomials evaluated at the family
// elements: expands the product and sums qgaussian_moment over the resulting
// words.  Each factor's degree must be <= degree_cap.
double polynomial_word_moment(const std::vector<LabeledPolynomial>& factors, const QMatrix& q,
                              int degree_cap = 8);

}  // namespace qmix::partitions
