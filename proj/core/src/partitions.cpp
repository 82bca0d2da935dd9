#include "qmix/partitions.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "qmix/errors.hpp"

namespace qmix::partitions {

QMatrix::QMatrix(int labels, double fill) : labels_(labels) {
  if (labels <= 0) {
    throw std::invalid_argument("QMatrix: label count must be positive");
  }
  if (!(std::abs(fill) <= 1.0)) {
    throw std::invalid_argument("QMatrix: entries must lie in [-1, 1]");
  }
  q_.assign(static_cast<std::size_t>(labels) * static_cast<std::size_t>(labels), fill);
}

std::size_t QMatrix::index(int i, int j) const {
  if (i < 0 || j < 0 || i >= labels_ || j >= labels_) {
    throw std::out_of_range("QMatrix: label out of range");
  }
  return static_cast<std::size_t>(i) * static_cast<std::size_t>(labels_) +
         static_cast<std::size_t>(j);
}

void QMatrix::set(int i, int j, double value) {
  if (!(std::abs(value) <= 1.0)) {
    throw std::invalid_argument("QMatrix: entries must lie in [-1, 1]");
  }
  q_[index(i, j)] = value;
  q_[index(j, i)] = value;
}

namespace {

// Recursively pairs the smallest unpaired position with every admissible
// partner.  `letters` is null for the unconstrained enumeration; otherwise
// pairs must join equal letters.  Returns false when the visitor stopped.
bool enumerate_rec(int d2, const int* letters, std::vector<char>& used,
                   std::vector<std::pair<int, int>>& pairs,
                   const std::function<bool(const PairPartition&)>& visit) {
  int e = 0;
  while (e < d2 && used[e]) ++e;
  if (e == d2) {
    PairPartition p;
    p.pairs.reserve(pairs.size());
    for (const auto& [a, b] : pairs) p.pairs.emplace_back(a + 1, b + 1);
    return visit(p);
  }
  used[e] = 1;
  for (int z = e + 1; z < d2; ++z) {
    if (used[z]) continue;
    if (letters != nullptr && letters[z] != letters[e]) continue;
    used[z] = 1;
    pairs.emplace_back(e, z);
    bool keep_going = enumerate_rec(d2, letters, used, pairs, visit);
    pairs.pop_back();
    used[z] = 0;
    if (!keep_going) {
      used[e] = 0;
      return false;
    }
  }
  used[e] = 0;
  return true;
}

void run_enumeration(int d2, const int* letters,
                     const std::function<bool(const PairPartition&)>& visit) {
  std::vector<char> used(static_cast<std::size_t>(d2), 0);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(d2) / 2);
  enumerate_rec(d2, letters, used, pairs, visit);
}

}  // namespace

void enumerate_pair_partitions(int d2, const std::function<bool(const PairPartition&)>& visit,
                               int cap) {
  if (d2 < 0 || d2 % 2 != 0) {
    throw std::invalid_argument("enumerate_pair_partitions: size must be a nonnegative even int");
  }
  if (d2 > cap) {
    throw CapExceeded("enumerate_pair_partitions: size exceeds enumeration cap");
  }
  run_enumeration(d2, nullptr, visit);
}

void pair_partitions_below_kernel(const Word& word,
                                  const std::function<bool(const PairPartition&)>& visit) {
  if (word.size() % 2 != 0) return;
  run_enumeration(static_cast<int>(word.size()), word.data(), visit);
}

int crossing_number(const PairPartition& p) {
  int crossings = 0;
  const auto& ps = p.pairs;
  for (std::size_t b1 = 0; b1 < ps.size(); ++b1) {
    for (std::size_t b2 = b1 + 1; b2 < ps.size(); ++b2) {
      auto [e1, z1] = ps[b1];
      auto [e2, z2] = ps[b2];
      if (e2 < e1) {
        std::swap(e1, e2);
        std::swap(z1, z2);
      }
      if (e1 < e2 && e2 < z1 && z1 < z2) ++crossings;
    }
  }
  return crossings;
}

namespace {

void validate_partition_of_word(const PairPartition& p, const Word& word) {
  const int d2 = static_cast<int>(word.size());
  if (static_cast<int>(p.pairs.size()) * 2 != d2) {
    throw std::invalid_argument("crossing_counts: partition does not cover the word positions");
  }
  std::vector<char> seen(static_cast<std::size_t>(d2), 0);
  for (const auto& [e, z] : p.pairs) {
    if (e < 1 || z < 1 || e > d2 || z > d2 || e >= z) {
      throw std::invalid_argument("crossing_counts: malformed pair");
    }
    if (seen[e - 1] || seen[z - 1]) {
      throw std::invalid_argument("crossing_counts: repeated position");
    }
    seen[e - 1] = seen[z - 1] = 1;
    if (word[e - 1] != word[z - 1]) {
      throw std::invalid_argument("crossing_counts: pair joins unequal letters");
    }
  }
}

}  // namespace

std::map<std::pair<int, int>, int> crossing_counts(const PairPartition& p, const Word& word) {
  validate_partition_of_word(p, word);
  std::map<std::pair<int, int>, int> counts;
  const auto& ps = p.pairs;
  for (std::size_t b1 = 0; b1 < ps.size(); ++b1) {
    for (std::size_t b2 = b1 + 1; b2 < ps.size(); ++b2) {
      auto [e1, z1] = ps[b1];
      auto [e2, z2] = ps[b2];
      if (e2 < e1) {
        std::swap(e1, e2);
        std::swap(z1, z2);
      }
      if (e1 < e2 && e2 < z1 && z1 < z2) {
        ++counts[{word[e1 - 1], word[e2 - 1]}];
      }
    }
  }
  return counts;
}

namespace {

void validate_labels(const Word& word, const QMatrix& q, const char* who) {
  for (int letter : word) {
    if (letter < 0 || letter >= q.labels()) {
      throw std::invalid_argument(std::string(who) + ": word label outside coupling matrix");
    }
  }
}

// Fused enumeration + crossing-weight recursion.  Pairs the first unpaired
// position e with each later same-letter position z; a previously formed pair
// (e', z') crosses (e, z) exactly when e < z' < z, contributing q_{w[e'],w[e]}.
// Branches whose accumulated weight is exactly zero are pruned.
double moment_rec(const Word& w, const QMatrix& q, std::vector<char>& used,
                  std::vector<std::pair<int, int>>& pairs) {
  const int d2 = static_cast<int>(w.size());
  int e = 0;
  while (e < d2 && used[e]) ++e;
  if (e == d2) return 1.0;
  used[e] = 1;
  double total = 0.0;
  for (int z = e + 1; z < d2; ++z) {
    if (used[z] || w[z] != w[e]) continue;
    double factor = 1.0;
    for (const auto& [pe, pz] : pairs) {
      if (pz > e && pz < z) {
        factor *= q(w[pe], w[e]);
        if (factor == 0.0) break;
      }
    }
    if (factor == 0.0) continue;
    used[z] = 1;
    pairs.emplace_back(e, z);
    total += factor * moment_rec(w, q, used, pairs);
    pairs.pop_back();
    used[z] = 0;
  }
  used[e] = 0;
  return total;
}

}  // namespace

double qgaussian_moment(const Word& word, const QMatrix& q) {
  validate_labels(word, q, "qgaussian_moment");
  if (word.size() % 2 != 0) return 0.0;
  if (word.empty()) return 1.0;
  // A letter with odd multiplicity admits no pairing below the kernel.
  std::map<int, int> multiplicity;
  for (int letter : word) ++multiplicity[letter];
  for (const auto& [letter, count] : multiplicity) {
    if (count % 2 != 0) return 0.0;
  }
  std::vector<char> used(word.size(), 0);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(word.size() / 2);
  return moment_rec(word, q, used, pairs);
}

namespace {

// Weight of a completed partial pairing: crossings between pair blocks and
// singletons covered by a pair block.
double partial_pairing_weight(const std::vector<std::pair<int, int>>& pairs,
                              const std::vector<int>& singletons, const Word& w,
                              const QMatrix& q) {
  double weight = 1.0;
  for (std::size_t b1 = 0; b1 < pairs.size() && weight != 0.0; ++b1) {
    for (std::size_t b2 = b1 + 1; b2 < pairs.size(); ++b2) {
      auto [e1, z1] = pairs[b1];
      auto [e2, z2] = pairs[b2];
      if (e2 < e1) {
        std::swap(e1, e2);
        std::swap(z1, z2);
      }
      if (e1 < e2 && e2 < z1 && z1 < z2) {
        weight *= q(w[e1], w[e2]);
        if (weight == 0.0) break;
      }
    }
  }
  for (const auto& [e, z] : pairs) {
    if (weight == 0.0) break;
    for (int s : singletons) {
      if (s > e && s < z) {
        weight *= q(w[s], w[e]);
        if (weight == 0.0) break;
      }
    }
  }
  return weight;
}

void expansion_rec(const Word& w, const QMatrix& q, std::vector<char>& used,
                   std::vector<std::pair<int, int>>& pairs, std::vector<int>& singletons,
                   std::map<Word, double>& out) {
  const int d = static_cast<int>(w.size());
  int k = 0;
  while (k < d && used[k]) ++k;
  if (k == d) {
    const double weight = partial_pairing_weight(pairs, singletons, w, q);
    if (weight != 0.0) {
      Word key;
      key.reserve(singletons.size());
      for (int s : singletons) key.push_back(w[s]);
      out[key] += weight;
    }
    return;
  }
  used[k] = 1;
  singletons.push_back(k);
  expansion_rec(w, q, used, pairs, singletons, out);
  singletons.pop_back();
  for (int z = k + 1; z < d; ++z) {
    if (used[z] || w[z] != w[k]) continue;
    used[z] = 1;
    pairs.emplace_back(k, z);
    expansion_rec(w, q, used, pairs, singletons, out);
    pairs.pop_back();
    used[z] = 0;
  }
  used[k] = 0;
}

}  // namespace

std::map<Word, double> wick_vector_expansion(const Word& word, const QMatrix& q, int length_cap) {
  validate_labels(word, q, "wick_vector_expansion");
  if (static_cast<int>(word.size()) > length_cap) {
    throw CapExceeded("wick_vector_expansion: word length exceeds depth cap");
  }
  std::map<Word, double> out;
  std::vector<char> used(word.size(), 0);
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> singletons;
  expansion_rec(word, q, used, pairs, singletons, out);
  for (auto it = out.begin(); it != out.end();) {
    it = (it->second == 0.0) ? out.erase(it) : std::next(it);
  }
  return out;
}

namespace {

double polynomial_rec(const std::vector<LabeledPolynomial>& factors, std::size_t k,
                      Word& word, double coeff, const QMatrix& q) {
  if (k == factors.size()) {
    return coeff * qgaussian_moment(word, q);
  }
  const auto& factor = factors[k];
  double total = 0.0;
  for (std::size_t deg = 0; deg < factor.coeffs.size(); ++deg) {
    const double c = factor.coeffs[deg];
    if (c == 0.0) continue;
    const std::size_t before = word.size();
    word.insert(word.end(), deg, factor.label);
    total += polynomial_rec(factors, k + 1, word, coeff * c, q);
    word.resize(before);
  }
  return total;
}

}  // namespace

double polynomial_word_moment(const std::vector<LabeledPolynomial>& factors, const QMatrix& q,
                              int degree_cap) {
  for (const auto& factor : factors) {
    if (factor.label < 0 || factor.label >= q.labels()) {
      throw std::invalid_argument("polynomial_word_moment: label outside coupling matrix");
    }
    if (static_cast<int>(factor.coeffs.size()) > degree_cap + 1) {
      throw CapExceeded("polynomial_word_moment: polynomial degree exceeds cap");
    }
  }
  Word word;
  return polynomial_rec(factors, 0, word, 1.0, q);
}

}  // namespace qmix::partitions
