#include "qmix/epsilon_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "qmix/errors.hpp"
#include "qmix/rng.hpp"

namespace qmix::epsilon_graph {

namespace {

std::size_t flat(int d, int i, int j) {
  return static_cast<std::size_t>(i) * static_cast<std::size_t>(d) +
         static_cast<std::size_t>(j);
}

}  // namespace

Graph Graph::empty_graph(int d) {
  Graph g;
  g.vertices = d;
  g.adjacency.assign(static_cast<std::size_t>(d) * static_cast<std::size_t>(d), 0);
  g.validate();
  return g;
}

Graph Graph::complete_graph(int d) {
  Graph g = empty_graph(d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i != j) g.adjacency[flat(d, i, j)] = 1;
    }
  }
  return g;
}

Graph Graph::path_graph(int d) {
  Graph g = empty_graph(d);
  for (int i = 0; i + 1 < d; ++i) {
    g.set_edge(i, i + 1, 1);
  }
  return g;
}

int Graph::edge(int i, int j) const {
  if (i < 0 || i >= vertices || j < 0 || j >= vertices) {
    throw std::invalid_argument("graph vertex out of range");
  }
  return adjacency[flat(vertices, i, j)];
}

void Graph::set_edge(int i, int j, int value) {
  if (i < 0 || i >= vertices || j < 0 || j >= vertices || i == j) {
    throw std::invalid_argument("graph edge endpoints out of range or equal");
  }
  if (value != 0 && value != 1) {
    throw std::invalid_argument("graph edges are 0 or 1");
  }
  adjacency[flat(vertices, i, j)] = static_cast<std::uint8_t>(value);
  adjacency[flat(vertices, j, i)] = static_cast<std::uint8_t>(value);
}

void Graph::validate() const {
  if (vertices < 1) {
    throw std::invalid_argument("graph needs at least one vertex");
  }
  const std::size_t d = static_cast<std::size_t>(vertices);
  if (adjacency.size() != d * d) {
    throw std::invalid_argument("adjacency size must be vertices^2");
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (adjacency[i * d + i] != 0) {
      throw std::invalid_argument("adjacency diagonal must be zero");
    }
    for (std::size_t j = 0; j < d; ++j) {
      const std::uint8_t v = adjacency[i * d + j];
      if (v != 0 && v != 1) {
        throw std::invalid_argument("adjacency entries are 0 or 1");
      }
      if (v != adjacency[j * d + i]) {
        throw std::invalid_argument("adjacency must be symmetric");
      }
    }
  }
}

int interaction_length_schedule(int n) {
  if (n < 1) {
    throw std::invalid_argument("domain size must be >= 1");
  }
  const unsigned __int128 target = static_cast<unsigned __int128>(n) *
                                   static_cast<unsigned __int128>(n);
  // Largest t with t^3 <= n^2, found from a floating-point estimate and then
  // corrected by exact integer comparisons.
  std::uint64_t t = static_cast<std::uint64_t>(std::cbrt(static_cast<double>(target)));
  auto cube = [](std::uint64_t x) {
    return static_cast<unsigned __int128>(x) * x * x;
  };
  while (t > 0 && cube(t) > target) --t;
  while (cube(t + 1) <= target) ++t;
  return static_cast<int>(2 * (t / 4));
}

std::vector<syk::SykModelSpec> build_overlap_sets(const Graph& g, int m,
                                                  syk::CouplingLaw law) {
  g.validate();
  if (m < 1) {
    throw std::invalid_argument("block size m must be >= 1");
  }
  const int d = g.vertices;
  const long long n_ll = static_cast<long long>(d) * d * m;
  const long long max_index = static_cast<long long>(d + 1) * n_ll;
  if (max_index > 2'000'000'000LL || n_ll * d > 200'000'000LL) {
    throw CapExceeded("overlap family would materialize more than 2e8 indices");
  }
  const int n = static_cast<int>(n_ll);
  const int r = interaction_length_schedule(n);

  std::vector<syk::SykModelSpec> specs;
  specs.reserve(static_cast<std::size_t>(d));
  // 1-based vertices u, v; block (u, v) covers the m indices starting at
  // (u-1)*d*m + (v-1)*m + 1.  Vertex u keeps blocks (u, v) and (v, u) for
  // every non-neighbor v (itself included), so two vertices share exactly the
  // two blocks {(u,v), (v,u)} when they are not adjacent and none otherwise.
  for (int u = 1; u <= d; ++u) {
    std::vector<int> bases;
    for (int v = 1; v <= d; ++v) {
      if (v != u && g.edge(u - 1, v - 1) != 0) continue;
      bases.push_back((u - 1) * d * m + (v - 1) * m);
      if (v != u) bases.push_back((v - 1) * d * m + (u - 1) * m);
    }
    std::sort(bases.begin(), bases.end());
    std::vector<int> domain;
    domain.reserve(static_cast<std::size_t>(n));
    for (int base : bases) {
      for (int k = 1; k <= m; ++k) domain.push_back(base + k);
    }
    // Private padding above the shared range [1, n] brings the domain to
    // size n without touching any other vertex's indices.
    const int shared = static_cast<int>(domain.size());
    for (int k = 1; k <= n - shared; ++k) {
      domain.push_back(u * n + k);
    }
    syk::SykModelSpec spec;
    spec.label = u - 1;
    spec.domain = std::move(domain);
    spec.interaction_length = r;
    spec.law = law;
    spec.validate();
    specs.push_back(std::move(spec));
  }
  return specs;
}

namespace {

// State per letter: 2 = never used, 1 = usable (a non-commuting separator
// appeared since the last occurrence), 0 = blocked (the previous occurrence
// could still be commuted next to a new one).
void admissible_rec(const Graph& g, int max_len, Word& cur, std::vector<int>& state,
                    std::vector<Word>& out) {
  if (!cur.empty()) out.push_back(cur);
  if (static_cast<int>(cur.size()) == max_len) return;
  const int d = g.vertices;
  for (int x = 0; x < d; ++x) {
    if (state[static_cast<std::size_t>(x)] == 0) continue;
    const std::vector<int> saved = state;
    state[static_cast<std::size_t>(x)] = 0;
    for (int a = 0; a < d; ++a) {
      if (a != x && g.edge(x, a) == 0 && state[static_cast<std::size_t>(a)] == 0) {
        state[static_cast<std::size_t>(a)] = 1;
      }
    }
    cur.push_back(x);
    admissible_rec(g, max_len, cur, state, out);
    cur.pop_back();
    state = saved;
  }
}

}  // namespace

std::vector<Word> admissible_words(const Graph& g, int max_len) {
  g.validate();
  if (max_len < 1 || max_len > 8) {
    throw std::invalid_argument("word length bound must be in [1, 8]");
  }
  std::vector<Word> out;
  Word cur;
  std::vector<int> state(static_cast<std::size_t>(g.vertices), 2);
  admissible_rec(g, max_len, cur, state, out);
  return out;
}

namespace {

struct WordHash {
  std::size_t operator()(const Word& w) const noexcept {
    std::uint64_t h = 0x2545f4914f6cdd1dull;
    for (int x : w) h = mix64(h ^ static_cast<std::uint64_t>(x));
    return static_cast<std::size_t>(h);
  }
};

class MomentCache {
 public:
  explicit MomentCache(const partitions::QMatrix& q) : q_(q) {}

  double moment(const Word& w) {
    const auto it = cache_.find(w);
    if (it != cache_.end()) return it->second;
    const double value = partitions::qgaussian_moment(w, q_);
    cache_.emplace(w, value);
    return value;
  }

 private:
  const partitions::QMatrix& q_;
  std::unordered_map<Word, double, WordHash> cache_;
};

std::string word_to_string(const Word& w) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) os << ",";
    os << w[i];
  }
  os << ")";
  return os.str();
}

void record_violation(FreenessReport& report, const std::string& text) {
  report.passed = false;
  if (report.violations.size() < 16) {
    report.violations.push_back(text);
  }
}

// Centered single-letter test polynomials: x, x^2 - tau(x^2), and the cubic
// orthogonalized against x (tau(x^4) = 2 + q_ll for a single coordinate).
partitions::LabeledPolynomial centered_basis(int label, int which, double q_diag) {
  partitions::LabeledPolynomial p;
  p.label = label;
  switch (which) {
    case 0:
      p.coeffs = {0.0, 1.0};
      break;
    case 1:
      p.coeffs = {-1.0, 0.0, 1.0};
      break;
    default:
      p.coeffs = {0.0, -(2.0 + q_diag), 0.0, 1.0};
      break;
  }
  return p;
}

void check_swaps(const Graph& g, const partitions::QMatrix& q, int max_len, double tol,
                 MomentCache& cache, FreenessReport& report) {
  const int d = g.vertices;
  Word w;
  const std::uint64_t total_words = [&] {
    std::uint64_t t = 0, p = 1;
    for (int len = 1; len <= max_len; ++len) {
      p *= static_cast<std::uint64_t>(d);
      t += p;
    }
    return t;
  }();
  (void)total_words;
  // Iterate all words of each length via an odometer.
  for (int len = 2; len <= max_len; ++len) {
    w.assign(static_cast<std::size_t>(len), 0);
    for (;;) {
      for (int p = 0; p + 1 < len; ++p) {
        const int a = w[static_cast<std::size_t>(p)];
        const int b = w[static_cast<std::size_t>(p + 1)];
        if (a == b || g.edge(a, b) == 0) continue;
        const double before = cache.moment(w);
        Word swapped = w;
        std::swap(swapped[static_cast<std::size_t>(p)],
                  swapped[static_cast<std::size_t>(p + 1)]);
        const double after = cache.moment(swapped);
        report.swap_checks += 1;
        if (std::abs(before - after) > tol) {
          std::ostringstream os;
          os << "swap at position " << p << " of word " << word_to_string(w)
             << " changes the moment by " << (before - after);
          record_violation(report, os.str());
        }
      }
      int p = len - 1;
      while (p >= 0 && w[static_cast<std::size_t>(p)] == d - 1) {
        w[static_cast<std::size_t>(p)] = 0;
        --p;
      }
      if (p < 0) break;
      w[static_cast<std::size_t>(p)] += 1;
    }
  }
}

void check_centered(const Graph& g, const partitions::QMatrix& q, int max_len,
                    double tol, FreenessReport& report) {
  const std::vector<Word> patterns = admissible_words(g, max_len);
  std::vector<partitions::LabeledPolynomial> factors;
  const int degree_cap = 3 * max_len + 1;

  auto run_combo = [&](const Word& pattern, const std::vector<int>& combo) {
    factors.clear();
    for (std::size_t t = 0; t < pattern.size(); ++t) {
      const int label = pattern[t];
      factors.push_back(centered_basis(label, combo[t], q(label, label)));
    }
    const double value = partitions::polynomial_word_moment(factors, q, degree_cap);
    report.centered_checks += 1;
    if (std::abs(value) > tol) {
      std::ostringstream os;
      os << "centered product along " << word_to_string(pattern) << " with degrees (";
      for (std::size_t t = 0; t < combo.size(); ++t) {
        if (t) os << ",";
        os << (combo[t] == 0 ? 1 : combo[t] + 1);
      }
      os << ") has moment " << value;
      record_violation(report, os.str());
    }
  };

  for (const Word& pattern : patterns) {
    const int len = static_cast<int>(pattern.size());
    std::vector<int> combo(static_cast<std::size_t>(len), 0);
    if (len <= 4) {
      // Exhaustive over the 3^len basis selections.
      for (;;) {
        run_combo(pattern, combo);
        int t = len - 1;
        while (t >= 0 && combo[static_cast<std::size_t>(t)] == 2) {
          combo[static_cast<std::size_t>(t)] = 0;
          --t;
        }
        if (t < 0) break;
        combo[static_cast<std::size_t>(t)] += 1;
      }
    } else {
      // Uniform selections plus the three cyclic phase shifts.
      for (int u = 0; u < 3; ++u) {
        std::fill(combo.begin(), combo.end(), u);
        run_combo(pattern, combo);
      }
      for (int offset = 0; offset < 3; ++offset) {
        for (int t = 0; t < len; ++t) {
          combo[static_cast<std::size_t>(t)] = (t + offset) % 3;
        }
        run_combo(pattern, combo);
      }
    }
  }
}

}  // namespace

FreenessReport check_qmatrix_freeness(const Graph& g, const partitions::QMatrix& q,
                                      int max_len, double tol) {
  g.validate();
  if (q.labels() < g.vertices) {
    throw std::invalid_argument("coupling matrix is smaller than the graph");
  }
  if (max_len < 1 || max_len > 8) {
    throw std::invalid_argument("word length bound must be in [1, 8]");
  }
  FreenessReport report;
  MomentCache cache(q);
  check_swaps(g, q, max_len, tol, cache, report);
  check_centered(g, q, max_len, tol, report);
  return report;
}

FreenessReport check_epsilon_freeness(const Graph& g, const std::vector<double>& q_diag,
                                      int max_len, double tol) {
  g.validate();
  if (q_diag.size() != static_cast<std::size_t>(g.vertices)) {
    throw std::invalid_argument("diagonal couplings must list one value per vertex");
  }
  partitions::QMatrix q(g.vertices, 0.0);
  for (int i = 0; i < g.vertices; ++i) {
    q.set(i, i, q_diag[static_cast<std::size_t>(i)]);
    for (int j = i + 1; j < g.vertices; ++j) {
      q.set(i, j, static_cast<double>(g.edge(i, j)));
    }
  }
  return check_qmatrix_freeness(g, q, max_len, tol);
}

}  // namespace qmix::epsilon_graph
