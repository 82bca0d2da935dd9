#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qmix/partitions.hpp"
#include "qmix/syk.hpp"

namespace qmix::epsilon_graph {

using partitions::Word;

// Simple undirected graph on vertices {0, ..., vertices-1}.  An edge means
// the two coordinates commute in the limit (coupling +1); a non-edge means
// they are freely independent (coupling 0).
struct Graph {
  int vertices = 0;
  std::vector<std::uint8_t> adjacency;  // flattened, symmetric, zero diagonal

  static Graph empty_graph(int d);
  static Graph complete_graph(int d);
  static Graph path_graph(int d);

  int edge(int i, int j) const;
  void set_edge(int i, int j, int value);
  void validate() const;  // throws std::invalid_argument
};

// Even interaction length used along the overlap sweep:
// r(n) = 2 * floor(t / 4) with t the largest integer satisfying t^3 <= n^2
// (an exact integer floor of n^{2/3}; no floating-point powers involved).
int interaction_length_schedule(int n);

// Overlap family realizing the graph: each vertex gets a domain of size
// n = vertices^2 * m built from shared m-blocks, so that two domains overlap
// in exactly 2m indices when the vertices are non-adjacent and are disjoint
// when they are adjacent.  Interaction lengths follow
// interaction_length_schedule(n), so non-adjacent pairs have a divergent
// decay rate (coupling -> 0) and adjacent pairs a vanishing one
// (coupling -> 1) as m grows.
std::vector<syk::SykModelSpec> build_overlap_sets(const Graph& g, int m,
                                                  syk::CouplingLaw law);

// Words over the vertex alphabet in which no two occurrences of the same
// letter can be brought together by repeatedly transposing adjacent commuting
// (edge-connected) letters: between consecutive occurrences of a letter there
// must be some letter that does not commute with it.  These are the words
// along which centered mixed moments must vanish.  Lengths 1..max_len,
// lexicographic order; max_len <= 8.
std::vector<Word> admissible_words(const Graph& g, int max_len);

struct FreenessReport {
  bool passed = true;
  std::uint64_t swap_checks = 0;      // commuting-neighbor swap invariances
  std::uint64_t centered_checks = 0;  // centered products along admissible words
  std::vector<std::string> violations;  // first few failures, human readable
};

// Verifies that the moment functional of the coupling matrix `q` treats the
// graph as a mixing structure:
//   (i)  swapping adjacent word letters joined by an edge never changes the
//        moment (those coordinates commute), over all words up to max_len;
//   (ii) products of centered single-letter polynomials (degree <= 3) along
//        admissible words vanish within `tol`.
FreenessReport check_qmatrix_freeness(const Graph& g, const partitions::QMatrix& q,
                                      int max_len, double tol = 1e-10);

// Same check for the coupling matrix the graph itself induces: off-diagonal
// entries equal the adjacency (0 or 1), diagonal entries are `q_diag`.
FreenessReport check_epsilon_freeness(const Graph& g, const std::vector<double>& q_diag,
                                      int max_len, double tol = 1e-10);

}  // namespace qmix::epsilon_graph
