#pragma once

#include <map>

#include "qmix/partitions.hpp"

namespace qmix::fock {

using partitions::QMatrix;
using partitions::Word;

inline constexpr int kDefaultDepth = 8;

// Finite linear combination of simple tensors over the label alphabet, keyed
// by the label sequence; the empty sequence is the vacuum.  Terms longer than
// `depth` are dropped by the operators below, which then set `truncated`.
struct FockVector {
  std::map<Word, double> terms;
  int depth = kDefaultDepth;
  bool truncated = false;

  static FockVector vacuum(int depth = kDefaultDepth);
  static FockVector basis(const Word& w, int depth = kDefaultDepth);

  double coefficient(const Word& w) const;
  void prune_zeros();
};

// Prepends label i to every term (left creation).
FockVector apply_creation(int label, const FockVector& v);

// Removes one matching leg per term with the deformation weights
// q_{i,j_1} ... q_{i,j_{k-1}} for the k-th leg (left annihilation); kills the
// vacuum.
FockVector apply_annihilation(int label, const FockVector& v, const QMatrix& q);

// Field operator s_i = creation + annihilation.
FockVector apply_field(int label, const FockVector& v, const QMatrix& q);

// Deformed pairing: tensors of different lengths are orthogonal; equal
// lengths reduce by matching the first left leg against every right leg with
// the same q-weights as annihilation.
double twisted_inner_product(const FockVector& u, const FockVector& v, const QMatrix& q);

// Applies s_{w_1} ... s_{w_d} right-to-left to the vacuum and returns the
// vacuum coefficient.  Exact for |w| <= 2*depth: intermediate terms that
// cannot shrink back to the vacuum in the remaining steps are discarded,
// which keeps every contributing term within depth |w|/2.
double vacuum_moment(const Word& w, const QMatrix& q, int depth = kDefaultDepth);

}  // namespace qmix::fock
