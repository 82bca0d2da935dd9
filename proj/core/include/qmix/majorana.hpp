#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qmix::majorana {

// Signed monomial in anticommuting self-adjoint generators g_1, g_2, ...
// with g_i g_j + g_j g_i = 2 delta_ij.  Stored as
//
//     i^phase * g_{i_1} g_{i_2} ... g_{i_r},   i_1 < i_2 < ... < i_r,
//
// with the (1-based) index set kept as a bitset in 64-bit blocks and the
// phase as an exact integer exponent of i, reduced mod 4.
class MajoranaMonomial {
 public:
  MajoranaMonomial() = default;  // identity

  // Indices must be >= 1 and pairwise distinct.
  explicit MajoranaMonomial(std::span<const int> indices, int phase = 0);
  MajoranaMonomial(std::initializer_list<int> indices, int phase = 0);

  const std::vector<std::uint64_t>& blocks() const { return blocks_; }
  int phase() const { return phase_; }

  std::vector<int> indices() const;
  int weight() const;                      // number of generators in the support
  bool is_scalar() const;                  // empty support
  int max_index() const;                   // 0 for the identity

  bool contains(int index) const;

  // Scalar value i^phase when the support is empty.
  std::complex<double> scalar() const;

  friend bool operator==(const MajoranaMonomial& a, const MajoranaMonomial& b) {
    if (a.phase_ != b.phase_) return false;
    return same_support(a, b);
  }

  static bool same_support(const MajoranaMonomial& a, const MajoranaMonomial& b);

 private:
  friend MajoranaMonomial multiply(const MajoranaMonomial&, const MajoranaMonomial&);
  friend MajoranaMonomial adjoint(const MajoranaMonomial&);

  std::vector<std::uint64_t> blocks_;  // bit k of block b <=> index 64*b + k + 1
  int phase_ = 0;
};

// Product with support = symmetric difference and the sign obtained from the
// parity of inversions between the two sorted index sequences.
MajoranaMonomial multiply(const MajoranaMonomial& a, const MajoranaMonomial& b);

// Reverses the generator order: conjugates the phase and flips the sign by
// the parity of weight*(weight-1)/2.
MajoranaMonomial adjoint(const MajoranaMonomial& m);

// Normalized trace (trace divided by the representation dimension):
// i^phase for scalar monomials, 0 otherwise.
std::complex<double> normalized_trace(const MajoranaMonomial& m);

// Folds the word left to right and takes the normalized trace.
std::complex<double> trace_of_word(std::span<const MajoranaMonomial> word);

// Parity (0/1) of the number of pairs (a in A, b in B) with a > b, counted
// over the supports.  Exposed because the Monte Carlo kernel shares it.
int inversion_parity(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

// ---------------------------------------------------------------------------
// Dense 2^q x 2^q realization on q qubits.  Generator k <= q acts as
// Z^(k-1) tensor X tensor 1..., generator q + k as Z^(k-1) tensor Y tensor
// 1...; a monomial with max index <= 2q multiplies out its generators in
// index order.  Used as an independent cross-check of the symbolic algebra.

inline constexpr int kDefaultQubitCap = 12;

struct DenseOperator {
  int qubits = 0;
  Eigen::MatrixXcd entries;

  Eigen::Index dimension() const { return entries.rows(); }
  std::complex<double> normalized_trace() const {
    return entries.trace() / static_cast<double>(entries.rows());
  }
};

// Dense matrix of generator `index` (1-based, index <= 2*qubits).
const Eigen::MatrixXcd& dense_generator(int index, int qubits);

// Dense matrix form of a monomial.  Requires max_index <= 2*qubits and
// qubits <= qubit_cap; throws CapExceeded past the cap.
DenseOperator dense_monomial(const MajoranaMonomial& m, int qubits,
                             int qubit_cap = kDefaultQubitCap);

}  // namespace qmix::majorana
