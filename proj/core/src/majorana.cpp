#include "qmix/majorana.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <mutex>
#include <stdexcept>

#include "qmix/errors.hpp"

namespace qmix::majorana {

namespace {

void set_bit(std::vector<std::uint64_t>& blocks, int index) {
  const int pos = index - 1;
  const std::size_t blk = static_cast<std::size_t>(pos) / 64;
  if (blk >= blocks.size()) blocks.resize(blk + 1, 0);
  blocks[blk] |= 1ull << (pos % 64);
}

void trim(std::vector<std::uint64_t>& blocks) {
  while (!blocks.empty() && blocks.back() == 0) blocks.pop_back();
}

}  // namespace

MajoranaMonomial::MajoranaMonomial(std::span<const int> indices, int phase)
    : phase_(((phase % 4) + 4) % 4) {
  for (int idx : indices) {
    if (idx < 1) throw std::invalid_argument("generator index must be >= 1");
    if (contains(idx)) throw std::invalid_argument("duplicate generator index");
    set_bit(blocks_, idx);
  }
}

MajoranaMonomial::MajoranaMonomial(std::initializer_list<int> indices, int phase)
    : MajoranaMonomial(std::span<const int>(indices.begin(), indices.size()), phase) {}

std::vector<int> MajoranaMonomial::indices() const {
  std::vector<int> out;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    std::uint64_t w = blocks_[b];
    while (w) {
      const int bit = std::countr_zero(w);
      out.push_back(static_cast<int>(64 * b) + bit + 1);
      w &= w - 1;
    }
  }
  return out;
}

int MajoranaMonomial::weight() const {
  int c = 0;
  for (std::uint64_t w : blocks_) c += std::popcount(w);
  return c;
}

bool MajoranaMonomial::is_scalar() const {
  for (std::uint64_t w : blocks_) {
    if (w) return false;
  }
  return true;
}

int MajoranaMonomial::max_index() const {
  for (std::size_t b = blocks_.size(); b-- > 0;) {
    if (blocks_[b]) {
      return static_cast<int>(64 * b) + 64 - std::countl_zero(blocks_[b]);
    }
  }
  return 0;
}

bool MajoranaMonomial::contains(int index) const {
  const int pos = index - 1;
  const std::size_t blk = static_cast<std::size_t>(pos) / 64;
  if (blk >= blocks_.size()) return false;
  return (blocks_[blk] >> (pos % 64)) & 1;
}

std::complex<double> MajoranaMonomial::scalar() const {
  if (!is_scalar()) throw std::logic_error("monomial is not scalar");
  static const std::complex<double> lut[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return lut[phase_];
}

bool MajoranaMonomial::same_support(const MajoranaMonomial& a, const MajoranaMonomial& b) {
  const std::size_t n = std::max(a.blocks_.size(), b.blocks_.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t wa = i < a.blocks_.size() ? a.blocks_[i] : 0;
    const std::uint64_t wb = i < b.blocks_.size() ? b.blocks_[i] : 0;
    if (wa != wb) return false;
  }
  return true;
}

int inversion_parity(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  // Count pairs (x in a, y in b) with x > y, mod 2.  Walk blocks from high
  // to low; `suffix` holds the parity of a-bits strictly above block k.
  int parity = 0;
  const std::size_t nb = b.size();
  const std::size_t na = a.size();
  std::size_t k = std::max(na, nb);
  int suffix = 0;
  while (k-- > 0) {
    const std::uint64_t wb = k < nb ? b[k] : 0;
    const std::uint64_t wa = k < na ? a[k] : 0;
    if (wb) {
      parity ^= std::popcount(wb) & suffix;
      // In-block: for each bit y of wb, count a-bits strictly above y.
      std::uint64_t w = wb;
      while (w) {
        const int bit = std::countr_zero(w);
        const std::uint64_t mask = bit == 63 ? 0 : (~0ull << (bit + 1));
        parity ^= std::popcount(wa & mask) & 1;
        w &= w - 1;
      }
    }
    suffix = (suffix + std::popcount(wa)) & 1;
  }
  return parity & 1;
}

MajoranaMonomial multiply(const MajoranaMonomial& a, const MajoranaMonomial& b) {
  MajoranaMonomial out;
  const std::size_t n = std::max(a.blocks_.size(), b.blocks_.size());
  out.blocks_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t wa = i < a.blocks_.size() ? a.blocks_[i] : 0;
    const std::uint64_t wb = i < b.blocks_.size() ? b.blocks_[i] : 0;
    out.blocks_[i] = wa ^ wb;
  }
  trim(out.blocks_);
  const int par = inversion_parity(a.blocks_, b.blocks_);
  out.phase_ = (a.phase_ + b.phase_ + 2 * par) % 4;
  return out;
}

MajoranaMonomial adjoint(const MajoranaMonomial& m) {
  MajoranaMonomial out = m;
  const int w = m.weight();
  const int reversal = (w * (w - 1) / 2) % 2;  // sign from reversing the product
  out.phase_ = ((4 - m.phase_) % 4 + 2 * reversal) % 4;
  return out;
}

std::complex<double> normalized_trace(const MajoranaMonomial& m) {
  if (!m.is_scalar()) return {0.0, 0.0};
  return m.scalar();
}

std::complex<double> trace_of_word(std::span<const MajoranaMonomial> word) {
  MajoranaMonomial acc;
  for (const auto& m : word) acc = multiply(acc, m);
  return normalized_trace(acc);
}

// ---------------------------------------------------------------------------
// Dense realization

namespace {

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Eigen::Matrix2cd pauli_x() {
  Eigen::Matrix2cd m;
  m << 0, 1, 1, 0;
  return m;
}

Eigen::Matrix2cd pauli_y() {
  Eigen::Matrix2cd m;
  m << 0, std::complex<double>(0, -1), std::complex<double>(0, 1), 0;
  return m;
}

Eigen::Matrix2cd pauli_z() {
  Eigen::Matrix2cd m;
  m << 1, 0, 0, -1;
  return m;
}

std::vector<Eigen::MatrixXcd> build_generators(int qubits) {
  std::vector<Eigen::MatrixXcd> gens;
  gens.reserve(static_cast<std::size_t>(2 * qubits));
  const Eigen::Matrix2cd X = pauli_x(), Y = pauli_y(), Z = pauli_z();
  const Eigen::Matrix2cd I2 = Eigen::Matrix2cd::Identity();
  for (int half = 0; half < 2; ++half) {
    const Eigen::Matrix2cd& head = half == 0 ? X : Y;
    for (int k = 1; k <= qubits; ++k) {
      Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(1, 1);
      for (int pos = 1; pos <= qubits; ++pos) {
        if (pos < k) {
          m = kron(m, Z);
        } else if (pos == k) {
          m = kron(m, head);
        } else {
          m = kron(m, I2);
        }
      }
      gens.push_back(std::move(m));
    }
  }
  return gens;
}

std::map<int, std::vector<Eigen::MatrixXcd>>& generator_cache() {
  static std::map<int, std::vector<Eigen::MatrixXcd>> cache;
  return cache;
}

std::mutex& generator_mutex() {
  static std::mutex mu;
  return mu;
}

}  // namespace

const Eigen::MatrixXcd& dense_generator(int index, int qubits) {
  if (qubits < 1) throw std::invalid_argument("qubits must be >= 1");
  if (index < 1 || index > 2 * qubits) {
    throw std::invalid_argument("generator index out of range for qubit count");
  }
  std::lock_guard<std::mutex> lock(generator_mutex());
  auto& cache = generator_cache();
  auto it = cache.find(qubits);
  if (it == cache.end()) {
    it = cache.emplace(qubits, build_generators(qubits)).first;
  }
  return it->second[static_cast<std::size_t>(index - 1)];
}

DenseOperator dense_monomial(const MajoranaMonomial& m, int qubits, int qubit_cap) {
  if (qubits > qubit_cap) {
    throw CapExceeded("dense representation on " + std::to_string(qubits) +
                      " qubits exceeds cap " + std::to_string(qubit_cap));
  }
  if (m.max_index() > 2 * qubits) {
    throw std::invalid_argument("monomial index exceeds generator count");
  }
  const Eigen::Index dim = Eigen::Index(1) << qubits;
  DenseOperator out;
  out.qubits = qubits;
  out.entries = Eigen::MatrixXcd::Identity(dim, dim);
  for (int idx : m.indices()) {
    out.entries = out.entries * dense_generator(idx, qubits);
  }
  static const std::complex<double> lut[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  out.entries *= lut[((m.phase() % 4) + 4) % 4];
  return out;
}

}  // namespace qmix::majorana
