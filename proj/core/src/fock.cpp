#include "qmix/fock.hpp"

#include <stdexcept>
#include <utility>

#include "qmix/errors.hpp"

namespace qmix::fock {

FockVector FockVector::vacuum(int depth) {
  FockVector v;
  v.depth = depth;
  v.terms[Word{}] = 1.0;
  return v;
}

FockVector FockVector::basis(const Word& w, int depth) {
  if (static_cast<int>(w.size()) > depth) {
    throw std::invalid_argument("FockVector::basis: word longer than depth");
  }
  FockVector v;
  v.depth = depth;
  v.terms[w] = 1.0;
  return v;
}

double FockVector::coefficient(const Word& w) const {
  auto it = terms.find(w);
  return it == terms.end() ? 0.0 : it->second;
}

void FockVector::prune_zeros() {
  for (auto it = terms.begin(); it != terms.end();) {
    it = (it->second == 0.0) ? terms.erase(it) : std::next(it);
  }
}

FockVector apply_creation(int label, const FockVector& v) {
  FockVector out;
  out.depth = v.depth;
  out.truncated = v.truncated;
  for (const auto& [w, c] : v.terms) {
    if (c == 0.0) continue;
    if (static_cast<int>(w.size()) + 1 > out.depth) {
      out.truncated = true;
      continue;
    }
    Word created;
    created.reserve(w.size() + 1);
    created.push_back(label);
    created.insert(created.end(), w.begin(), w.end());
    out.terms[std::move(created)] += c;
  }
  out.prune_zeros();
  return out;
}

FockVector apply_annihilation(int label, const FockVector& v, const QMatrix& q) {
  FockVector out;
  out.depth = v.depth;
  out.truncated = v.truncated;
  for (const auto& [w, c] : v.terms) {
    if (c == 0.0) continue;
    double weight = c;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (w[k] == label && weight != 0.0) {
        Word reduced;
        reduced.reserve(w.size() - 1);
        reduced.insert(reduced.end(), w.begin(), w.begin() + static_cast<std::ptrdiff_t>(k));
        reduced.insert(reduced.end(), w.begin() + static_cast<std::ptrdiff_t>(k) + 1, w.end());
        out.terms[std::move(reduced)] += weight;
      }
      weight *= q(label, w[k]);
      if (weight == 0.0) break;
    }
  }
  out.prune_zeros();
  return out;
}

FockVector apply_field(int label, const FockVector& v, const QMatrix& q) {
  FockVector out = apply_creation(label, v);
  FockVector ann = apply_annihilation(label, v, q);
  out.truncated = out.truncated || ann.truncated;
  for (const auto& [w, c] : ann.terms) out.terms[w] += c;
  out.prune_zeros();
  return out;
}

namespace {

// <e_{u_1} x ... , e_{v_1} x ...>_Q via the first-leg recursion.
double basis_inner(const Word& u, const Word& v, const QMatrix& q) {
  if (u.size() != v.size()) return 0.0;
  if (u.empty()) return 1.0;
  const int head = u[0];
  Word u_rest(u.begin() + 1, u.end());
  double total = 0.0;
  double weight = 1.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] == head && weight != 0.0) {
      Word v_rest;
      v_rest.reserve(v.size() - 1);
      v_rest.insert(v_rest.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k));
      v_rest.insert(v_rest.end(), v.begin() + static_cast<std::ptrdiff_t>(k) + 1, v.end());
      total += weight * basis_inner(u_rest, v_rest, q);
    }
    weight *= q(head, v[k]);
    if (weight == 0.0) break;
  }
  return total;
}

}  // namespace

double twisted_inner_product(const FockVector& u, const FockVector& v, const QMatrix& q) {
  double total = 0.0;
  for (const auto& [uw, uc] : u.terms) {
    if (uc == 0.0) continue;
    for (const auto& [vw, vc] : v.terms) {
      if (vc == 0.0 || uw.size() != vw.size()) continue;
      total += uc * vc * basis_inner(uw, vw, q);
    }
  }
  return total;
}

double vacuum_moment(const Word& w, const QMatrix& q, int depth) {
  for (int letter : w) {
    if (letter < 0 || letter >= q.labels()) {
      throw std::invalid_argument("vacuum_moment: word label outside coupling matrix");
    }
  }
  const int d = static_cast<int>(w.size());
  if (d > 2 * depth) {
    throw CapExceeded("vacuum_moment: word length exceeds twice the depth cap");
  }
  FockVector state = FockVector::vacuum(depth);
  for (int step = d - 1; step >= 0; --step) {
    state = apply_field(w[step], state, q);
    // A term of length L reaches the vacuum only if L <= steps remaining.
    const int remaining = step;
    for (auto it = state.terms.begin(); it != state.terms.end();) {
      it = (static_cast<int>(it->first.size()) > remaining) ? state.terms.erase(it)
                                                            : std::next(it);
    }
  }
  return state.coefficient(Word{});
}

}  // namespace qmix::fock
