#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include "doctest.h"
#include "qmix/errors.hpp"
#include "qmix/majorana.hpp"
#include "qmix/partitions.hpp"
#include "qmix/overlap_stats.hpp"
#include "qmix/rng.hpp"
#include "qmix/syk.hpp"

using qmix::CapExceeded;
using qmix::Method;
using qmix::MomentEstimate;
using qmix::SplitMix64;
using qmix::gaussian_from_bits;
using qmix::partitions::Word;
using namespace qmix::syk;

namespace {

std::vector<int> iota_domain(int first, int n) {
  std::vector<int> d(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = first + i;
  return d;
}

SykModelSpec make_spec(int label, std::vector<int> domain, int r,
                       CouplingLaw law = CouplingLaw::kGaussian) {
  SykModelSpec s;
  s.label = label;
  s.domain = std::move(domain);
  s.interaction_length = r;
  s.law = law;
  return s;
}

std::uint64_t next_subset(std::uint64_t v) {
  const std::uint64_t c = v & (~v + 1);
  const std::uint64_t r = v + c;
  return (((r ^ v) >> 2) / c) | r;
}

// Independent dense assembly of one coupling draw: enumerate r-subsets of the
// sorted domain in increasing-bitmask order (= colexicographic), pull the
// coupling for each from a clone of the sampler's stream, and sum scaled
// dense monomials.
Eigen::MatrixXcd assemble_dense(const SykModelSpec& spec, SplitMix64 rng, int qubits) {
  std::vector<int> domain = spec.domain;
  std::sort(domain.begin(), domain.end());
  const int n = static_cast<int>(domain.size());
  const int r = spec.interaction_length;
  double count = 1.0;
  for (int t = 0; t < r; ++t) count *= static_cast<double>(n - t) / (t + 1);
  const double norm = 1.0 / std::sqrt(count);
  const std::complex<double> i_unit(0.0, 1.0);
  std::complex<double> prefactor = 1.0;
  for (int t = 0; t < r / 2; ++t) prefactor *= i_unit;

  const Eigen::Index dim = Eigen::Index{1} << qubits;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  std::uint64_t mask = (std::uint64_t{1} << r) - 1;
  const std::uint64_t limit = std::uint64_t{1} << n;
  while (mask < limit) {
    double j;
    if (spec.law == CouplingLaw::kGaussian) {
      j = gaussian_from_bits(rng.next(), rng.next());
    } else {
      j = (rng.next() & 1) ? 1.0 : -1.0;
    }
    std::vector<int> indices;
    for (int b = 0; b < n; ++b) {
      if ((mask >> b) & 1) indices.push_back(domain[static_cast<std::size_t>(b)]);
    }
    const qmix::majorana::MajoranaMonomial mono(indices);
    h += (prefactor * (j * norm)) * qmix::majorana::dense_monomial(mono, qubits).entries;
    mask = next_subset(mask);
  }
  return h;
}

double max_abs_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("sampled dense hamiltonian equals the monomial-by-monomial sum") {
  struct Case {
    std::vector<int> domain;
    int r;
    CouplingLaw law;
  };
  const std::vector<Case> cases = {
      {iota_domain(1, 6), 3, CouplingLaw::kGaussian},
      {iota_domain(1, 6), 3, CouplingLaw::kRademacher},
      {iota_domain(1, 6), 2, CouplingLaw::kGaussian},
      {{9, 2, 5, 7}, 2, CouplingLaw::kGaussian},  // unsorted, sparse indices
      {iota_domain(1, 5), 4, CouplingLaw::kRademacher},
  };
  int salt = 0;
  for (const auto& c : cases) {
    const SykModelSpec spec = make_spec(0, c.domain, c.r, c.law);
    const int max_index = *std::max_element(c.domain.begin(), c.domain.end());
    const int qubits = (max_index + 1) / 2;
    const std::uint64_t key = qmix::derive_key(77, static_cast<std::uint64_t>(salt++));
    SplitMix64 rng(key);
    const auto h = sample_hamiltonian(spec, rng);
    REQUIRE(h.qubits == qubits);
    const Eigen::MatrixXcd expected = assemble_dense(spec, SplitMix64(key), qubits);
    REQUIRE(max_abs_diff(h.entries, expected) < 1e-12);
  }
}

TEST_CASE("a rademacher draw has unit second moment exactly") {
  const SykModelSpec spec = make_spec(0, iota_domain(1, 8), 3, CouplingLaw::kRademacher);
  SplitMix64 rng(qmix::derive_key(77, 50));
  const auto h = sample_hamiltonian(spec, rng);
  const std::complex<double> tr2 = (h.entries * h.entries).trace() /
                                   static_cast<double>(h.dimension());
  CHECK(std::abs(tr2 - std::complex<double>(1.0, 0.0)) < 1e-10);
}

TEST_CASE("exact second moments are normalized to one for both laws") {
  for (CouplingLaw law : {CouplingLaw::kGaussian, CouplingLaw::kRademacher}) {
    for (auto [n, r] : std::vector<std::pair<int, int>>{{6, 2}, {6, 3}, {7, 3}, {8, 4}}) {
      SykFamily family({make_spec(0, iota_domain(1, n), r, law)});
      const MomentEstimate est = exact_joint_moment_small(family, {0, 0});
      CHECK(est.method == Method::kExactSmall);
      CHECK(est.std_err == 0.0);
      CHECK(est.value == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("monte carlo traces are bit-stable across thread counts and move with the seed") {
  SykFamily family({make_spec(0, iota_domain(1, 6), 2),
                    make_spec(1, iota_domain(4, 6), 2)});
  const Word word{0, 1, 0, 1};
  McOptions a;
  a.seed = 7;
  a.threads = 1;
  McOptions b = a;
  b.threads = 4;
  const MomentEstimate ea = mc_joint_moment(family, word, 400, a);
  const MomentEstimate eb = mc_joint_moment(family, word, 400, b);
  CHECK(ea.value == eb.value);        // bitwise, not approximate
  CHECK(ea.std_err == eb.std_err);
  CHECK(ea.samples == 400);
  CHECK(ea.method == Method::kDenseMc);

  McOptions c = a;
  c.seed = 8;
  const MomentEstimate ec = mc_joint_moment(family, word, 400, c);
  CHECK(ec.value != ea.value);
}

TEST_CASE("monte carlo agrees with the exhaustive moment on a two-model family") {
  SykFamily family({make_spec(0, iota_domain(1, 6), 2),
                    make_spec(1, iota_domain(4, 6), 2)});
  for (const Word& word : {Word{0, 1, 0, 1}, Word{0, 0, 1, 1}, Word{0, 0}}) {
    const MomentEstimate exact = exact_joint_moment_small(family, word);
    McOptions opts;
    opts.seed = 21;
    opts.threads = 2;
    const MomentEstimate mc = mc_joint_moment(family, word, 20000, opts);
    REQUIRE(mc.std_err > 0.0);
    REQUIRE(std::abs(mc.value - exact.value) < 4 * mc.std_err);
  }
}

TEST_CASE("gaussian exhaustive moments equal the pair-partition formula exactly") {
  // Same-domain fourth moment: 2 + E[(-1)^{|R ∩ R'|}] = 29/15 at n=6, r=2.
  SykFamily one({make_spec(0, iota_domain(1, 6), 2)});
  const double m4 = exact_joint_moment_small(one, {0, 0, 0, 0}).value;
  CHECK(m4 == doctest::Approx(29.0 / 15.0).epsilon(1e-14));
  const MomentEstimate p4 = finite_n_pair_moment(one, {0, 0, 0, 0});
  CHECK(p4.method == Method::kFiniteNFormula);
  CHECK(p4.std_err == 0.0);
  CHECK(p4.value == doctest::Approx(m4).epsilon(1e-13));

  // Two overlapping models, |A_0 ∩ A_1| = 3.
  SykFamily two({make_spec(0, iota_domain(1, 6), 2),
                 make_spec(1, iota_domain(4, 6), 2)});
  const double alt = exact_joint_moment_small(two, {0, 1, 0, 1}).value;
  CHECK(alt == doctest::Approx(
                   qmix::overlap_stats::exact_pair_sign_expectation(6, 6, 3, 2, 2))
                   .epsilon(1e-13));
  CHECK(finite_n_pair_moment(two, {0, 1, 0, 1}).value ==
        doctest::Approx(alt).epsilon(1e-13));

  const double nested = exact_joint_moment_small(two, {0, 1, 1, 0}).value;
  CHECK(nested == doctest::Approx(1.0).epsilon(1e-13));

  // One crossing pair of same-label blocks inside a six-letter word.
  const double six = exact_joint_moment_small(two, {0, 0, 1, 1, 0, 0}).value;
  CHECK(six == doctest::Approx(29.0 / 15.0).epsilon(1e-13));
  CHECK(finite_n_pair_moment(two, {0, 0, 1, 1, 0, 0}).value ==
        doctest::Approx(six).epsilon(1e-13));
}

TEST_CASE("rademacher couplings shift the fourth moment by the diagonal term") {
  // Only the all-equal subset assignment sees the law's fourth moment
  // (3 vs 1), so the gap is exactly 2 / C(n, r).
  for (auto [n, r] : std::vector<std::pair<int, int>>{{6, 2}, {8, 2}, {7, 3}}) {
    SykFamily g({make_spec(0, iota_domain(1, n), r, CouplingLaw::kGaussian)});
    SykFamily b({make_spec(0, iota_domain(1, n), r, CouplingLaw::kRademacher)});
    const double vg = exact_joint_moment_small(g, {0, 0, 0, 0}).value;
    const double vb = exact_joint_moment_small(b, {0, 0, 0, 0}).value;
    double count = 1.0;
    for (int t = 0; t < r; ++t) count *= static_cast<double>(n - t) / (t + 1);
    CHECK(vg - vb == doctest::Approx(2.0 / count).epsilon(1e-12));
  }
  SykFamily b6({make_spec(0, iota_domain(1, 6), 2, CouplingLaw::kRademacher)});
  CHECK(exact_joint_moment_small(b6, {0, 0, 0, 0}).value ==
        doctest::Approx(27.0 / 15.0).epsilon(1e-13));
  SykFamily b8({make_spec(0, iota_domain(1, 8), 2, CouplingLaw::kRademacher)});
  CHECK(exact_joint_moment_small(b8, {0, 0, 0, 0}).value ==
        doctest::Approx(29.0 / 14.0).epsilon(1e-13));
}

TEST_CASE("odd interaction lengths flip the sign of the crossing term") {
  // r = 3 on both models, overlap 5 of 10: the single crossing partition of
  // (0,1,0,1) carries (-1)^{r^2} = -1 times the intersection sign.
  SykFamily family({make_spec(0, iota_domain(1, 10), 3),
                    make_spec(1, iota_domain(6, 10), 3)});
  const double expected =
      -qmix::overlap_stats::exact_pair_sign_expectation(10, 10, 5, 3, 3);
  const double exact = exact_joint_moment_small(family, {0, 1, 0, 1}).value;
  CHECK(exact == doctest::Approx(expected).epsilon(1e-13));
  CHECK(finite_n_pair_moment(family, {0, 1, 0, 1}).value ==
        doctest::Approx(expected).epsilon(1e-13));
  McOptions opts;
  opts.seed = 33;
  const MomentEstimate mc = mc_joint_moment(family, {0, 1, 0, 1}, 2000, opts);
  REQUIRE(std::abs(mc.value - expected) < 4 * mc.std_err);
}

TEST_CASE("empty and odd words short-circuit") {
  SykFamily family({make_spec(0, iota_domain(1, 6), 2)});
  CHECK(exact_joint_moment_small(family, {}).value == 1.0);
  CHECK(finite_n_pair_moment(family, {}).value == 1.0);
  McOptions opts;
  opts.seed = 3;
  const MomentEstimate mc = mc_joint_moment(family, {}, 16, opts);
  CHECK(mc.value == 1.0);
  CHECK(mc.std_err == 0.0);

  CHECK(exact_joint_moment_small(family, {0, 0, 0}).value == 0.0);
  const MomentEstimate odd = finite_n_pair_moment(family, {0, 0, 0});
  CHECK(odd.value == 0.0);
  CHECK(odd.std_err == 0.0);
}

TEST_CASE("caps are enforced before any heavy work") {
  SykFamily sparse({make_spec(0, {1, 300}, 1)});
  McOptions opts;
  opts.seed = 1;
  CHECK_THROWS_AS(mc_joint_moment(sparse, {0, 0}, 4, opts), CapExceeded);
  opts.index_cap = 512;
  CHECK_NOTHROW(mc_joint_moment(sparse, {0, 0}, 4, opts));

  SykFamily mid({make_spec(0, iota_domain(1, 6), 3)});
  McOptions tight;
  tight.seed = 1;
  tight.enumeration_cap = 5;  // C(6,3) = 20 subsets
  CHECK_THROWS_AS(mc_joint_moment(mid, {0, 0}, 4, tight), CapExceeded);

  SykFamily wide({make_spec(0, iota_domain(1, 12), 3)});
  CHECK_THROWS_AS(exact_joint_moment_small(wide, {0, 0, 0, 0}, 1000.0), CapExceeded);

  const SykModelSpec tall = make_spec(0, iota_domain(1, 22), 2);
  SplitMix64 rng(1);
  CHECK_THROWS_AS(sample_hamiltonian(tall, rng), CapExceeded);  // needs 11 qubits
  const SykModelSpec many = make_spec(0, iota_domain(1, 8), 4);
  CHECK_THROWS_AS(sample_hamiltonian(many, rng, 10, 10), CapExceeded);  // C(8,4) = 70
}

TEST_CASE("specs and arguments are validated") {
  CHECK_THROWS_AS(make_spec(0, {1, 2, 2}, 1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(make_spec(0, {0, 1}, 1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(make_spec(0, {-3, 1}, 1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(make_spec(0, {}, 0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(make_spec(0, {1, 2, 3}, 4).validate(), std::invalid_argument);
  CHECK_NOTHROW(make_spec(0, {1, 2, 3}, 0).validate());

  CHECK_THROWS_AS(SykFamily({}), std::invalid_argument);
  CHECK_THROWS_AS(SykFamily({make_spec(0, iota_domain(1, 4), 2),
                             make_spec(1, iota_domain(1, 5), 2)}),
                  std::invalid_argument);

  SykFamily family({make_spec(0, iota_domain(1, 6), 2)});
  CHECK_THROWS_AS(exact_joint_moment_small(family, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(exact_joint_moment_small(family, {-1, 0}), std::invalid_argument);
  McOptions opts;
  CHECK_THROWS_AS(mc_joint_moment(family, {0, 0}, 0, opts), std::invalid_argument);
  opts.threads = 0;
  CHECK_THROWS_AS(mc_joint_moment(family, {0, 0}, 4, opts), std::invalid_argument);

  // Zero interaction length validates as a spec but carries no coupling sum.
  SykFamily scalar({make_spec(0, iota_domain(1, 6), 0)});
  CHECK_THROWS_AS(exact_joint_moment_small(scalar, {0, 0}), std::invalid_argument);

  SplitMix64 rng(1);
  const SykModelSpec zero = make_spec(0, iota_domain(1, 6), 0);
  CHECK_THROWS_AS(sample_hamiltonian(zero, rng), std::invalid_argument);
}

TEST_CASE("the limiting coupling matrix encodes overlap decay and parity") {
  SykFamily family({make_spec(0, iota_domain(1, 8), 2),
                    make_spec(1, iota_domain(1, 8), 3)});
  CHECK(family.domain_size() == 8);
  CHECK(family.overlap(0, 1) == 8);
  CHECK(family.lambda_hat(0, 1) == doctest::Approx(0.75));
  CHECK(family.lambda_hat(0, 0) == doctest::Approx(0.5));
  CHECK(family.parity(0) == 0);
  CHECK(family.parity(1) == 1);

  const auto q = limit_qmatrix(family);
  CHECK(q(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(q(0, 1) == doctest::Approx(std::exp(-1.5)).epsilon(1e-14));
  CHECK(q(1, 0) == q(0, 1));
  CHECK(q(1, 1) == doctest::Approx(-std::exp(-2.25)).epsilon(1e-14));

  const double inf = std::numeric_limits<double>::infinity();
  const auto qd = limit_qmatrix(family, {{0.0, inf}, {inf, 0.3}});
  CHECK(qd(0, 0) == 1.0);
  CHECK(qd(0, 1) == 0.0);
  CHECK(qd(1, 1) == doctest::Approx(-std::exp(-0.6)).epsilon(1e-14));

  CHECK_THROWS_AS(limit_qmatrix(family, {{0.0, 0.1}}), std::invalid_argument);
  CHECK_THROWS_AS(limit_qmatrix(family, {{0.0, 0.1}, {0.2, 0.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(limit_qmatrix(family, {{0.0, -0.1}, {-0.1, 0.0}}),
                  std::invalid_argument);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(limit_qmatrix(family, {{0.0, nan}, {nan, 0.0}}),
                  std::invalid_argument);

  // The limiting moment is the pair-partition moment of that matrix.
  CHECK(limit_moment(family, {0, 1, 0, 1}) ==
        doctest::Approx(std::exp(-1.5)).epsilon(1e-13));
  CHECK(limit_moment(family, {1, 1, 1, 1}) ==
        doctest::Approx(2.0 - std::exp(-2.25)).epsilon(1e-13));
  CHECK(limit_moment(family, {0, 1, 0, 1}) ==
        doctest::Approx(qmix::partitions::qgaussian_moment({0, 1, 0, 1}, q))
            .epsilon(1e-14));
}

TEST_CASE("parity sweeps must keep each label's length parity constant") {
  SykFamily f1({make_spec(0, iota_domain(1, 6), 2), make_spec(1, iota_domain(1, 6), 3)});
  SykFamily f2({make_spec(0, iota_domain(1, 10), 4), make_spec(1, iota_domain(1, 10), 5)});
  const std::vector<int> par = sweep_parity({f1, f2});
  REQUIRE(par.size() == 2);
  CHECK(par[0] == 0);
  CHECK(par[1] == 1);

  SykFamily flipped({make_spec(0, iota_domain(1, 10), 4),
                     make_spec(1, iota_domain(1, 10), 4)});
  CHECK_THROWS_AS(sweep_parity({f1, flipped}), std::invalid_argument);
  SykFamily fewer({make_spec(0, iota_domain(1, 10), 4)});
  CHECK_THROWS_AS(sweep_parity({f1, fewer}), std::invalid_argument);
  CHECK_THROWS_AS(sweep_parity({}), std::invalid_argument);
}

TEST_CASE("enum names are stable strings") {
  CHECK(std::string(qmix::method_name(Method::kDenseMc)) == "dense-mc");
  CHECK(std::string(qmix::method_name(Method::kReducedMc)) == "reduced-mc");
  CHECK(std::string(qmix::method_name(Method::kExactSmall)) == "exact-small");
  CHECK(std::string(qmix::method_name(Method::kLimitFormula)) == "limit-formula");
  CHECK(std::string(qmix::method_name(Method::kFiniteNFormula)) == "finite-n-formula");
  CHECK(std::string(coupling_law_name(CouplingLaw::kGaussian)) == "gaussian");
  CHECK(std::string(coupling_law_name(CouplingLaw::kRademacher)) == "rademacher");
}
