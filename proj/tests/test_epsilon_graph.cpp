#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "doctest.h"
#include "qmix/epsilon_graph.hpp"
#include "qmix/syk.hpp"

using qmix::MomentEstimate;
using qmix::partitions::Word;
using namespace qmix::epsilon_graph;
using qmix::syk::CouplingLaw;
using qmix::syk::SykFamily;
using qmix::syk::SykModelSpec;

namespace {

int sorted_overlap(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<int> both;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                        std::back_inserter(both));
  return static_cast<int>(both.size());
}

}  // namespace

TEST_CASE("the interaction-length schedule tracks half the floor of n^(2/3)") {
  const std::vector<std::pair<int, int>> pins = {
      {4, 0}, {8, 2}, {12, 2}, {24, 4}, {40, 4}, {400, 26}, {4000, 124}};
  for (auto [n, r] : pins) {
    CHECK(interaction_length_schedule(n) == r);
  }
  // r = 2 * floor(t / 4) with t^3 <= n^2 < (t+1)^3, so 2r brackets t up to
  // the floor slack: (2r)^3 <= n^2 < (2r + 4)^3.  Always even.
  for (int n = 4; n <= 2000; n += 7) {
    const int r = interaction_length_schedule(n);
    const long long n2 = 1LL * n * n;
    CHECK(8LL * r * r * r <= n2);
    CHECK(1LL * (2 * r + 4) * (2 * r + 4) * (2 * r + 4) > n2);
    CHECK(r % 2 == 0);
  }
}

TEST_CASE("graph factories and editing") {
  const Graph e = Graph::empty_graph(3);
  const Graph k = Graph::complete_graph(3);
  const Graph p = Graph::path_graph(3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(e.edge(i, j) == 0);
      CHECK(k.edge(i, j) == (i == j ? 0 : 1));
    }
  }
  CHECK(p.edge(0, 1) == 1);
  CHECK(p.edge(1, 2) == 1);
  CHECK(p.edge(0, 2) == 0);

  Graph g = Graph::empty_graph(4);
  g.set_edge(2, 0, 1);
  CHECK(g.edge(0, 2) == 1);
  CHECK(g.edge(2, 0) == 1);
  g.set_edge(2, 0, 0);
  CHECK(g.edge(0, 2) == 0);
  CHECK_THROWS_AS(g.set_edge(1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(g.set_edge(0, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(g.set_edge(0, 1, 2), std::invalid_argument);

  Graph bad = Graph::empty_graph(2);
  bad.adjacency[1] = 1;  // (0,1) set but (1,0) not: asymmetric
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  Graph diag = Graph::empty_graph(2);
  diag.adjacency[0] = 1;
  CHECK_THROWS_AS(diag.validate(), std::invalid_argument);
  CHECK_THROWS_AS(Graph::empty_graph(0), std::invalid_argument);
}

TEST_CASE("overlap families realize the graph's intersection pattern") {
  for (int d = 1; d <= 3; ++d) {
    std::vector<Graph> graphs = {Graph::empty_graph(d), Graph::complete_graph(d)};
    if (d == 3) graphs.push_back(Graph::path_graph(3));
    for (const Graph& g : graphs) {
      for (int m : {1, 2, 4, 10}) {
        const auto specs = build_overlap_sets(g, m, CouplingLaw::kGaussian);
        REQUIRE(static_cast<int>(specs.size()) == d);
        const int n = d * d * m;
        for (int i = 0; i < d; ++i) {
          const auto& dom = specs[static_cast<std::size_t>(i)].domain;
          REQUIRE(static_cast<int>(dom.size()) == n);
          CHECK(std::is_sorted(dom.begin(), dom.end()));
          CHECK(std::adjacent_find(dom.begin(), dom.end()) == dom.end());
          CHECK(dom.front() >= 1);
          CHECK(specs[static_cast<std::size_t>(i)].interaction_length ==
                interaction_length_schedule(n));
          CHECK(specs[static_cast<std::size_t>(i)].law == CouplingLaw::kGaussian);
          for (int j = 0; j < i; ++j) {
            const int a = sorted_overlap(dom, specs[static_cast<std::size_t>(j)].domain);
            CHECK(a == (g.edge(i, j) ? 0 : 2 * m));
          }
        }
      }
    }
  }

  // Path on 3 vertices, m = 4: endpoints overlap, neighbors do not.
  const auto p3 = build_overlap_sets(Graph::path_graph(3), 4, CouplingLaw::kRademacher);
  SykFamily family({p3[0], p3[1], p3[2]});
  CHECK(family.domain_size() == 36);
  CHECK(family.overlap(0, 1) == 0);
  CHECK(family.overlap(1, 2) == 0);
  CHECK(family.overlap(0, 2) == 8);
  CHECK(family.spec(0).interaction_length == 4);
  CHECK(p3[0].law == CouplingLaw::kRademacher);
}

TEST_CASE("decay-rate estimates along the sweep approach the graph limits") {
  const Graph g = Graph::empty_graph(2);
  const std::vector<std::pair<int, double>> pins = {
      {1, 0.0}, {10, 0.2}, {100, 0.845}, {1000, 1.922}};
  for (auto [m, lam] : pins) {
    const auto specs = build_overlap_sets(g, m, CouplingLaw::kGaussian);
    SykFamily family({specs[0], specs[1]});
    CHECK(family.lambda_hat(0, 1) == doctest::Approx(lam).epsilon(1e-9));
  }
  // With an edge the overlap is empty, so the rate estimate is exactly zero
  // and the limiting coupling is +1 (even interaction lengths).
  const auto adj = build_overlap_sets(Graph::complete_graph(2), 50, CouplingLaw::kGaussian);
  SykFamily linked({adj[0], adj[1]});
  CHECK(linked.lambda_hat(0, 1) == 0.0);
  const auto q = qmix::syk::limit_qmatrix(linked);
  CHECK(q(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("admissible words respect the commutation structure") {
  // No edges: any word without immediate repetition is admissible.  Words
  // come out in dictionary order (a prefix before its extensions).
  const auto free2 = admissible_words(Graph::empty_graph(2), 3);
  const std::vector<Word> expect2 = {{0}, {0, 1}, {0, 1, 0},
                                     {1}, {1, 0}, {1, 0, 1}};
  CHECK(free2 == expect2);

  // Complete graph: letters all commute, so only all-distinct words remain.
  const auto full2 = admissible_words(Graph::complete_graph(2), 4);
  const std::vector<Word> expectFull = {{0}, {0, 1}, {1}, {1, 0}};
  CHECK(full2 == expectFull);

  const auto full3 = admissible_words(Graph::complete_graph(3), 5);
  CHECK(full3.size() == 3 + 6 + 6);  // falling factorials of 3
  for (const Word& w : full3) {
    std::set<int> seen(w.begin(), w.end());
    CHECK(seen.size() == w.size());
  }

  // Path 0-1-2: letters 0 and 2 are free of each other, 1 commutes with both.
  const auto p3 = admissible_words(Graph::path_graph(3), 4);
  const auto has = [&](const Word& w) {
    return std::find(p3.begin(), p3.end(), w) != p3.end();
  };
  CHECK(has({0, 2, 0, 2}));   // non-edge alternation: admissible
  CHECK(!has({0, 1, 0, 1}));  // 1 commutes with 0: the 0s can merge
  CHECK(!has({0, 1, 0}));
  CHECK(has({0, 2, 0}));
  CHECK(!has({0, 0}));

  // Empty graph, 4 letters, length 6: first letter free, rest avoid repeats.
  const auto e4 = admissible_words(Graph::empty_graph(4), 6);
  std::size_t len6 = 0;
  for (const Word& w : e4) {
    if (w.size() == 6) ++len6;
  }
  CHECK(len6 == 4 * 3 * 3 * 3 * 3 * 3);

  CHECK_THROWS_AS(admissible_words(Graph::empty_graph(2), 0), std::invalid_argument);
  CHECK_THROWS_AS(admissible_words(Graph::empty_graph(2), 9), std::invalid_argument);
}

TEST_CASE("graph-structured coupling matrices pass the freeness checks") {
  const std::vector<Graph> graphs = {Graph::empty_graph(3), Graph::complete_graph(3),
                                     Graph::path_graph(3)};
  const std::vector<std::vector<double>> diags = {
      {0.0, 0.0, 0.0}, {0.5, -0.25, 0.0}, {1.0, 1.0, 1.0}};
  for (const Graph& g : graphs) {
    bool any_edge = false;
    for (int i = 0; i < g.vertices; ++i) {
      for (int j = i + 1; j < g.vertices; ++j) any_edge = any_edge || g.edge(i, j);
    }
    for (const auto& diag : diags) {
      const FreenessReport report = check_epsilon_freeness(g, diag, 5);
      CHECK(report.passed);
      CHECK(report.violations.empty());
      // Swap invariances only exist when some pair of letters commutes.
      CHECK((report.swap_checks > 0) == any_edge);
      CHECK(report.centered_checks > 0);
    }
  }
}

TEST_CASE("freeness checks catch corrupted couplings") {
  const Graph p3 = Graph::path_graph(3);

  // Corrupt a non-edge coupling: letters 0 and 2 are supposed to be free.
  qmix::partitions::QMatrix q1(3, 0.0);
  q1.set(0, 1, 1.0);
  q1.set(1, 2, 1.0);
  q1.set(0, 2, 0.5);
  const FreenessReport r1 = check_qmatrix_freeness(p3, q1, 4);
  CHECK(!r1.passed);
  CHECK(!r1.violations.empty());

  // Corrupt an edge coupling: letters 0 and 1 are supposed to commute.
  qmix::partitions::QMatrix q2(3, 0.0);
  q2.set(0, 1, 0.7);
  q2.set(1, 2, 1.0);
  const FreenessReport r2 = check_qmatrix_freeness(p3, q2, 4);
  CHECK(!r2.passed);
  CHECK(!r2.violations.empty());
}

TEST_CASE("finite families converge to the graph limit as blocks grow") {
  // Two non-adjacent vertices: the alternating moment decays toward zero.
  const Graph g = Graph::empty_graph(2);
  const Word word{0, 1, 0, 1};
  std::vector<double> values;
  for (int m : {2, 6, 1000}) {
    const auto specs = build_overlap_sets(g, m, CouplingLaw::kGaussian);
    SykFamily family({specs[0], specs[1]});
    const MomentEstimate est = qmix::syk::finite_n_pair_moment(family, word);
    CHECK(est.std_err == 0.0);
    values.push_back(est.value);
  }
  CHECK(values[0] == doctest::Approx(26.0 / 49.0).epsilon(1e-12));
  CHECK(values[1] == doctest::Approx(0.451293148).epsilon(1e-8));
  CHECK(values[2] == doctest::Approx(0.018888428).epsilon(1e-7));
  CHECK(values[0] > values[1]);
  CHECK(values[1] > values[2]);

  // Adjacent vertices have disjoint domains: the moment is exactly one at
  // every block size, already equal to its limit.
  for (int m : {1, 3, 50}) {
    const auto specs = build_overlap_sets(Graph::complete_graph(2), m, CouplingLaw::kGaussian);
    SykFamily family({specs[0], specs[1]});
    CHECK(qmix::syk::finite_n_pair_moment(family, word).value ==
          doctest::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("dense monte carlo agrees with the pair formula on small overlap families") {
  const Word word{0, 1, 0, 1};
  for (bool adjacent : {false, true}) {
    const Graph g = adjacent ? Graph::complete_graph(2) : Graph::empty_graph(2);
    const auto specs = build_overlap_sets(g, 2, CouplingLaw::kGaussian);
    SykFamily family({specs[0], specs[1]});  // n = 8, indices <= 24
    const double target = qmix::syk::finite_n_pair_moment(family, word).value;
    qmix::syk::McOptions opts;
    opts.seed = 99;
    opts.threads = 2;
    const MomentEstimate mc = qmix::syk::mc_joint_moment(family, word, 3000, opts);
    REQUIRE(mc.std_err > 0.0);
    REQUIRE(std::abs(mc.value - target) < 4 * mc.std_err);
  }
}

TEST_CASE("overlap construction rejects bad parameters") {
  CHECK_THROWS_AS(build_overlap_sets(Graph::empty_graph(2), 0, CouplingLaw::kGaussian),
                  std::invalid_argument);
  Graph bad = Graph::empty_graph(2);
  bad.adjacency[1] = 1;
  CHECK_THROWS_AS(build_overlap_sets(bad, 1, CouplingLaw::kGaussian),
                  std::invalid_argument);
}
