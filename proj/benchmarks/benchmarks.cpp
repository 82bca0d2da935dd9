#include <benchmark/benchmark.h>

#include <vector>

#include "qmix/epsilon_graph.hpp"
#include "qmix/majorana.hpp"
#include "qmix/overlap_stats.hpp"
#include "qmix/partitions.hpp"
#include "qmix/rng.hpp"
#include "qmix/syk.hpp"

namespace {

using qmix::SplitMix64;
using qmix::majorana::MajoranaMonomial;
using qmix::partitions::Word;

std::vector<int> iota_domain(int first, int n) {
  std::vector<int> d(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = first + i;
  return d;
}

std::vector<int> random_sorted_subset(int max_index, int size, SplitMix64& rng) {
  std::vector<int> pool(static_cast<std::size_t>(max_index));
  for (int i = 0; i < max_index; ++i) pool[static_cast<std::size_t>(i)] = i + 1;
  for (int t = 0; t < size; ++t) {
    const auto pick = rng.next_below(static_cast<std::uint64_t>(max_index - t));
    std::swap(pool[static_cast<std::size_t>(t)],
              pool[static_cast<std::size_t>(t) + pick]);
  }
  pool.resize(static_cast<std::size_t>(size));
  std::sort(pool.begin(), pool.end());
  return pool;
}

void BM_MonomialMultiply(benchmark::State& state) {
  SplitMix64 rng(1);
  std::vector<MajoranaMonomial> pool;
  for (int t = 0; t < 256; ++t) {
    const auto idx = random_sorted_subset(192, 8, rng);
    pool.emplace_back(std::span<const int>(idx));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& a = pool[i % pool.size()];
    const auto& b = pool[(i * 7 + 3) % pool.size()];
    benchmark::DoNotOptimize(qmix::majorana::multiply(a, b));
    ++i;
  }
}
BENCHMARK(BM_MonomialMultiply);

void BM_SymbolicWordTrace(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0));
  SplitMix64 rng(2);
  std::vector<MajoranaMonomial> word;
  for (int t = 0; t < len; ++t) {
    const auto idx = random_sorted_subset(64, 6, rng);
    word.emplace_back(std::span<const int>(idx));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        qmix::majorana::trace_of_word(std::span<const MajoranaMonomial>(word)));
  }
}
BENCHMARK(BM_SymbolicWordTrace)->Arg(4)->Arg(8)->Arg(16);

void BM_QGaussianMoment(benchmark::State& state) {
  const int len = static_cast<int>(state.range(0));
  qmix::partitions::QMatrix q(2, 0.0);
  q.set(0, 0, 0.3);
  q.set(1, 1, -0.2);
  q.set(0, 1, 0.5);
  Word w(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) w[static_cast<std::size_t>(i)] = i % 2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(qmix::partitions::qgaussian_moment(w, q));
  }
}
BENCHMARK(BM_QGaussianMoment)->Arg(8)->Arg(12)->Arg(16);

void BM_SignExpectationMc(benchmark::State& state) {
  qmix::overlap_stats::OverlapConfig cfg;
  cfg.domains = {iota_domain(1, 1000), iota_domain(1, 1000), iota_domain(1, 1000)};
  cfg.sizes = {30, 30, 30};
  cfg.edges = {{0, 1}, {1, 2}};
  SplitMix64 rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        qmix::overlap_stats::sign_expectation_mc(cfg, 1000, rng));
  }
}
BENCHMARK(BM_SignExpectationMc);

void BM_McJointMoment(benchmark::State& state) {
  qmix::syk::SykModelSpec s0, s1;
  s0.label = 0;
  s0.domain = iota_domain(1, 12);
  s0.interaction_length = 3;
  s1 = s0;
  s1.label = 1;
  s1.domain = iota_domain(7, 12);
  const qmix::syk::SykFamily family({s0, s1});
  qmix::syk::McOptions opts;
  opts.seed = 4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        qmix::syk::mc_joint_moment(family, {0, 1, 0, 1}, 64, opts));
  }
}
BENCHMARK(BM_McJointMoment);

void BM_DenseMonomial(benchmark::State& state) {
  const int qubits = static_cast<int>(state.range(0));
  SplitMix64 rng(5);
  const auto idx = random_sorted_subset(2 * qubits, 5, rng);
  const MajoranaMonomial m{std::span<const int>(idx)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(qmix::majorana::dense_monomial(m, qubits));
  }
}
BENCHMARK(BM_DenseMonomial)->Arg(6)->Arg(8)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
