#include <benchmark/benchmark.h>

#include <random>

#include "hqfs/annealer.hpp"
#include "hqfs/portfolio.hpp"
#include "hqfs/qubo.hpp"

namespace {

hqfs::QuboProblem portfolio_qubo(std::size_t assets, std::size_t bits) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  const auto m = static_cast<Eigen::Index>(assets);
  Eigen::MatrixXd a(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) a(i, j) = nd(rng);
  }
  hqfs::Moments mo;
  mo.sigma = 1e-4 * (a * a.transpose() / static_cast<double>(assets) + 0.01 * Eigen::MatrixXd::Identity(m, m));
  mo.mu.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) mo.mu(i) = 1e-3 * nd(rng);
  return hqfs::encode_qubo(mo, 1.0, bits);
}

}  // namespace

// Reference size: 30 assets x 6 bits.
static void BM_SolveSa(benchmark::State& state) {
  const auto p = portfolio_qubo(static_cast<std::size_t>(state.range(0)), 6);
  hqfs::SolverConfig cfg;
  for (auto _ : state) {
    auto r = hqfs::solve_sa(p, cfg);
    benchmark::DoNotOptimize(r.energy);
    ++cfg.seed;
  }
  state.counters["dim"] = static_cast<double>(p.dim());
}
BENCHMARK(BM_SolveSa)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

static void BM_SolveExhaustive(benchmark::State& state) {
  const auto p = portfolio_qubo(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(hqfs::solve_exhaustive(p).energy);
}
BENCHMARK(BM_SolveExhaustive)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_EncodeQubo(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(portfolio_qubo(30, 6).dim());
}
BENCHMARK(BM_EncodeQubo);
BENCHMARK_MAIN();
