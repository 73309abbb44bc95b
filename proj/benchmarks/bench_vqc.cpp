#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hqfs/vqc.hpp"

static void BM_Embed(benchmark::State& state) {
  hqfs::CircuitSpec spec;
  spec.qubits = static_cast<std::size_t>(state.range(0));
  spec.depth = 2;
  spec.feature_map.assign(spec.qubits, 0);
  std::vector<double> angles(spec.qubits, 0.3);
  std::vector<double> theta(spec.parameter_count(), 0.7);
  for (auto _ : state) benchmark::DoNotOptimize(hqfs::embed_angles(angles, theta, spec));
}
BENCHMARK(BM_Embed)->DenseRange(2, 8, 2);

// Full parameter-shift Jacobian: 2 circuit runs per parameter.
static void BM_ShiftJacobian(benchmark::State& state) {
  hqfs::CircuitSpec spec;
  spec.qubits = static_cast<std::size_t>(state.range(0));
  spec.depth = 2;
  spec.feature_map.assign(spec.qubits, 0);
  std::vector<double> angles(spec.qubits, 0.3);
  std::vector<double> theta(spec.parameter_count(), 0.7);
  for (auto _ : state) benchmark::DoNotOptimize(hqfs::param_shift_jacobian(angles, theta, spec));
}
BENCHMARK(BM_ShiftJacobian)->DenseRange(2, 8, 2);
