#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hqfs/forecaster.hpp"
#include "hqfs/market_data.hpp"
#include "hqfs/preprocess.hpp"

namespace fixtures {

/// One symbol with `days` random feature rows and a sample on every day that
/// has a full window. Targets are small, like daily returns and volatilities.
inline hqfs::SampleSet random_samples(std::size_t days, std::size_t lookback, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  hqfs::FeatureMatrix f;
  f.dim = dim;
  f.values.resize(days * dim);
  for (auto& v : f.values) v = nd(rng);
  f.valid.assign(days, 1);
  std::vector<hqfs::Sample> samples;
  for (std::size_t t = lookback - 1; t < days; ++t) {
    const double r = 0.01 * nd(rng);
    samples.push_back({0, static_cast<std::uint32_t>(t), r, 0.01 + 0.005 * std::abs(nd(rng)), r, hqfs::Split::train});
  }
  return hqfs::SampleSet(lookback, dim, {"AAA"}, {f}, samples);
}

/// Model with small random weights everywhere, including the head biases.
inline hqfs::ForecastModel random_model(const hqfs::CircuitSpec& circuit, std::size_t hidden, std::size_t lookback,
                                        std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  hqfs::ForecastModel m;
  m.circuit = circuit;
  m.theta.resize(circuit.parameter_count());
  for (auto& t : m.theta) t = 3.0 * u(rng);
  m.head = hqfs::HeadParams::zeros(circuit.qubits, hidden);
  for (auto* v : {&m.head.w1, &m.head.b1, &m.head.w2, &m.head.b2}) {
    for (auto& x : *v) x = u(rng);
  }
  m.lookback = lookback;
  m.feature_dim = dim;
  return m;
}

inline hqfs::PriceBar bar(double close, double volume = 1000.0) {
  hqfs::PriceBar b;
  b.open = close;
  b.high = close * 1.01;
  b.low = close * 0.99;
  b.close = close;
  b.volume = volume;
  return b;
}

/// Calendar of consecutive days starting 2020-01-01.
inline std::vector<hqfs::DayKey> calendar(std::size_t days) {
  std::vector<hqfs::DayKey> c;
  for (std::size_t i = 0; i < days; ++i) c.push_back(18262 + static_cast<hqfs::DayKey>(i));
  return c;
}

inline std::filesystem::path source_dir() { return HQFS_SOURCE_DIR; }

/// Fresh, empty scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::path(HQFS_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
