#pragma once

#include <cstddef>
#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hqfs/bytes.hpp"
#include "hqfs/hash.hpp"
#include "hqfs/market_data.hpp"

namespace hqfs {

/// Per-day values; std::nullopt where the quantity is undefined.
using MaskedSeries = std::vector<std::optional<double>>;

struct ReturnSeries {
  std::string symbol;
  MaskedSeries values;  // log-returns, defined where day t and t-1 both exist
};

struct VolSeries {
  std::string symbol;
  std::size_t window = 0;
  MaskedSeries values;
};

ReturnSeries log_returns(const PriceSeries& series);
/// Sample standard deviation (divisor W-1) of the W returns ending at each day.
VolSeries rolling_volatility(const ReturnSeries& returns, std::size_t window);

enum class Split : std::uint8_t { train = 0, validation = 1, test = 2 };
const char* to_string(Split split);

/// Chronological partition of days 1..T: train t <= t_tr, validation
/// t_tr < t <= t_va, test t > t_va. Day indices elsewhere are 0-based, so
/// day index i is day t = i + 1.
struct SplitSpec {
  std::size_t num_days = 0;
  std::size_t train_end = 0;
  std::size_t val_end = 0;

  Split label(std::size_t day_index) const;
};

SplitSpec chrono_split(std::size_t num_days, std::size_t train_end, std::size_t val_end);

struct WinsorBounds {
  double lower = 0;
  double upper = 0;

  friend bool operator==(const WinsorBounds&, const WinsorBounds&) = default;
};

/// Linear-interpolation quantile of an ascending sample.
double empirical_quantile(std::span<const double> sorted, double p);
WinsorBounds fit_winsor(std::span<const double> train_returns, double alpha);

inline double winsorize(double r, const WinsorBounds& b) { return std::min(std::max(r, b.lower), b.upper); }

/// Dense per-day feature rows for one symbol; row t is valid only if every
/// component is available using data from days <= t.
struct FeatureMatrix {
  std::size_t dim = 0;
  std::vector<double> values;  // num_days * dim
  std::vector<std::uint8_t> valid;

  std::size_t num_days() const { return valid.size(); }
  std::span<const double> row(std::size_t day) const { return {values.data() + day * dim, dim}; }
  std::span<double> row(std::size_t day) { return {values.data() + day * dim, dim}; }
};

/// Feature layout for k lags: [r~_t .. r~_{t-k+1}, sigma_t .. sigma_{t-k+1},
/// dln(volume_t), (high_t - low_t) / close_t]; d = 2k + 2.
inline std::size_t feature_dim(std::size_t lags) { return 2 * lags + 2; }
std::vector<std::string> feature_names(std::size_t lags);

FeatureMatrix build_features(const PriceSeries& series, const ReturnSeries& returns,
                             const VolSeries& vols, std::size_t lags, const WinsorBounds& bounds);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;
  double epsilon = 1e-8;
  WinsorBounds return_bounds;

  std::size_t dim() const { return mean.size(); }
  void apply(std::span<double> row) const;
  std::vector<double> standardize(std::span<const double> row) const;

  void write(ByteWriter& w) const;
  static Standardizer read(ByteReader& r);
  Digest digest() const;

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

/// Mean and population standard deviation per column of row-major `rows`.
Standardizer fit_standardizer(std::span<const double> rows, std::size_t dim, double epsilon);

struct Sample {
  std::uint32_t symbol = 0;
  std::uint32_t day = 0;         // last input row t
  double target_return = 0;      // winsorized r_{t+1}
  double target_vol = 0;         // sigma_{t+1}
  double next_return_raw = 0;    // unclipped r_{t+1}
  Split split = Split::train;
};

/// Row-major L x d input window.
struct FeatureWindow {
  std::span<const double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Standardized feature rows plus the (symbol, day) samples drawn from them.
/// Windows are views into the stored rows.
class SampleSet {
 public:
  SampleSet() = default;
  SampleSet(std::size_t lookback, std::size_t dim, std::vector<std::string> symbols,
            std::vector<FeatureMatrix> features, std::vector<Sample> samples);

  std::size_t lookback() const { return lookback_; }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::vector<Sample>& samples() const { return samples_; }
  const FeatureMatrix& features(std::size_t symbol) const { return features_.at(symbol); }

  bool has_window(std::size_t symbol, std::size_t day) const;
  FeatureWindow window(std::size_t symbol, std::size_t day) const;
  FeatureWindow window(const Sample& s) const { return window(s.symbol, s.day); }

  std::vector<Sample> subset(Split split) const;

  void write(ByteWriter& w) const;
  static SampleSet read(ByteReader& r);

 private:
  std::size_t lookback_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::string> symbols_;
  std::vector<FeatureMatrix> features_;
  std::vector<Sample> samples_;
};

/// Next-day targets for one symbol, indexed by the day the target is observed.
struct TargetSeries {
  MaskedSeries clipped_returns;
  MaskedSeries vols;
  MaskedSeries raw_returns;
};

SampleSet build_sequences(std::vector<std::string> symbols, std::vector<FeatureMatrix> standardized,
                          const std::vector<TargetSeries>& targets, std::size_t lookback,
                          const SplitSpec& split);

struct PreprocessConfig {
  std::size_t vol_window = 21;
  std::size_t lookback = 20;
  std::size_t lags = 5;
  double winsor_alpha = 0.005;
  double epsilon = 1e-8;

  void validate() const;
};

/// Winsor bounds and standardizer fitted on days t <= train_end only.
Standardizer fit_training_statistics(const PriceTable& table, const PreprocessConfig& config,
                                     std::size_t train_end);

struct PreparedData {
  SplitSpec split;
  Standardizer standardizer;
  SampleSet samples;

  std::vector<std::uint8_t> serialize(const Digest& stage_digest) const;
  static PreparedData deserialize(std::span<const std::uint8_t> bytes, Digest* stage_digest = nullptr);
};

PreparedData prepare_samples(const PriceTable& table, const PreprocessConfig& config, const SplitSpec& split);

}  // namespace hqfs
