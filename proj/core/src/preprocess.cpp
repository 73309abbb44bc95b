#include "hqfs/preprocess.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hqfs/error.hpp"

namespace hqfs {

namespace {

constexpr std::string_view kSamplesMagic = "HQFSSMP1";
constexpr std::uint32_t kSamplesVersion = 1;

void write_split(ByteWriter& w, const SplitSpec& s) {
  w.u64(s.num_days);
  w.u64(s.train_end);
  w.u64(s.val_end);
}

SplitSpec read_split(ByteReader& r) {
  SplitSpec s;
  s.num_days = r.u64();
  s.train_end = r.u64();
  s.val_end = r.u64();
  return s;
}

}  // namespace

ReturnSeries log_returns(const PriceSeries& series) {
  if (series.present() < 2) {
    throw DataError("log_returns: " + series.symbol + " has fewer than 2 prices");
  }
  ReturnSeries out{series.symbol, MaskedSeries(series.size())};
  for (std::size_t t = 1; t < series.size(); ++t) {
    const auto& prev = series.bars[t - 1];
    const auto& cur = series.bars[t];
    if (prev && cur) out.values[t] = std::log(cur->close) - std::log(prev->close);
  }
  return out;
}

VolSeries rolling_volatility(const ReturnSeries& returns, std::size_t window) {
  if (window < 2) throw std::invalid_argument("rolling_volatility: window must be >= 2");
  VolSeries out{returns.symbol, window, MaskedSeries(returns.values.size())};
  const auto& r = returns.values;
  std::size_t run = 0;  // consecutive valid returns ending at t
  for (std::size_t t = 0; t < r.size(); ++t) {
    run = r[t] ? run + 1 : 0;
    if (run < window) continue;
    double mean = 0;
    for (std::size_t k = 0; k < window; ++k) mean += *r[t - k];
    mean /= static_cast<double>(window);
    double ss = 0;
    for (std::size_t k = 0; k < window; ++k) {
      double dev = *r[t - k] - mean;
      ss += dev * dev;
    }
    out.values[t] = std::sqrt(ss / static_cast<double>(window - 1));
  }
  return out;
}

const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

Split SplitSpec::label(std::size_t day_index) const {
  const std::size_t t = day_index + 1;
  if (t <= train_end) return Split::train;
  if (t <= val_end) return Split::validation;
  return Split::test;
}

SplitSpec chrono_split(std::size_t num_days, std::size_t train_end, std::size_t val_end) {
  if (!(1 <= train_end && train_end < val_end && val_end < num_days)) {
    throw std::invalid_argument("chrono_split: need 1 <= t_tr < t_va < T, got t_tr=" +
                                std::to_string(train_end) + " t_va=" + std::to_string(val_end) +
                                " T=" + std::to_string(num_days));
  }
  return {num_days, train_end, val_end};
}

double empirical_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
  if (!(p >= 0 && p <= 1)) throw std::invalid_argument("empirical_quantile: p outside [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

WinsorBounds fit_winsor(std::span<const double> train_returns, double alpha) {
  if (train_returns.empty()) throw DataError("fit_winsor: no training returns");
  if (!(alpha >= 0 && alpha < 0.5)) throw std::invalid_argument("fit_winsor: alpha must be in [0, 0.5)");
  std::vector<double> sorted(train_returns.begin(), train_returns.end());
  std::sort(sorted.begin(), sorted.end());
  return {empirical_quantile(sorted, alpha), empirical_quantile(sorted, 1.0 - alpha)};
}

std::vector<std::string> feature_names(std::size_t lags) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < lags; ++j) names.push_back("ret_lag" + std::to_string(j));
  for (std::size_t j = 0; j < lags; ++j) names.push_back("vol_lag" + std::to_string(j));
  names.emplace_back("dlog_volume");
  names.emplace_back("intraday_range");
  return names;
}

FeatureMatrix build_features(const PriceSeries& series, const ReturnSeries& returns,
                             const VolSeries& vols, std::size_t lags, const WinsorBounds& bounds) {
  if (lags == 0) throw std::invalid_argument("build_features: need at least one lag");
  const std::size_t n = series.size();
  if (returns.values.size() != n || vols.values.size() != n) {
    throw std::invalid_argument("build_features: series lengths differ");
  }
  FeatureMatrix fm{feature_dim(lags), std::vector<double>(n * feature_dim(lags), 0.0),
                   std::vector<std::uint8_t>(n, 0)};

  // Volume is the only field that is forward-filled, and only from the past.
  std::vector<std::optional<double>> volume(n);
  std::optional<double> last_volume;
  for (std::size_t t = 0; t < n; ++t) {
    if (series.bars[t] && series.bars[t]->volume) last_volume = series.bars[t]->volume;
    if (series.bars[t]) volume[t] = last_volume;
  }

  for (std::size_t t = 0; t < n; ++t) {
    if (t + 1 < lags || t == 0 || !series.bars[t]) continue;
    auto row = fm.row(t);
    bool ok = true;
    for (std::size_t j = 0; j < lags && ok; ++j) {
      const auto& r = returns.values[t - j];
      const auto& s = vols.values[t - j];
      ok = r.has_value() && s.has_value();
      if (!ok) break;
      row[j] = winsorize(*r, bounds);
      row[lags + j] = *s;
    }
    if (!ok) continue;
    const auto& v_now = volume[t];
    const auto& v_prev = volume[t - 1];
    if (!v_now || !v_prev || *v_now <= 0 || *v_prev <= 0) continue;
    row[2 * lags] = std::log(*v_now) - std::log(*v_prev);
    const auto& bar = *series.bars[t];
    row[2 * lags + 1] = (bar.high - bar.low) / bar.close;
    fm.valid[t] = 1;
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (!fm.valid[t]) std::fill(fm.row(t).begin(), fm.row(t).end(), 0.0);
  }
  return fm;
}

void Standardizer::apply(std::span<double> row) const {
  if (row.size() != dim()) throw std::invalid_argument("Standardizer: row dimension mismatch");
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / (stddev[j] + epsilon);
}

std::vector<double> Standardizer::standardize(std::span<const double> row) const {
  std::vector<double> out(row.begin(), row.end());
  apply(out);
  return out;
}

void Standardizer::write(ByteWriter& w) const {
  w.u32(static_cast<std::uint32_t>(dim()));
  w.f64s(mean);
  w.f64s(stddev);
  w.f64(epsilon);
  w.f64(return_bounds.lower);
  w.f64(return_bounds.upper);
}

Standardizer Standardizer::read(ByteReader& r) {
  Standardizer s;
  auto d = r.u32();
  s.mean = r.f64s(d);
  s.stddev = r.f64s(d);
  s.epsilon = r.f64();
  s.return_bounds.lower = r.f64();
  s.return_bounds.upper = r.f64();
  return s;
}

Digest Standardizer::digest() const {
  ByteWriter w;
  w.raw("hqfs/standardizer/v1");
  write(w);
  return sha256(w.bytes());
}

Standardizer fit_standardizer(std::span<const double> rows, std::size_t dim, double epsilon) {
  if (dim == 0 || rows.size() % dim != 0) throw std::invalid_argument("fit_standardizer: bad row layout");
  if (!(epsilon > 0)) throw std::invalid_argument("fit_standardizer: epsilon must be > 0");
  const std::size_t n = rows.size() / dim;
  if (n < 2) throw DataError("fit_standardizer: need at least 2 training rows");
  // Welford's streaming update per column.
  std::vector<double> mean(dim, 0.0), m2(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double count = static_cast<double>(i + 1);
    for (std::size_t j = 0; j < dim; ++j) {
      const double x = rows[i * dim + j];
      const double delta = x - mean[j];
      mean[j] += delta / count;
      m2[j] += delta * (x - mean[j]);
    }
  }
  Standardizer s;
  s.mean = std::move(mean);
  s.stddev.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) s.stddev[j] = std::sqrt(std::max(0.0, m2[j] / static_cast<double>(n)));
  s.epsilon = epsilon;
  return s;
}

SampleSet::SampleSet(std::size_t lookback, std::size_t dim, std::vector<std::string> symbols,
                     std::vector<FeatureMatrix> features, std::vector<Sample> samples)
    : lookback_(lookback),
      dim_(dim),
      symbols_(std::move(symbols)),
      features_(std::move(features)),
      samples_(std::move(samples)) {
  if (symbols_.size() != features_.size()) throw std::invalid_argument("SampleSet: symbols/features size mismatch");
  for (const auto& f : features_) {
    if (f.dim != dim_) throw std::invalid_argument("SampleSet: feature dimension mismatch");
  }
}

bool SampleSet::has_window(std::size_t symbol, std::size_t day) const {
  if (symbol >= features_.size() || lookback_ == 0 || day + 1 < lookback_) return false;
  const auto& f = features_[symbol];
  if (day >= f.num_days()) return false;
  for (std::size_t t = day + 1 - lookback_; t <= day; ++t) {
    if (!f.valid[t]) return false;
  }
  return true;
}

FeatureWindow SampleSet::window(std::size_t symbol, std::size_t day) const {
  if (!has_window(symbol, day)) throw std::out_of_range("SampleSet: no complete window at requested day");
  const auto& f = features_[symbol];
  const std::size_t first = day + 1 - lookback_;
  return {std::span<const double>(f.values.data() + first * dim_, lookback_ * dim_), lookback_, dim_};
}

std::vector<Sample> SampleSet::subset(Split split) const {
  std::vector<Sample> out;
  std::copy_if(samples_.begin(), samples_.end(), std::back_inserter(out),
               [split](const Sample& s) { return s.split == split; });
  return out;
}

void SampleSet::write(ByteWriter& w) const {
  w.u64(lookback_);
  w.u64(dim_);
  w.u32(static_cast<std::uint32_t>(symbols_.size()));
  for (std::size_t s = 0; s < symbols_.size(); ++s) {
    w.str(symbols_[s]);
    const auto& f = features_[s];
    w.u64(f.num_days());
    w.raw(f.valid);
    w.f64s(f.values);
  }
  w.u64(samples_.size());
  for (const auto& s : samples_) {
    w.u32(s.symbol);
    w.u32(s.day);
    w.f64(s.target_return);
    w.f64(s.target_vol);
    w.f64(s.next_return_raw);
    w.u8(static_cast<std::uint8_t>(s.split));
  }
}

SampleSet SampleSet::read(ByteReader& r) {
  const auto lookback = r.u64();
  const auto dim = r.u64();
  std::vector<std::string> symbols(r.u32());
  std::vector<FeatureMatrix> features(symbols.size());
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    symbols[s] = r.str();
    auto days = r.u64();
    auto valid = r.raw(days);
    features[s].dim = dim;
    features[s].valid.assign(valid.begin(), valid.end());
    features[s].values = r.f64s(days * dim);
  }
  std::vector<Sample> samples(r.u64());
  for (auto& s : samples) {
    s.symbol = r.u32();
    s.day = r.u32();
    s.target_return = r.f64();
    s.target_vol = r.f64();
    s.next_return_raw = r.f64();
    auto split = r.u8();
    if (split > 2) throw DataError("sample set: bad split label");
    s.split = static_cast<Split>(split);
  }
  return SampleSet(lookback, dim, std::move(symbols), std::move(features), std::move(samples));
}

SampleSet build_sequences(std::vector<std::string> symbols, std::vector<FeatureMatrix> standardized,
                          const std::vector<TargetSeries>& targets, std::size_t lookback,
                          const SplitSpec& split) {
  if (lookback < 1) throw std::invalid_argument("build_sequences: lookback must be >= 1");
  if (targets.size() != standardized.size()) throw std::invalid_argument("build_sequences: targets/features mismatch");
  const std::size_t dim = standardized.empty() ? 0 : standardized.front().dim;
  std::vector<Sample> samples;
  for (std::size_t s = 0; s < standardized.size(); ++s) {
    const auto& f = standardized[s];
    const auto& y = targets[s];
    std::size_t run = 0;  // consecutive valid rows ending at t
    for (std::size_t t = 0; t + 1 < f.num_days(); ++t) {
      run = f.valid[t] ? run + 1 : 0;
      if (run < lookback) continue;
      const auto& r = y.clipped_returns[t + 1];
      const auto& v = y.vols[t + 1];
      const auto& raw = y.raw_returns[t + 1];
      if (!r || !v || !raw) continue;
      samples.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(t), *r, *v, *raw, split.label(t)});
    }
  }
  return SampleSet(lookback, dim, std::move(symbols), std::move(standardized), std::move(samples));
}

void PreprocessConfig::validate() const {
  if (vol_window < 2) throw std::invalid_argument("preprocess: vol_window must be >= 2");
  if (lookback < 1) throw std::invalid_argument("preprocess: lookback must be >= 1");
  if (lags < 1) throw std::invalid_argument("preprocess: lags must be >= 1");
  if (!(winsor_alpha >= 0 && winsor_alpha < 0.5)) throw std::invalid_argument("preprocess: winsor_alpha must be in [0, 0.5)");
  if (!(epsilon > 0)) throw std::invalid_argument("preprocess: epsilon must be > 0");
}

namespace {

struct SymbolData {
  std::string symbol;
  PriceSeries series;
  ReturnSeries returns;
  VolSeries vols;
};

std::vector<SymbolData> compute_symbol_data(const PriceTable& table, const PreprocessConfig& config) {
  std::vector<SymbolData> out;
  for (const auto& symbol : table.symbols()) {
    auto series = get_series(table, symbol);
    // Kept with no valid rows so symbol indices stay aligned with the table.
    ReturnSeries returns{symbol, MaskedSeries(series.size())};
    if (series.present() < 2) {
      spdlog::warn("{}: fewer than 2 prices, no samples", symbol);
    } else {
      returns = log_returns(series);
    }
    auto vols = rolling_volatility(returns, config.vol_window);
    out.push_back({symbol, std::move(series), std::move(returns), std::move(vols)});
  }
  return out;
}

struct TrainingStatistics {
  Standardizer standardizer;
  std::vector<FeatureMatrix> features;  // raw, unstandardized
};

TrainingStatistics fit_statistics(const std::vector<SymbolData>& data, const PreprocessConfig& config,
                                  std::size_t train_end) {
  std::vector<double> train_returns;
  for (const auto& d : data) {
    for (std::size_t t = 0; t < std::min(train_end, d.returns.values.size()); ++t) {
      if (d.returns.values[t]) train_returns.push_back(*d.returns.values[t]);
    }
  }
  const auto bounds = fit_winsor(train_returns, config.winsor_alpha);

  TrainingStatistics stats;
  std::vector<double> train_rows;
  const std::size_t dim = feature_dim(config.lags);
  for (const auto& d : data) {
    auto fm = build_features(d.series, d.returns, d.vols, config.lags, bounds);
    for (std::size_t t = 0; t < std::min(train_end, fm.num_days()); ++t) {
      if (fm.valid[t]) train_rows.insert(train_rows.end(), fm.row(t).begin(), fm.row(t).end());
    }
    stats.features.push_back(std::move(fm));
  }
  stats.standardizer = fit_standardizer(train_rows, dim, config.epsilon);
  stats.standardizer.return_bounds = bounds;
  return stats;
}

}  // namespace

Standardizer fit_training_statistics(const PriceTable& table, const PreprocessConfig& config,
                                     std::size_t train_end) {
  config.validate();
  return fit_statistics(compute_symbol_data(table, config), config, train_end).standardizer;
}

PreparedData prepare_samples(const PriceTable& table, const PreprocessConfig& config, const SplitSpec& split) {
  config.validate();
  if (split.num_days != table.num_days()) throw std::invalid_argument("prepare_samples: split does not match table length");
  auto data = compute_symbol_data(table, config);
  auto stats = fit_statistics(data, config, split.train_end);
  const auto& standardizer = stats.standardizer;

  std::vector<std::string> symbols;
  std::vector<TargetSeries> targets;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto& fm = stats.features[i];
    for (std::size_t t = 0; t < fm.num_days(); ++t) {
      if (fm.valid[t]) standardizer.apply(fm.row(t));
    }
    TargetSeries y;
    y.raw_returns = data[i].returns.values;
    y.vols = data[i].vols.values;
    y.clipped_returns = data[i].returns.values;
    for (auto& r : y.clipped_returns) {
      if (r) r = winsorize(*r, standardizer.return_bounds);
    }
    symbols.push_back(data[i].symbol);
    targets.push_back(std::move(y));
  }
  auto samples = build_sequences(std::move(symbols), std::move(stats.features), targets, config.lookback, split);
  return {split, standardizer, std::move(samples)};
}

std::vector<std::uint8_t> PreparedData::serialize(const Digest& stage_digest) const {
  ByteWriter w;
  w.raw(kSamplesMagic);
  w.u32(kSamplesVersion);
  w.digest(stage_digest);
  write_split(w, split);
  standardizer.write(w);
  samples.write(w);
  return std::move(w).bytes();
}

PreparedData PreparedData::deserialize(std::span<const std::uint8_t> bytes, Digest* stage_digest) {
  ByteReader r(bytes);
  r.expect_magic(kSamplesMagic);
  if (r.u32() != kSamplesVersion) throw DataError("sample file: unsupported version");
  auto digest = r.digest();
  if (stage_digest) *stage_digest = digest;
  PreparedData out;
  out.split = read_split(r);
  out.standardizer = Standardizer::read(r);
  out.samples = SampleSet::read(r);
  if (!r.done()) throw DataError("sample file: trailing bytes");
  return out;
}

}  // namespace hqfs
