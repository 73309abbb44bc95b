#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hqfs/hash.hpp"
#include "hqfs/preprocess.hpp"
#include "hqfs/vqc.hpp"

namespace hqfs {

struct TrainConfig {
  std::size_t hidden = 8;
  double beta = 1.0;            // volatility-loss weight
  double lambda = 1e-4;         // L2 weight on theta
  double learning_rate = 0.01;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  std::size_t patience = 10;    // epochs without validation improvement
  double return_scale = 100.0;  // targets enter the loss multiplied by these
  double vol_scale = 100.0;
  std::int64_t created_at = 0;  // stamped into the checkpoint

  void validate() const;
  /// Digest of every field that shapes training, together with the circuit.
  Digest digest(const CircuitSpec& circuit) const;
};

/// One hidden tanh layer R^Q -> R^H -> R^2. Output 0 is the scaled return,
/// output 1 passes through softplus to give the scaled volatility.
struct HeadParams {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;  // hidden x inputs
  std::vector<double> b1;
  std::vector<double> w2;  // 2 x hidden
  std::vector<double> b2;

  static HeadParams zeros(std::size_t inputs, std::size_t hidden);
  std::size_t size() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

struct Forecast {
  double ret = 0;  // next-step log-return
  double vol = 0;  // next-step volatility proxy, >= 0
};

/// Trained forecaster state; serialize() is the canonical byte layout that
/// the audit layer hashes.
struct ForecastModel {
  CircuitSpec circuit;
  std::vector<double> theta;
  HeadParams head;
  std::size_t lookback = 0;
  std::size_t feature_dim = 0;
  double return_scale = 100.0;
  double vol_scale = 100.0;
  Digest standardizer_digest{};
  Digest config_digest{};
  std::int64_t created_at = 0;

  /// Throws DataError if the window was standardized with a different standardizer.
  Forecast predict(const FeatureWindow& window, const Digest& standardizer) const;
  Forecast predict_unchecked(const FeatureWindow& window) const;
  Forecast predict_from_angles(std::span<const double> angles) const;

  std::vector<std::uint8_t> serialize() const;
  static ForecastModel deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const ForecastModel&, const ForecastModel&) = default;
};

using ModelCheckpoint = ForecastModel;

double softplus(double x);

/// Mean squared return error + beta * mean squared volatility error + lambda * |theta|^2,
/// with targets in scaled units.
double loss(const SampleSet& data, std::span<const Sample> batch, const ForecastModel& model, const TrainConfig& config);

struct LossGradient {
  double value = 0;
  std::vector<double> theta;
  HeadParams head;
};

/// Exact gradient: shift rule for theta, backpropagation for the head.
LossGradient loss_gradient(const SampleSet& data, std::span<const Sample> batch, const ForecastModel& model,
                           const TrainConfig& config);

struct EpochLog {
  std::size_t epoch = 0;  // 0 is the initial model
  double train_loss = 0;
  double val_loss = 0;
};

struct TrainResult {
  ForecastModel model;  // best validation loss
  ForecastModel initial;
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

ForecastModel init_model(const CircuitSpec& circuit, const TrainConfig& config, std::size_t lookback,
                         std::size_t feature_dim, const Digest& standardizer);

/// Plain mini-batch SGD; reproducible for a fixed seed.
TrainResult train(const SampleSet& data, const Digest& standardizer, const CircuitSpec& circuit,
                  const TrainConfig& config);

struct ForecastMetrics {
  std::size_t count = 0;
  double mae_return = 0;
  double mse_return = 0;
  std::optional<double> directional_accuracy;  // over samples where both signs are non-zero
  std::size_t direction_count = 0;
  double mae_vol = 0;
  double mse_vol = 0;
  std::optional<double> vol_correlation;  // Pearson; undefined for constant series
};

/// Metrics in natural units against the raw next-step return and sigma_{t+1}.
ForecastMetrics evaluate(const SampleSet& data, std::span<const Sample> samples, const ForecastModel& model);

struct PredictionPair {
  double actual = 0;
  double predicted = 0;
};

std::optional<double> directional_accuracy(std::span<const PredictionPair> pairs, std::size_t* counted = nullptr);
std::optional<double> pearson(std::span<const PredictionPair> pairs);

}  // namespace hqfs
