#include "hqfs/forecaster.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "hqfs/bytes.hpp"
#include "hqfs/error.hpp"

namespace hqfs {

namespace {

constexpr std::string_view kCheckpointMagic = "HQFSCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct HeadForward {
  std::vector<double> hidden;  // tanh activations
  double out_ret = 0;
  double out_vol_raw = 0;
};

HeadForward head_forward(const HeadParams& head, std::span<const double> z) {
  HeadForward f;
  f.hidden.resize(head.hidden);
  for (std::size_t h = 0; h < head.hidden; ++h) {
    double a = head.b1[h];
    for (std::size_t q = 0; q < head.inputs; ++q) a += head.w1[h * head.inputs + q] * z[q];
    f.hidden[h] = std::tanh(a);
  }
  f.out_ret = head.b2[0];
  f.out_vol_raw = head.b2[1];
  for (std::size_t h = 0; h < head.hidden; ++h) {
    f.out_ret += head.w2[h] * f.hidden[h];
    f.out_vol_raw += head.w2[head.hidden + h] * f.hidden[h];
  }
  return f;
}

double theta_penalty(const ForecastModel& model, const TrainConfig& config) {
  double sq = 0;
  for (double t : model.theta) sq += t * t;
  return config.lambda * sq;
}

std::vector<std::vector<double>> encode_all(const SampleSet& data, std::span<const Sample> samples,
                                            const CircuitSpec& circuit) {
  std::vector<std::vector<double>> angles;
  angles.reserve(samples.size());
  for (const auto& s : samples) angles.push_back(encode_input(data.window(s), circuit));
  return angles;
}

double loss_on_angles(const std::vector<std::vector<double>>& angles, std::span<const Sample> batch,
                      const ForecastModel& model, const TrainConfig& config) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  double ret_sq = 0;
  double vol_sq = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto z = embed_angles(angles[i], model.theta, model.circuit);
    const auto f = head_forward(model.head, z);
    const double er = f.out_ret - model.return_scale * batch[i].target_return;
    const double ev = softplus(f.out_vol_raw) - model.vol_scale * batch[i].target_vol;
    ret_sq += er * er;
    vol_sq += ev * ev;
  }
  const double n = static_cast<double>(batch.size());
  return ret_sq / n + config.beta * vol_sq / n + theta_penalty(model, config);
}

LossGradient gradient_on_angles(const std::vector<std::vector<double>>& angles, std::span<const Sample> batch,
                                const ForecastModel& model, const TrainConfig& config) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  const auto& head = model.head;
  const std::size_t Q = head.inputs;
  const std::size_t H = head.hidden;
  const double n = static_cast<double>(batch.size());

  LossGradient g;
  g.theta.assign(model.theta.size(), 0.0);
  g.head = HeadParams::zeros(Q, H);
  double ret_sq = 0;
  double vol_sq = 0;
  std::vector<double> dz(Q);
  std::vector<double> da(H);

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto z = embed_angles(angles[i], model.theta, model.circuit);
    const auto f = head_forward(head, z);
    const double er = f.out_ret - model.return_scale * batch[i].target_return;
    const double vol_hat = softplus(f.out_vol_raw);
    const double ev = vol_hat - model.vol_scale * batch[i].target_vol;
    ret_sq += er * er;
    vol_sq += ev * ev;

    const double d_ret = 2.0 * er / n;
    const double d_vol = 2.0 * config.beta * ev / n * sigmoid(f.out_vol_raw);
    g.head.b2[0] += d_ret;
    g.head.b2[1] += d_vol;
    for (std::size_t h = 0; h < H; ++h) {
      g.head.w2[h] += d_ret * f.hidden[h];
      g.head.w2[H + h] += d_vol * f.hidden[h];
      const double dh = d_ret * head.w2[h] + d_vol * head.w2[H + h];
      da[h] = dh * (1.0 - f.hidden[h] * f.hidden[h]);
      g.head.b1[h] += da[h];
    }
    std::fill(dz.begin(), dz.end(), 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t q = 0; q < Q; ++q) {
        g.head.w1[h * Q + q] += da[h] * z[q];
        dz[q] += da[h] * head.w1[h * Q + q];
      }
    }
    const auto gt = param_shift_grad(angles[i], model.theta, model.circuit, dz);
    for (std::size_t k = 0; k < gt.size(); ++k) g.theta[k] += gt[k];
  }
  for (std::size_t k = 0; k < g.theta.size(); ++k) g.theta[k] += 2.0 * config.lambda * model.theta[k];
  g.value = ret_sq / n + config.beta * vol_sq / n + theta_penalty(model, config);
  return g;
}

void sgd_step(ForecastModel& model, const LossGradient& g, double lr) {
  for (std::size_t k = 0; k < model.theta.size(); ++k) model.theta[k] -= lr * g.theta[k];
  auto step = [lr](std::vector<double>& p, const std::vector<double>& d) {
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * d[k];
  };
  step(model.head.w1, g.head.w1);
  step(model.head.b1, g.head.b1);
  step(model.head.w2, g.head.w2);
  step(model.head.b2, g.head.b2);
}

void write_circuit(ByteWriter& w, const CircuitSpec& c) {
  w.u64(c.qubits);
  w.u64(c.depth);
  w.u64(c.feature_map.size());
  for (auto f : c.feature_map) w.u64(f);
  w.f64(c.encoding_scale);
}

CircuitSpec read_circuit(ByteReader& r) {
  CircuitSpec c;
  c.qubits = r.u64();
  c.depth = r.u64();
  c.feature_map.resize(r.u64());
  if (c.feature_map.size() > kMaxQubits) throw DataError("checkpoint: feature map too long");
  for (auto& f : c.feature_map) f = r.u64();
  c.encoding_scale = r.f64();
  return c;
}

}  // namespace

double softplus(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }

void TrainConfig::validate() const {
  if (hidden < 1) throw std::invalid_argument("train: hidden width must be >= 1");
  if (!(beta >= 0)) throw std::invalid_argument("train: beta must be >= 0");
  if (!(lambda >= 0)) throw std::invalid_argument("train: lambda must be >= 0");
  if (!(learning_rate > 0)) throw std::invalid_argument("train: learning rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (!(return_scale > 0) || !(vol_scale > 0)) throw std::invalid_argument("train: target scales must be > 0");
}

Digest TrainConfig::digest(const CircuitSpec& circuit) const {
  ByteWriter w;
  w.raw("hqfs/train-config/v1");
  write_circuit(w, circuit);
  w.u64(hidden);
  w.f64(beta);
  w.f64(lambda);
  w.f64(learning_rate);
  w.u64(epochs);
  w.u64(batch_size);
  w.u64(seed);
  w.u64(patience);
  w.f64(return_scale);
  w.f64(vol_scale);
  w.i64(created_at);
  return sha256(w.bytes());
}

HeadParams HeadParams::zeros(std::size_t inputs, std::size_t hidden) {
  return {inputs, hidden, std::vector<double>(inputs * hidden, 0.0), std::vector<double>(hidden, 0.0),
          std::vector<double>(2 * hidden, 0.0), std::vector<double>(2, 0.0)};
}

Forecast ForecastModel::predict(const FeatureWindow& window, const Digest& standardizer) const {
  if (standardizer != standardizer_digest) {
    throw DataError("predict: input standardized with a different standardizer than the checkpoint");
  }
  return predict_unchecked(window);
}

Forecast ForecastModel::predict_unchecked(const FeatureWindow& window) const {
  if (window.rows != lookback || window.cols != feature_dim) {
    throw std::invalid_argument("predict: window shape does not match the checkpoint");
  }
  return predict_from_angles(encode_input(window, circuit));
}

Forecast ForecastModel::predict_from_angles(std::span<const double> angles) const {
  const auto z = embed_angles(angles, theta, circuit);
  const auto f = head_forward(head, z);
  return {f.out_ret / return_scale, softplus(f.out_vol_raw) / vol_scale};
}

std::vector<std::uint8_t> ForecastModel::serialize() const {
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  write_circuit(w, circuit);
  w.u64(lookback);
  w.u64(feature_dim);
  w.u64(theta.size());
  w.f64s(theta);
  w.u64(head.inputs);
  w.u64(head.hidden);
  w.f64s(head.w1);
  w.f64s(head.b1);
  w.f64s(head.w2);
  w.f64s(head.b2);
  w.f64(return_scale);
  w.f64(vol_scale);
  w.digest(standardizer_digest);
  w.digest(config_digest);
  w.i64(created_at);
  return std::move(w).bytes();
}

ForecastModel ForecastModel::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kCheckpointMagic);
  if (r.u32() != kCheckpointVersion) throw DataError("checkpoint: unsupported version");
  ForecastModel m;
  m.circuit = read_circuit(r);
  m.lookback = r.u64();
  m.feature_dim = r.u64();
  m.theta = r.f64s(r.u64());
  m.head.inputs = r.u64();
  m.head.hidden = r.u64();
  if (m.head.inputs > kMaxQubits || m.head.hidden > (1u << 16)) throw DataError("checkpoint: implausible head shape");
  m.head.w1 = r.f64s(m.head.inputs * m.head.hidden);
  m.head.b1 = r.f64s(m.head.hidden);
  m.head.w2 = r.f64s(2 * m.head.hidden);
  m.head.b2 = r.f64s(2);
  m.return_scale = r.f64();
  m.vol_scale = r.f64();
  m.standardizer_digest = r.digest();
  m.config_digest = r.digest();
  m.created_at = r.i64();
  if (!r.done()) throw DataError("checkpoint: trailing bytes");
  try {
    m.circuit.validate(m.feature_dim);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  if (m.theta.size() != m.circuit.parameter_count() || m.head.inputs != m.circuit.qubits) {
    throw DataError("checkpoint: parameter shapes inconsistent with circuit");
  }
  return m;
}

double loss(const SampleSet& data, std::span<const Sample> batch, const ForecastModel& model, const TrainConfig& config) {
  return loss_on_angles(encode_all(data, batch, model.circuit), batch, model, config);
}

LossGradient loss_gradient(const SampleSet& data, std::span<const Sample> batch, const ForecastModel& model,
                           const TrainConfig& config) {
  return gradient_on_angles(encode_all(data, batch, model.circuit), batch, model, config);
}

ForecastModel init_model(const CircuitSpec& circuit, const TrainConfig& config, std::size_t lookback,
                         std::size_t feature_dim, const Digest& standardizer) {
  circuit.validate(feature_dim);
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> theta_init(-0.1, 0.1);

  ForecastModel m;
  m.circuit = circuit;
  m.lookback = lookback;
  m.feature_dim = feature_dim;
  m.return_scale = config.return_scale;
  m.vol_scale = config.vol_scale;
  m.standardizer_digest = standardizer;
  m.config_digest = config.digest(circuit);
  m.created_at = config.created_at;
  m.theta.resize(circuit.parameter_count());
  for (auto& t : m.theta) t = theta_init(rng);

  const std::size_t Q = circuit.qubits;
  const std::size_t H = config.hidden;
  m.head = HeadParams::zeros(Q, H);
  std::uniform_real_distribution<double> w1_init(-std::sqrt(6.0 / static_cast<double>(Q + H)),
                                                 std::sqrt(6.0 / static_cast<double>(Q + H)));
  std::uniform_real_distribution<double> w2_init(-std::sqrt(6.0 / static_cast<double>(H + 2)),
                                                 std::sqrt(6.0 / static_cast<double>(H + 2)));
  for (auto& w : m.head.w1) w = w1_init(rng);
  for (auto& w : m.head.w2) w = w2_init(rng);
  return m;
}

TrainResult train(const SampleSet& data, const Digest& standardizer, const CircuitSpec& circuit,
                  const TrainConfig& config) {
  const auto train_set = data.subset(Split::train);
  const auto val_set = data.subset(Split::validation);
  if (train_set.empty()) throw DataError("train: training split has no samples");

  ForecastModel model = init_model(circuit, config, data.lookback(), data.dim(), standardizer);
  // Seeds the batch order independently of the parameter initialisation stream.
  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);

  const auto train_angles = encode_all(data, train_set, circuit);
  const auto val_angles = encode_all(data, val_set, circuit);
  auto evaluate_losses = [&](const ForecastModel& m) {
    EpochLog log;
    log.train_loss = loss_on_angles(train_angles, train_set, m, config);
    log.val_loss = val_set.empty() ? log.train_loss : loss_on_angles(val_angles, val_set, m, config);
    return log;
  };

  TrainResult result;
  result.initial = model;
  result.history.push_back(evaluate_losses(model));
  double best = result.history.back().val_loss;
  result.model = model;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Sample> batch;
  std::vector<std::vector<double>> batch_angles;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      batch_angles.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(train_set[order[k]]);
        batch_angles.push_back(train_angles[order[k]]);
      }
      const auto g = gradient_on_angles(batch_angles, batch, model, config);
      if (!std::isfinite(g.value)) {
        throw SolverError("train: loss diverged (non-finite) at epoch " + std::to_string(epoch) +
                          "; lower the learning rate");
      }
      sgd_step(model, g, config.learning_rate);
    }
    auto log = evaluate_losses(model);
    log.epoch = epoch;
    if (!std::isfinite(log.train_loss) || !std::isfinite(log.val_loss)) {
      throw SolverError("train: loss diverged (non-finite) after epoch " + std::to_string(epoch));
    }
    result.history.push_back(log);
    spdlog::debug("epoch {}: train {:.6g} val {:.6g}", epoch, log.train_loss, log.val_loss);
    if (log.val_loss < best) {
      best = log.val_loss;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience && config.patience > 0) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

std::optional<double> directional_accuracy(std::span<const PredictionPair> pairs, std::size_t* counted) {
  std::size_t hits = 0;
  std::size_t n = 0;
  for (const auto& p : pairs) {
    if (p.actual == 0.0 || p.predicted == 0.0) continue;
    ++n;
    if ((p.actual > 0) == (p.predicted > 0)) ++hits;
  }
  if (counted) *counted = n;
  if (n == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::optional<double> pearson(std::span<const PredictionPair> pairs) {
  if (pairs.size() < 2) return std::nullopt;
  double ma = 0, mp = 0;
  for (const auto& p : pairs) {
    ma += p.actual;
    mp += p.predicted;
  }
  ma /= static_cast<double>(pairs.size());
  mp /= static_cast<double>(pairs.size());
  double sab = 0, saa = 0, spp = 0;
  for (const auto& p : pairs) {
    sab += (p.actual - ma) * (p.predicted - mp);
    saa += (p.actual - ma) * (p.actual - ma);
    spp += (p.predicted - mp) * (p.predicted - mp);
  }
  if (saa <= 0 || spp <= 0) return std::nullopt;
  return sab / std::sqrt(saa * spp);
}

ForecastMetrics evaluate(const SampleSet& data, std::span<const Sample> samples, const ForecastModel& model) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty sample set");
  std::vector<PredictionPair> rets, vols;
  rets.reserve(samples.size());
  vols.reserve(samples.size());
  for (const auto& s : samples) {
    const auto f = model.predict_unchecked(data.window(s));
    rets.push_back({s.next_return_raw, f.ret});
    vols.push_back({s.target_vol, f.vol});
  }
  ForecastMetrics m;
  m.count = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double er = rets[i].predicted - rets[i].actual;
    const double ev = vols[i].predicted - vols[i].actual;
    m.mae_return += std::abs(er);
    m.mse_return += er * er;
    m.mae_vol += std::abs(ev);
    m.mse_vol += ev * ev;
  }
  const double n = static_cast<double>(samples.size());
  m.mae_return /= n;
  m.mse_return /= n;
  m.mae_vol /= n;
  m.mse_vol /= n;
  m.directional_accuracy = directional_accuracy(rets, &m.direction_count);
  m.vol_correlation = pearson(vols);
  return m;
}

}  // namespace hqfs
