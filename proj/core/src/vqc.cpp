#include "hqfs/vqc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hqfs {

void CircuitSpec::validate(std::size_t feature_dim) const {
  if (qubits < 1 || qubits > kMaxQubits) {
    throw std::invalid_argument("circuit: qubits must be in [1, " + std::to_string(kMaxQubits) + "]");
  }
  if (depth < 1) throw std::invalid_argument("circuit: depth must be >= 1");
  if (feature_map.size() != qubits) throw std::invalid_argument("circuit: feature_map needs one entry per qubit");
  for (auto f : feature_map) {
    if (f >= feature_dim) throw std::invalid_argument("circuit: feature_map index out of range");
  }
  if (!std::isfinite(encoding_scale)) throw std::invalid_argument("circuit: encoding_scale must be finite");
}

std::vector<std::size_t> default_feature_map(std::size_t qubits, std::size_t lags) {
  const std::size_t dim = feature_dim(lags);
  std::vector<std::size_t> priority{0, lags, 2 * lags + 1, 2 * lags};
  for (std::size_t j = 1; j < lags; ++j) {
    priority.push_back(j);
    priority.push_back(lags + j);
  }
  std::vector<std::size_t> map(qubits);
  for (std::size_t q = 0; q < qubits; ++q) map[q] = priority[q % dim];
  return map;
}

StateVector::StateVector(std::size_t qubits) : qubits_(qubits) {
  if (qubits < 1 || qubits > kMaxQubits) throw std::invalid_argument("StateVector: qubit count out of range");
  amps_.assign(std::size_t{1} << qubits, {0.0, 0.0});
  amps_[0] = 1.0;
}

void StateVector::apply_ry(std::size_t q, double angle) {
  const double c = std::cos(angle / 2);
  const double s = std::sin(angle / 2);
  const std::size_t bit = std::size_t{1} << q;
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    if (i & bit) continue;
    const auto a0 = amps_[i];
    const auto a1 = amps_[i | bit];
    amps_[i] = c * a0 - s * a1;
    amps_[i | bit] = s * a0 + c * a1;
  }
}

void StateVector::apply_rz(std::size_t q, double angle) {
  const std::complex<double> down = std::polar(1.0, -angle / 2);
  const std::complex<double> up = std::polar(1.0, angle / 2);
  const std::size_t bit = std::size_t{1} << q;
  for (std::size_t i = 0; i < amps_.size(); ++i) amps_[i] *= (i & bit) ? up : down;
}

void StateVector::apply_cz(std::size_t a, std::size_t b) {
  const std::size_t mask = (std::size_t{1} << a) | (std::size_t{1} << b);
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    if ((i & mask) == mask) amps_[i] = -amps_[i];
  }
}

double StateVector::norm_squared() const {
  double n = 0;
  for (const auto& a : amps_) n += std::norm(a);
  return n;
}

std::vector<double> encode_input(const FeatureWindow& window, const CircuitSpec& spec) {
  spec.validate(window.cols);
  if (window.rows == 0) throw std::invalid_argument("encode_input: empty window");
  std::vector<double> angles(spec.qubits);
  for (std::size_t q = 0; q < spec.qubits; ++q) {
    double sum = 0;
    for (std::size_t r = 0; r < window.rows; ++r) {
      const double x = window.at(r, spec.feature_map[q]);
      if (!std::isfinite(x)) throw std::invalid_argument("encode_input: non-finite input");
      sum += x;
    }
    const double pooled = sum / static_cast<double>(window.rows);
    angles[q] = std::clamp(spec.encoding_scale * pooled, -std::numbers::pi, std::numbers::pi);
  }
  return angles;
}

StateVector run_circuit(std::span<const double> angles, std::span<const double> theta, const CircuitSpec& spec) {
  if (angles.size() != spec.qubits || theta.size() != spec.parameter_count()) {
    throw std::invalid_argument("run_circuit: angle/parameter count does not match circuit");
  }
  const std::size_t n = spec.qubits;
  StateVector state(n);
  for (std::size_t layer = 0; layer < spec.depth; ++layer) {
    if (layer == 0) {
      for (std::size_t q = 0; q < n; ++q) state.apply_ry(q, angles[q]);
    }
    for (std::size_t q = 0; q < n; ++q) {
      state.apply_ry(q, theta[2 * (layer * n + q)]);
      state.apply_rz(q, theta[2 * (layer * n + q) + 1]);
    }
    if (n == 2) {
      state.apply_cz(0, 1);
    } else if (n > 2) {
      for (std::size_t q = 0; q < n; ++q) state.apply_cz(q, (q + 1) % n);
    }
  }
  return state;
}

double expect_z(const StateVector& state, std::size_t q) {
  if (q >= state.qubits()) throw std::out_of_range("expect_z: qubit index out of range");
  const std::size_t bit = std::size_t{1} << q;
  double z = 0;
  const auto amps = state.amplitudes();
  for (std::size_t i = 0; i < amps.size(); ++i) z += (i & bit) ? -std::norm(amps[i]) : std::norm(amps[i]);
  return z;
}

std::vector<double> embed_angles(std::span<const double> angles, std::span<const double> theta, const CircuitSpec& spec) {
  auto state = run_circuit(angles, theta, spec);
  std::vector<double> z(spec.qubits);
  for (std::size_t q = 0; q < spec.qubits; ++q) z[q] = expect_z(state, q);
  return z;
}

std::vector<double> vqc_embed(const FeatureWindow& window, std::span<const double> theta, const CircuitSpec& spec) {
  return embed_angles(encode_input(window, spec), theta, spec);
}

std::vector<double> param_shift_jacobian(std::span<const double> angles, std::span<const double> theta,
                                         const CircuitSpec& spec) {
  const std::size_t p = spec.parameter_count();
  const std::size_t n = spec.qubits;
  std::vector<double> jac(n * p);
  std::vector<double> shifted(theta.begin(), theta.end());
  constexpr double kShift = std::numbers::pi / 2;
  for (std::size_t i = 0; i < p; ++i) {
    shifted[i] = theta[i] + kShift;
    const auto plus = embed_angles(angles, shifted, spec);
    shifted[i] = theta[i] - kShift;
    const auto minus = embed_angles(angles, shifted, spec);
    shifted[i] = theta[i];
    for (std::size_t q = 0; q < n; ++q) jac[q * p + i] = 0.5 * (plus[q] - minus[q]);
  }
  return jac;
}

std::vector<double> param_shift_grad(std::span<const double> angles, std::span<const double> theta,
                                     const CircuitSpec& spec, std::span<const double> upstream) {
  if (upstream.size() != spec.qubits) throw std::invalid_argument("param_shift_grad: upstream size mismatch");
  const std::size_t p = spec.parameter_count();
  const auto jac = param_shift_jacobian(angles, theta, spec);
  std::vector<double> grad(p, 0.0);
  for (std::size_t q = 0; q < spec.qubits; ++q) {
    if (upstream[q] == 0.0) continue;
    for (std::size_t i = 0; i < p; ++i) grad[i] += upstream[q] * jac[q * p + i];
  }
  return grad;
}

TailGradient param_shift_grad(const FeatureWindow& window, std::span<const double> theta,
                              const CircuitSpec& spec, const LossTail& tail) {
  const auto angles = encode_input(window, spec);
  TailGradient out;
  out.z = embed_angles(angles, theta, spec);
  std::vector<double> dz(spec.qubits, 0.0);
  out.value = tail(out.z, dz);
  out.theta_grad = param_shift_grad(angles, theta, spec, dz);
  return out;
}

}  // namespace hqfs
