#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hqfs/preprocess.hpp"

namespace hqfs {

inline constexpr std::size_t kMaxQubits = 12;

/// Hardware-efficient ansatz: RY data encoding on the first layer, then per
/// layer an RY and an RZ rotation on every qubit followed by a ring of CZ.
///
/// Trainable angles are laid out as theta[2 * (layer * qubits + q) + 0] (RY)
/// and theta[2 * (layer * qubits + q) + 1] (RZ).
struct CircuitSpec {
  std::size_t qubits = 4;
  std::size_t depth = 2;
  std::vector<std::size_t> feature_map;  // input column feeding each qubit
  double encoding_scale = 1.0;           // radians per standardized unit, pre-clip

  std::size_t parameter_count() const { return 2 * qubits * depth; }
  void validate(std::size_t feature_dim) const;

  friend bool operator==(const CircuitSpec&, const CircuitSpec&) = default;
};

/// Most recent return, most recent volatility, then older lags and the
/// volume/range columns, cycled if there are more qubits than features.
std::vector<std::size_t> default_feature_map(std::size_t qubits, std::size_t lags);

/// Amplitudes of an n-qubit register; basis index bit q is qubit q.
class StateVector {
 public:
  explicit StateVector(std::size_t qubits);

  std::size_t qubits() const { return qubits_; }
  std::span<const std::complex<double>> amplitudes() const { return amps_; }

  void apply_ry(std::size_t q, double angle);
  void apply_rz(std::size_t q, double angle);
  void apply_cz(std::size_t a, std::size_t b);

  double norm_squared() const;

 private:
  std::size_t qubits_;
  std::vector<std::complex<double>> amps_;
};

/// Mean-pools each mapped column over the window and clips the scaled value to [-pi, pi].
std::vector<double> encode_input(const FeatureWindow& window, const CircuitSpec& spec);

StateVector run_circuit(std::span<const double> angles, std::span<const double> theta, const CircuitSpec& spec);

double expect_z(const StateVector& state, std::size_t q);

/// z_q = <Z_q> for q = 0..n-1 after running the circuit on encoded angles.
std::vector<double> embed_angles(std::span<const double> angles, std::span<const double> theta, const CircuitSpec& spec);
std::vector<double> vqc_embed(const FeatureWindow& window, std::span<const double> theta, const CircuitSpec& spec);

/// dz_q/dtheta_i via the +-pi/2 shift rule; row-major [q * P + i].
std::vector<double> param_shift_jacobian(std::span<const double> angles, std::span<const double> theta,
                                         const CircuitSpec& spec);

/// Chains the shift-rule Jacobian with an upstream gradient dL/dz.
std::vector<double> param_shift_grad(std::span<const double> angles, std::span<const double> theta,
                                     const CircuitSpec& spec, std::span<const double> upstream);

/// A differentiable map z -> scalar; writes dL/dz into `grad`.
using LossTail = std::function<double(std::span<const double> z, std::span<double> grad)>;

struct TailGradient {
  double value = 0;
  std::vector<double> z;
  std::vector<double> theta_grad;
};

TailGradient param_shift_grad(const FeatureWindow& window, std::span<const double> theta,
                              const CircuitSpec& spec, const LossTail& tail);

}  // namespace hqfs
