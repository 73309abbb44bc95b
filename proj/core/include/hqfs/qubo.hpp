#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace hqfs {

struct Moments;

using BitVector = std::vector<std::uint8_t>;

/// Pure QUBO: energy(x) = x^T Q x + offset over x in {0,1}^dim, with Q symmetric.
/// For portfolio problems dim = assets * bits and variable (i, b) sits at
/// index i * bits + b with raw weight coefficient 2^-b.
class QuboProblem {
 public:
  QuboProblem() = default;
  /// Symmetrizes `q` as (q + q^T) / 2.
  QuboProblem(Eigen::MatrixXd q, double offset, std::size_t assets = 0, std::size_t bits = 0, double penalty = 0);

  std::size_t dim() const { return static_cast<std::size_t>(q_.rows()); }
  std::size_t assets() const { return assets_; }
  std::size_t bits() const { return bits_; }
  double penalty() const { return penalty_; }
  double offset() const { return offset_; }
  const Eigen::MatrixXd& matrix() const { return q_; }
  /// a_(i,b) = 2^-b; empty for problems without an asset/bit layout.
  std::vector<double> bit_coefficients() const;

 private:
  Eigen::MatrixXd q_;
  double offset_ = 0;
  std::size_t assets_ = 0;
  std::size_t bits_ = 0;
  double penalty_ = 0;
};

/// Default budget penalty: 10 x the largest |entry| of the objective part of Q
/// (1.0 if that part is identically zero).
double default_penalty(const Moments& moments, double eta, std::size_t bits);

/// Builds Q for v^T Sigma v - eta mu^T v + penalty (sum v - 1)^2 where
/// v_i = sum_b 2^-b x_(i,b). A non-positive penalty selects default_penalty.
QuboProblem encode_qubo(const Moments& moments, double eta, std::size_t bits, double penalty = 0);

double qubo_energy(const QuboProblem& problem, std::span<const std::uint8_t> x);

/// Energy change from flipping bit k.
double flip_delta(const QuboProblem& problem, std::span<const std::uint8_t> x, std::size_t k);

struct DecodedWeights {
  std::vector<double> weights;
  bool degenerate = false;  // all-zero bitstring; equal weight was substituted
};

/// w_i = (sum_b 2^-b x_(i,b)) / Z with Z the sum over all assets.
DecodedWeights decode_weights(std::span<const std::uint8_t> x, std::size_t assets, std::size_t bits);

/// Raw (unnormalized) per-asset weights v.
std::vector<double> raw_weights(std::span<const std::uint8_t> x, std::size_t assets, std::size_t bits);

/// Sparse text format, see README ("QUBO file format").
void write_qubo(std::ostream& out, const QuboProblem& problem);
QuboProblem read_qubo(std::istream& in);

}  // namespace hqfs
