#include "hqfs/qubo.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "hqfs/error.hpp"
#include "hqfs/portfolio.hpp"

namespace hqfs {

QuboProblem::QuboProblem(Eigen::MatrixXd q, double offset, std::size_t assets, std::size_t bits, double penalty)
    : offset_(offset), assets_(assets), bits_(bits), penalty_(penalty) {
  if (q.rows() != q.cols()) throw std::invalid_argument("QuboProblem: matrix must be square");
  if (assets * bits != 0 && assets * bits != static_cast<std::size_t>(q.rows())) {
    throw std::invalid_argument("QuboProblem: dim must equal assets * bits");
  }
  q_ = 0.5 * (q + q.transpose());
}

std::vector<double> QuboProblem::bit_coefficients() const {
  std::vector<double> a;
  a.reserve(assets_ * bits_);
  for (std::size_t i = 0; i < assets_; ++i) {
    for (std::size_t b = 0; b < bits_; ++b) a.push_back(std::ldexp(1.0, -static_cast<int>(b)));
  }
  return a;
}

namespace {

Eigen::MatrixXd objective_matrix(const Moments& moments, double eta, std::size_t bits) {
  const auto m = static_cast<std::size_t>(moments.mu.size());
  const std::size_t dim = m * bits;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t b = 0; b < bits; ++b) {
      const double ab = std::ldexp(1.0, -static_cast<int>(b));
      const auto row = static_cast<Eigen::Index>(i * bits + b);
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t c = 0; c < bits; ++c) {
          const double ac = std::ldexp(1.0, -static_cast<int>(c));
          q(row, static_cast<Eigen::Index>(j * bits + c)) =
              ab * ac * moments.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
      }
      q(row, row) -= eta * moments.mu(static_cast<Eigen::Index>(i)) * ab;
    }
  }
  return q;
}

}  // namespace

double default_penalty(const Moments& moments, double eta, std::size_t bits) {
  const double largest = objective_matrix(moments, eta, bits).cwiseAbs().maxCoeff();
  return largest > 0 ? 10.0 * largest : 1.0;
}

QuboProblem encode_qubo(const Moments& moments, double eta, std::size_t bits, double penalty) {
  const auto m = static_cast<std::size_t>(moments.mu.size());
  if (bits < 1 || bits > 52) throw std::invalid_argument("encode_qubo: bits must be in [1, 52]");
  if (m == 0) throw std::invalid_argument("encode_qubo: empty universe");
  if (moments.sigma.rows() != static_cast<Eigen::Index>(m) || moments.sigma.cols() != static_cast<Eigen::Index>(m)) {
    throw std::invalid_argument("encode_qubo: covariance dimension does not match expected returns");
  }
  Eigen::MatrixXd q = objective_matrix(moments, eta, bits);
  const double rho = penalty > 0 ? penalty : default_penalty(moments, eta, bits);

  // rho (a^T x - 1)^2 = rho (sum_kl a_k a_l x_k x_l - 2 sum_k a_k x_k + 1), using x_k^2 = x_k.
  const std::size_t dim = m * bits;
  std::vector<double> a(dim);
  for (std::size_t k = 0; k < dim; ++k) a[k] = std::ldexp(1.0, -static_cast<int>(k % bits));
  for (std::size_t k = 0; k < dim; ++k) {
    for (std::size_t l = 0; l < dim; ++l) q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) += rho * a[k] * a[l];
    q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) -= 2.0 * rho * a[k];
  }
  return QuboProblem(std::move(q), rho, m, bits, rho);
}

double qubo_energy(const QuboProblem& problem, std::span<const std::uint8_t> x) {
  if (x.size() != problem.dim()) throw std::invalid_argument("qubo_energy: bitstring length does not match dim");
  const auto& q = problem.matrix();
  double e = problem.offset();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!x[i]) continue;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j]) e += q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return e;
}

double flip_delta(const QuboProblem& problem, std::span<const std::uint8_t> x, std::size_t k) {
  if (x.size() != problem.dim() || k >= x.size()) throw std::invalid_argument("flip_delta: index or length mismatch");
  const auto& q = problem.matrix();
  const auto kk = static_cast<Eigen::Index>(k);
  double field = 0;
  for (std::size_t l = 0; l < x.size(); ++l) {
    if (l != k && x[l]) field += q(kk, static_cast<Eigen::Index>(l));
  }
  const double sign = x[k] ? -1.0 : 1.0;
  return sign * (q(kk, kk) + 2.0 * field);
}

std::vector<double> raw_weights(std::span<const std::uint8_t> x, std::size_t assets, std::size_t bits) {
  if (x.size() != assets * bits) throw std::invalid_argument("decode: bitstring length must equal assets * bits");
  std::vector<double> v(assets, 0.0);
  for (std::size_t i = 0; i < assets; ++i) {
    for (std::size_t b = 0; b < bits; ++b) {
      if (x[i * bits + b]) v[i] += std::ldexp(1.0, -static_cast<int>(b));
    }
  }
  return v;
}

DecodedWeights decode_weights(std::span<const std::uint8_t> x, std::size_t assets, std::size_t bits) {
  if (assets == 0) throw std::invalid_argument("decode: no assets");
  auto v = raw_weights(x, assets, bits);
  double z = 0;
  for (double vi : v) z += vi;
  if (z == 0) return {std::vector<double>(assets, 1.0 / static_cast<double>(assets)), true};
  for (auto& vi : v) vi /= z;
  return {std::move(v), false};
}

void write_qubo(std::ostream& out, const QuboProblem& problem) {
  const auto& q = problem.matrix();
  std::ostringstream body;
  body.precision(17);
  std::size_t terms = 0;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = i; j < q.cols(); ++j) {
      const double c = i == j ? q(i, i) : 2.0 * q(i, j);
      if (c == 0.0) continue;
      body << i << ' ' << j << ' ' << c << '\n';
      ++terms;
    }
  }
  out.precision(17);
  out << "# hqfs-qubo v1\n"
      << "dim " << problem.dim() << '\n'
      << "assets " << problem.assets() << '\n'
      << "bits " << problem.bits() << '\n'
      << "penalty " << problem.penalty() << '\n'
      << "offset " << problem.offset() << '\n'
      << "terms " << terms << '\n'
      << body.str();
}

QuboProblem read_qubo(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# hqfs-qubo v1", 0) != 0) {
    throw DataError("QUBO file: missing '# hqfs-qubo v1' header");
  }
  std::size_t dim = 0, assets = 0, bits = 0, terms = 0;
  double penalty = 0, offset = 0;
  auto header = [&](const char* key, auto& value) {
    if (!std::getline(in, line)) throw DataError(std::string("QUBO file: missing '") + key + "'");
    std::istringstream ls(line);
    std::string k;
    if (!(ls >> k >> value) || k != key) throw DataError(std::string("QUBO file: expected '") + key + "' line");
  };
  header("dim", dim);
  header("assets", assets);
  header("bits", bits);
  header("penalty", penalty);
  header("offset", offset);
  header("terms", terms);
  if (dim == 0 || dim > 100000) throw DataError("QUBO file: implausible dim");
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t t = 0; t < terms; ++t) {
    if (!std::getline(in, line)) throw DataError("QUBO file: truncated term list");
    std::istringstream ls(line);
    std::size_t i = 0, j = 0;
    double c = 0;
    if (!(ls >> i >> j >> c) || i >= dim || j >= dim) throw DataError("QUBO file: bad term '" + line + "'");
    if (i == j) {
      q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += c;
    } else {
      q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += 0.5 * c;
      q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) += 0.5 * c;
    }
  }
  if (assets * bits != dim) assets = bits = 0;
  return QuboProblem(std::move(q), offset, assets, bits, penalty);
}

}  // namespace hqfs
