#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hqfs/market_data.hpp"

namespace hqfs {

struct PortfolioConfig {
  std::size_t assets = 30;           // M
  std::size_t bits = 6;              // B
  double eta = 1.0;                  // return weight in the objective
  double penalty = 0;                // budget penalty; <= 0 selects the default
  std::size_t rebalance_every = 21;  // trading days; also the moment horizon
  double cost_bps = 10.0;
  std::size_t corr_window = 63;
  double shrinkage = 0.1;
  std::size_t liquidity_window = 63;
  std::size_t pg_steps = 500;

  void validate() const;
};

struct Moments {
  std::vector<std::string> universe;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

struct Candidate {
  std::string ticker;
  double expected_return = 0;  // r^
  double volatility = 0;       // sigma^
  double liquidity = 0;        // median dollar volume
};

/// Indices into `candidates` of the top-M by rank(liquidity) + rank(|r^| / max(sigma^, eps)),
/// best first. Ties in score go to the lexicographically smaller ticker.
/// M larger than the candidate count shrinks to the candidate count.
std::vector<std::size_t> select_universe(std::span<const Candidate> candidates, std::size_t m, double eps = 1e-12);

/// Median of close * volume over the `window` days ending at `day` (inclusive); 0 if no such day.
double median_dollar_volume(const PriceTable& table, std::size_t symbol, std::size_t day, std::size_t window = 63);

struct MomentConfig {
  double shrinkage = 0.1;      // R <- (1 - g) R + g I
  double horizon = 1.0;        // mu = h r^, sigma = sqrt(h) sigma^
};

/// `trailing` holds W rows (days) by M columns of past returns; NaN marks a
/// missing observation, which is replaced by the column mean.
Moments estimate_moments(std::vector<std::string> universe, std::span<const double> expected_returns,
                         std::span<const double> volatilities, const Eigen::MatrixXd& trailing,
                         const MomentConfig& config);

/// Sample correlation matrix, shrunk toward the identity. Constant columns are uncorrelated.
Eigen::MatrixXd shrunk_correlation(const Eigen::MatrixXd& trailing, double shrinkage);

double mv_objective(std::span<const double> w, const Moments& moments, double eta);

std::vector<double> equal_weight(std::size_t m);

/// Euclidean projection onto {w >= 0, sum w = 1}.
std::vector<double> project_simplex(std::span<const double> v);

bool on_simplex(std::span<const double> w, double tol = 1e-9);

struct MvPgResult {
  std::vector<double> weights;
  std::vector<double> objective_history;  // entry 0 is the equal-weight start
  std::size_t iterations = 0;
  bool converged = false;
};

/// Projected gradient from equal weight with step 1 / L, L = 2 * (Gershgorin bound on Sigma).
MvPgResult solve_mv_pg(const Moments& moments, double eta, std::size_t steps = 500, double tol = 1e-12);

/// Target weights over global asset indices, effective after the close of `day`.
struct Rebalance {
  std::size_t day = 0;
  std::vector<std::size_t> assets;
  std::vector<double> weights;

  friend bool operator==(const Rebalance&, const Rebalance&) = default;
};

struct TradingMetrics {
  double ann_return = 0;
  double ann_vol = 0;
  double sharpe = 0;
  double max_drawdown = 0;
  double turnover = 0;

  friend bool operator==(const TradingMetrics&, const TradingMetrics&) = default;
};

struct BacktestReport {
  std::vector<std::size_t> days;        // equity curve day indices
  std::vector<double> equity;           // net of costs; equity[0] is after the initial allocation
  std::vector<Rebalance> rebalances;
  std::vector<double> turnovers;        // per rebalance, including the initial allocation
  std::vector<double> costs;            // equity deducted at each rebalance
  TradingMetrics metrics;
  double cost_drag = 0;                 // sum of cost fractions of equity
  std::size_t missing_returns = 0;      // held positions without a return, marked flat

  friend bool operator==(const BacktestReport&, const BacktestReport&) = default;
};

/// days x assets simple returns; NaN where unavailable.
struct ReturnMatrix {
  std::size_t days = 0;
  std::size_t assets = 0;
  std::vector<double> values;
  double at(std::size_t day, std::size_t asset) const { return values[day * assets + asset]; }
};

/// Close-to-close simple returns, measured from the previous day the symbol traded.
ReturnMatrix simple_returns(const PriceTable& table);

/// Walks the equity curve from the first rebalance to `end_day` (inclusive).
/// Holdings drift between rebalances; each rebalance pays cost_bps * 1e-4 * L1 turnover.
BacktestReport backtest(const std::vector<Rebalance>& schedule, const ReturnMatrix& returns, double cost_bps,
                        std::size_t end_day);

/// `turnovers` are the per-rebalance values averaged into TO.
TradingMetrics trading_metrics(std::span<const double> equity, std::span<const double> turnovers);

double max_drawdown(std::span<const double> equity);

inline constexpr double kTradingDays = 252.0;

}  // namespace hqfs
