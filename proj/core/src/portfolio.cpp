#include "hqfs/portfolio.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hqfs/error.hpp"

namespace hqfs {

void PortfolioConfig::validate() const {
  if (assets < 1) throw ConfigError("portfolio.assets must be >= 1");
  if (bits < 1 || bits > 52) throw ConfigError("portfolio.bits must be in [1, 52]");
  if (!std::isfinite(eta) || !std::isfinite(penalty)) throw ConfigError("portfolio.eta and portfolio.penalty must be finite");
  if (rebalance_every < 1) throw ConfigError("portfolio.rebalance_every must be >= 1");
  if (!(cost_bps >= 0)) throw ConfigError("portfolio.cost_bps must be >= 0");
  if (corr_window < 2) throw ConfigError("portfolio.corr_window must be >= 2");
  if (!(shrinkage >= 0 && shrinkage <= 1)) throw ConfigError("portfolio.shrinkage must be in [0, 1]");
  if (liquidity_window < 1) throw ConfigError("portfolio.liquidity_window must be >= 1");
}

namespace {

/// 1-based average ranks, ascending.
std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::vector<std::size_t> select_universe(std::span<const Candidate> candidates, std::size_t m, double eps) {
  if (m == 0) throw std::invalid_argument("select_universe: M must be >= 1");
  if (candidates.empty()) throw std::invalid_argument("select_universe: no candidates");
  if (m > candidates.size()) {
    spdlog::warn("only {} candidates for a universe of {}; shrinking M", candidates.size(), m);
    m = candidates.size();
  }
  std::vector<double> liquidity, signal;
  for (const auto& c : candidates) {
    liquidity.push_back(c.liquidity);
    signal.push_back(std::abs(c.expected_return) / std::max(c.volatility, eps));
  }
  const auto rl = average_ranks(liquidity);
  const auto rs = average_ranks(signal);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = rl[a] + rs[a], sb = rl[b] + rs[b];
    if (sa != sb) return sa > sb;
    return candidates[a].ticker < candidates[b].ticker;
  });
  order.resize(m);
  return order;
}

double median_dollar_volume(const PriceTable& table, std::size_t symbol, std::size_t day, std::size_t window) {
  std::vector<double> dv;
  const std::size_t first = day + 1 >= window ? day + 1 - window : 0;
  for (std::size_t d = first; d <= day && d < table.num_days(); ++d) {
    const auto& bar = table.bar(symbol, d);
    if (bar && bar->volume) dv.push_back(bar->close * *bar->volume);
  }
  if (dv.empty()) return 0;
  const auto mid = dv.begin() + static_cast<std::ptrdiff_t>(dv.size() / 2);
  std::nth_element(dv.begin(), mid, dv.end());
  if (dv.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(dv.begin(), mid);
  return 0.5 * (lo + hi);
}

Eigen::MatrixXd shrunk_correlation(const Eigen::MatrixXd& trailing, double shrinkage) {
  if (!(shrinkage >= 0 && shrinkage <= 1)) throw std::invalid_argument("shrinkage must be in [0, 1]");
  const Eigen::Index m = trailing.cols();
  Eigen::MatrixXd filled = trailing;
  for (Eigen::Index j = 0; j < m; ++j) {
    double sum = 0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < filled.rows(); ++i) {
      if (std::isfinite(filled(i, j))) {
        sum += filled(i, j);
        ++count;
      }
    }
    const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
    for (Eigen::Index i = 0; i < filled.rows(); ++i) {
      if (!std::isfinite(filled(i, j))) filled(i, j) = mean;
    }
  }
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(m, m);
  if (filled.rows() >= 2) {
    const Eigen::MatrixXd centered = filled.rowwise() - filled.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered;
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = i + 1; j < m; ++j) {
        const double denom = std::sqrt(cov(i, i) * cov(j, j));
        const double c = denom > 0 ? std::clamp(cov(i, j) / denom, -1.0, 1.0) : 0.0;
        corr(i, j) = corr(j, i) = c;
      }
    }
  }
  return (1.0 - shrinkage) * corr + shrinkage * Eigen::MatrixXd::Identity(m, m);
}

Moments estimate_moments(std::vector<std::string> universe, std::span<const double> expected_returns,
                         std::span<const double> volatilities, const Eigen::MatrixXd& trailing,
                         const MomentConfig& config) {
  const std::size_t m = universe.size();
  if (expected_returns.size() != m || volatilities.size() != m || static_cast<std::size_t>(trailing.cols()) != m) {
    throw std::invalid_argument("estimate_moments: dimension mismatch");
  }
  if (!(config.horizon > 0)) throw std::invalid_argument("estimate_moments: horizon must be positive");
  const Eigen::MatrixXd r = shrunk_correlation(trailing, config.shrinkage);
  Moments out;
  out.universe = std::move(universe);
  out.mu.resize(static_cast<Eigen::Index>(m));
  Eigen::VectorXd d(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    out.mu(static_cast<Eigen::Index>(i)) = config.horizon * expected_returns[i];
    d(static_cast<Eigen::Index>(i)) = std::sqrt(config.horizon) * std::max(volatilities[i], 0.0);
  }
  out.sigma = d.asDiagonal() * r * d.asDiagonal();
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose());
  return out;
}

double mv_objective(std::span<const double> w, const Moments& moments, double eta) {
  if (static_cast<Eigen::Index>(w.size()) != moments.mu.size()) throw std::invalid_argument("mv_objective: size mismatch");
  const Eigen::Map<const Eigen::VectorXd> v(w.data(), static_cast<Eigen::Index>(w.size()));
  return v.dot(moments.sigma * v) - eta * moments.mu.dot(v);
}

std::vector<double> equal_weight(std::size_t m) {
  if (m == 0) throw std::invalid_argument("equal_weight: empty universe");
  return std::vector<double>(m, 1.0 / static_cast<double>(m));
}

std::vector<double> project_simplex(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("project_simplex: empty vector");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0, tau = 0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0) tau = t;
  }
  std::vector<double> w(v.size());
  double total = 0;
  for (std::size_t i = 0; i < v.size(); ++i) total += (w[i] = std::max(v[i] - tau, 0.0));
  for (auto& x : w) x /= total;  // absorb rounding so the sum is 1 to the last bit or two
  return w;
}

bool on_simplex(std::span<const double> w, double tol) {
  double sum = 0;
  for (double x : w) {
    if (!(x >= 0)) return false;
    sum += x;
  }
  return !w.empty() && std::abs(sum - 1.0) <= tol;
}

MvPgResult solve_mv_pg(const Moments& moments, double eta, std::size_t steps, double tol) {
  const auto m = static_cast<std::size_t>(moments.mu.size());
  MvPgResult out;
  out.weights = equal_weight(m);
  double bound = 0;
  for (Eigen::Index i = 0; i < moments.sigma.rows(); ++i) bound = std::max(bound, moments.sigma.row(i).cwiseAbs().sum());
  const double step = bound > 0 ? 1.0 / (2.0 * bound) : 1.0;

  double current = mv_objective(out.weights, moments, eta);
  out.objective_history.push_back(current);
  std::vector<double> trial(m);
  for (std::size_t it = 0; it < steps; ++it) {
    const Eigen::Map<const Eigen::VectorXd> w(out.weights.data(), static_cast<Eigen::Index>(m));
    const Eigen::VectorXd grad = 2.0 * (moments.sigma * w) - eta * moments.mu;
    for (std::size_t i = 0; i < m; ++i) trial[i] = out.weights[i] - step * grad(static_cast<Eigen::Index>(i));
    auto next = project_simplex(trial);
    const double value = mv_objective(next, moments, eta);
    double moved = 0;
    for (std::size_t i = 0; i < m; ++i) moved = std::max(moved, std::abs(next[i] - out.weights[i]));
    ++out.iterations;
    if (value > current) break;  // rounding-level ascent; keep the best feasible iterate
    out.weights = std::move(next);
    current = value;
    out.objective_history.push_back(current);
    if (moved <= tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

ReturnMatrix simple_returns(const PriceTable& table) {
  ReturnMatrix out;
  out.days = table.num_days();
  out.assets = table.num_symbols();
  out.values.assign(out.days * out.assets, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t s = 0; s < out.assets; ++s) {
    std::optional<double> last;
    for (std::size_t d = 0; d < out.days; ++d) {
      const auto& bar = table.bar(s, d);
      if (!bar) continue;
      if (last) out.values[d * out.assets + s] = bar->close / *last - 1.0;
      last = bar->close;
    }
  }
  return out;
}

double max_drawdown(std::span<const double> equity) {
  double peak = -std::numeric_limits<double>::infinity();
  double worst = 0;
  for (double e : equity) {
    peak = std::max(peak, e);
    if (peak > 0) worst = std::max(worst, (peak - e) / peak);
  }
  return std::clamp(worst, 0.0, 1.0);
}

TradingMetrics trading_metrics(std::span<const double> equity, std::span<const double> turnovers) {
  if (equity.size() < 2) throw std::invalid_argument("trading_metrics: need at least two equity points");
  TradingMetrics m;
  const auto n = static_cast<double>(equity.size() - 1);
  m.ann_return = std::pow(equity.back() / equity.front(), kTradingDays / n) - 1.0;
  std::vector<double> daily;
  for (std::size_t i = 1; i < equity.size(); ++i) daily.push_back(equity[i] / equity[i - 1] - 1.0);
  if (daily.size() >= 2) {
    const double mean = std::accumulate(daily.begin(), daily.end(), 0.0) / static_cast<double>(daily.size());
    double ss = 0;
    for (double r : daily) ss += (r - mean) * (r - mean);
    m.ann_vol = std::sqrt(kTradingDays * ss / static_cast<double>(daily.size() - 1));
  }
  m.sharpe = m.ann_vol > 0 ? m.ann_return / m.ann_vol : 0.0;
  m.max_drawdown = max_drawdown(equity);
  if (!turnovers.empty()) {
    m.turnover = std::accumulate(turnovers.begin(), turnovers.end(), 0.0) / static_cast<double>(turnovers.size());
  }
  return m;
}

BacktestReport backtest(const std::vector<Rebalance>& schedule, const ReturnMatrix& returns, double cost_bps,
                        std::size_t end_day) {
  if (schedule.empty()) throw std::invalid_argument("backtest: empty rebalance schedule");
  if (cost_bps < 0) throw std::invalid_argument("backtest: cost_bps must be >= 0");
  if (end_day >= returns.days) throw std::invalid_argument("backtest: end day beyond the return data");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& r = schedule[i];
    if (r.assets.size() != r.weights.size() || !on_simplex(r.weights)) {
      throw std::invalid_argument("backtest: rebalance weights must be on the simplex");
    }
    for (auto a : r.assets) {
      if (a >= returns.assets) throw std::invalid_argument("backtest: asset index out of range");
    }
    if (i > 0 && r.day <= schedule[i - 1].day) throw std::invalid_argument("backtest: rebalance days must increase");
  }
  if (schedule.back().day > end_day) throw std::invalid_argument("backtest: rebalance after the end day");

  BacktestReport rep;
  rep.rebalances = schedule;
  const double rate = cost_bps * 1e-4;
  std::vector<double> held(returns.assets, 0.0);  // current weights, pre-trade
  double equity = 1.0;
  std::size_t next = 0;

  auto trade = [&](const Rebalance& r) {
    std::vector<double> target(returns.assets, 0.0);
    for (std::size_t k = 0; k < r.assets.size(); ++k) target[r.assets[k]] += r.weights[k];
    double to = 0;
    for (std::size_t a = 0; a < returns.assets; ++a) to += std::abs(target[a] - held[a]);
    const double cost = rate * to * equity;
    equity -= cost;
    rep.turnovers.push_back(to);
    rep.costs.push_back(cost);
    rep.cost_drag += rate * to;
    held = std::move(target);
  };

  const std::size_t first = schedule.front().day;
  trade(schedule[next++]);
  rep.days.push_back(first);
  rep.equity.push_back(equity);
  for (std::size_t d = first + 1; d <= end_day; ++d) {
    double growth = 0;
    for (std::size_t a = 0; a < returns.assets; ++a) {
      if (held[a] == 0) continue;
      double r = returns.at(d, a);
      if (!std::isfinite(r)) {
        ++rep.missing_returns;
        r = 0;
      }
      held[a] *= 1.0 + r;
      growth += held[a];
    }
    equity *= growth;
    if (growth > 0) {
      for (auto& h : held) h /= growth;
    }
    if (next < schedule.size() && schedule[next].day == d) trade(schedule[next++]);
    rep.days.push_back(d);
    rep.equity.push_back(equity);
  }
  if (rep.missing_returns > 0) {
    spdlog::warn("backtest: {} held positions had no return and were marked at the last price", rep.missing_returns);
  }
  // The initial allocation from cash is charged but is not a rebalance.
  if (rep.equity.size() >= 2) rep.metrics = trading_metrics(rep.equity, std::span<const double>(rep.turnovers).subspan(1));
  return rep;
}

}  // namespace hqfs
