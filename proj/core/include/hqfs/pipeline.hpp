#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hqfs/annealer.hpp"
#include "hqfs/audit.hpp"
#include "hqfs/config.hpp"
#include "hqfs/forecaster.hpp"
#include "hqfs/portfolio.hpp"
#include "hqfs/preprocess.hpp"
#include "hqfs/qubo.hpp"

namespace hqfs {

/// Rebalance days (0-based): the first test day, then every `rebalance_every`
/// days while a following day exists to earn a return.
std::vector<std::size_t> rebalance_days(const SplitSpec& split, std::size_t rebalance_every);

/// The optimization posed at one rebalance date.
struct RebalanceProblem {
  std::size_t day = 0;
  std::vector<std::size_t> assets;  // table symbol indices, best-ranked first
  std::vector<std::string> tickers;
  Moments moments;
  QuboProblem qubo;
};

/// Forecasts every asset with a complete window on `day`, selects the
/// universe and encodes the QUBO. std::nullopt when no asset is eligible.
std::optional<RebalanceProblem> rebalance_problem(const PriceTable& table, const PreparedData& data,
                                                  const ForecastModel& model, const PortfolioConfig& config,
                                                  std::size_t day);

struct RebalanceInfo {
  std::size_t day = 0;
  std::vector<std::string> tickers;
  std::vector<double> weights;  // HQFS allocation over `tickers`
  double energy = 0;
  bool degenerate = false;
  double solve_seconds = 0;     // kept out of reports
};

struct WalkForwardResult {
  BacktestReport hqfs;
  BacktestReport equal_weight;  // same universe each rebalance
  BacktestReport mv_pg;
  std::vector<RebalanceInfo> rebalances;
  std::size_t degenerate = 0;
};

/// Rebalance dates run from the first test day every `rebalance_every` days.
/// At each one: forecast every eligible asset, pick the universe, estimate
/// moments, encode and solve the QUBO, decode, and hand the decision to the
/// auditor (if any). The auditor only observes; results are identical with or without it.
WalkForwardResult walk_forward(const PriceTable& table, const PreparedData& data, const ForecastModel& model,
                               const RunConfig& config, Auditor* auditor = nullptr,
                               const SolverRegistry& registry = default_solver_registry());

/// Trailing log-returns (rows = days ending at `day`, cols = assets); NaN where missing.
Eigen::MatrixXd trailing_returns(const PriceTable& table, std::span<const std::size_t> assets, std::size_t day,
                                 std::size_t window);

nlohmann::json to_json(const TradingMetrics& m);
nlohmann::json to_json(const ForecastMetrics& m);
nlohmann::json to_json(const SolveResult& r, bool include_timing);
nlohmann::json backtest_report(const WalkForwardResult& result, const ForecastMetrics& test_metrics,
                               const Digest& stage, const Digest& checkpoint_sha256);
void write_equity_csv(std::ostream& out, const PriceTable& table, const WalkForwardResult& result);

/// File names inside an output directory.
namespace artifact {
inline constexpr const char* table = "table.bin";
inline constexpr const char* samples = "samples.bin";
inline constexpr const char* checkpoint = "model.ckpt";
inline constexpr const char* ingest_report = "ingest.json";
inline constexpr const char* preprocess_report = "preprocess.json";
inline constexpr const char* train_report = "train.json";
inline constexpr const char* backtest_report = "backtest.json";
inline constexpr const char* audit_report = "audit.json";
inline constexpr const char* equity = "equity.csv";
inline constexpr const char* audit_log = "audit.log";
}  // namespace artifact

/// Envelope for the table artifact: "HQFSART1" | str kind | stage digest | payload.
std::vector<std::uint8_t> wrap_artifact(std::string_view kind, const Digest& stage, std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> unwrap_artifact(std::span<const std::uint8_t> bytes, std::string_view kind, Digest* stage);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// Stage drivers used by the CLI. Each reads its upstream artifacts from
/// `dir`, checks that they were produced under the current config (throwing
/// ConfigError on a stage mismatch) and writes its own artifacts to `dir`.
struct StageOutcome {
  Digest stage{};
  nlohmann::json report;
};

StageOutcome run_ingest(const RunConfig& config, const std::filesystem::path& dir);
StageOutcome run_preprocess(const RunConfig& config, const std::filesystem::path& dir);
StageOutcome run_train(const RunConfig& config, const std::filesystem::path& dir);
StageOutcome run_backtest(const RunConfig& config, const std::filesystem::path& dir);

/// Everything downstream of training, after the stage-mismatch checks.
struct TrainedArtifacts {
  PriceTable table;
  PreparedData data;
  ForecastModel model;
  std::vector<std::uint8_t> checkpoint;
  Digest train_stage{};
};
TrainedArtifacts load_trained(const RunConfig& config, const std::filesystem::path& dir);

}  // namespace hqfs
