#include "hqfs/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "hqfs/bytes.hpp"
#include "hqfs/error.hpp"
#include "hqfs/qubo.hpp"

namespace hqfs {

namespace fs = std::filesystem;

Eigen::MatrixXd trailing_returns(const PriceTable& table, std::span<const std::size_t> assets, std::size_t day,
                                 std::size_t window) {
  const std::size_t rows = std::min(window, day);  // day 0 has no return
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(assets.size()));
  for (std::size_t k = 0; k < assets.size(); ++k) {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t d = day + 1 - rows + r;
      const auto& now = table.bar(assets[k], d);
      const auto& before = table.bar(assets[k], d - 1);
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          now && before ? std::log(now->close / before->close) : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t x = seed ^ (index * 0x9E3779B97F4A7C15ULL);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<std::size_t> rebalance_days(const SplitSpec& split, std::size_t rebalance_every) {
  if (rebalance_every < 1) throw ConfigError("portfolio.rebalance_every must be >= 1");
  std::vector<std::size_t> days;
  for (std::size_t day = split.val_end; day + 1 < split.num_days; day += rebalance_every) days.push_back(day);
  return days;
}

std::optional<RebalanceProblem> rebalance_problem(const PriceTable& table, const PreparedData& data,
                                                  const ForecastModel& model, const PortfolioConfig& config,
                                                  std::size_t day) {
  const auto& samples = data.samples;
  const Digest standardizer = data.standardizer.digest();
  std::vector<Candidate> candidates;
  std::vector<std::size_t> symbol_of;
  for (std::size_t s = 0; s < table.num_symbols(); ++s) {
    if (!table.bar(s, day) || !samples.has_window(s, day)) continue;
    const Forecast f = model.predict(samples.window(s, day), standardizer);
    candidates.push_back({table.symbols()[s], f.ret, f.vol, median_dollar_volume(table, s, day, config.liquidity_window)});
    symbol_of.push_back(s);
  }
  if (candidates.empty()) return std::nullopt;

  RebalanceProblem p;
  p.day = day;
  std::vector<double> mu, vol;
  for (auto k : select_universe(candidates, config.assets)) {
    p.assets.push_back(symbol_of[k]);
    p.tickers.push_back(candidates[k].ticker);
    mu.push_back(candidates[k].expected_return);
    vol.push_back(candidates[k].volatility);
  }
  p.moments = estimate_moments(p.tickers, mu, vol, trailing_returns(table, p.assets, day, config.corr_window),
                               {config.shrinkage, static_cast<double>(config.rebalance_every)});
  p.qubo = encode_qubo(p.moments, config.eta, config.bits, config.penalty);
  return p;
}

WalkForwardResult walk_forward(const PriceTable& table, const PreparedData& data, const ForecastModel& model,
                               const RunConfig& config, Auditor* auditor, const SolverRegistry& registry) {
  const auto& pc = config.portfolio;
  pc.validate();
  if (data.samples.symbols() != table.symbols()) {
    throw DataError("walk_forward: sample set and price table list different symbols");
  }
  if (data.split.num_days != table.num_days()) throw DataError("walk_forward: split does not match the price table");
  if (!registry.contains(config.solver_name)) {
    std::string list;
    for (const auto& n : registry.names()) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown solver '" + config.solver_name + "' (available: " + list + ")");
  }

  WalkForwardResult out;
  std::vector<Rebalance> hqfs_schedule, ew_schedule, pg_schedule;
  const auto days = rebalance_days(data.split, pc.rebalance_every);
  for (std::size_t index = 0; index < days.size(); ++index) {
    const std::size_t day = days[index];
    const std::string date = format_date(table.calendar()[day]);
    const auto problem = rebalance_problem(table, data, model, pc, day);
    if (!problem) {
      spdlog::warn("no eligible assets on {}; skipping rebalance", date);
      continue;
    }
    SolverConfig sc = config.solver;
    sc.seed = mix_seed(config.solver.seed, index);
    const SolveResult solved = registry.solve_with(config.solver_name, problem->qubo, sc);
    const DecodedWeights decoded = decode_weights(solved.x, problem->assets.size(), pc.bits);
    if (decoded.degenerate) {
      ++out.degenerate;
      spdlog::warn("all-zero solution on {}; using equal weight", date);
    }
    spdlog::debug("rebalance {} M={} energy={:.6g} solve={:.3f}s", date, problem->assets.size(), solved.energy,
                  solved.wall_seconds);

    hqfs_schedule.push_back({day, problem->assets, decoded.weights});
    ew_schedule.push_back({day, problem->assets, equal_weight(problem->assets.size())});
    pg_schedule.push_back({day, problem->assets, solve_mv_pg(problem->moments, pc.eta, pc.pg_steps).weights});
    out.rebalances.push_back({day, problem->tickers, decoded.weights, solved.energy, decoded.degenerate,
                              solved.wall_seconds});
    if (auditor) auditor->record(epoch_seconds(table.calendar()[day]), problem->tickers, decoded.weights);
  }
  if (hqfs_schedule.empty()) throw DataError("walk_forward: no rebalance date in the test period had eligible assets");

  const std::size_t last_day = table.num_days() - 1;
  const ReturnMatrix returns = simple_returns(table);
  out.hqfs = backtest(hqfs_schedule, returns, pc.cost_bps, last_day);
  out.equal_weight = backtest(ew_schedule, returns, pc.cost_bps, last_day);
  out.mv_pg = backtest(pg_schedule, returns, pc.cost_bps, last_day);
  return out;
}

nlohmann::json to_json(const TradingMetrics& m) {
  return {{"ann_return", m.ann_return},
          {"ann_vol", m.ann_vol},
          {"sharpe", m.sharpe},
          {"max_drawdown", m.max_drawdown},
          {"turnover", m.turnover}};
}

nlohmann::json to_json(const ForecastMetrics& m) {
  nlohmann::json j{{"count", m.count},        {"mae_return", m.mae_return}, {"mse_return", m.mse_return},
                   {"mae_vol", m.mae_vol},    {"mse_vol", m.mse_vol},       {"direction_count", m.direction_count},
                   {"directional_accuracy", nullptr}, {"vol_correlation", nullptr}};
  if (m.directional_accuracy) j["directional_accuracy"] = *m.directional_accuracy;
  if (m.vol_correlation) j["vol_correlation"] = *m.vol_correlation;
  return j;
}

nlohmann::json to_json(const SolveResult& r, bool include_timing) {
  std::string bits;
  for (auto b : r.x) bits += b ? '1' : '0';
  nlohmann::json j{{"solver", r.solver}, {"energy", r.energy}, {"x", bits}, {"restart_energies", r.restart_energies}};
  if (include_timing) j["wall_seconds"] = r.wall_seconds;
  return j;
}

namespace {

nlohmann::json strategy_json(const BacktestReport& r) {
  nlohmann::json j = to_json(r.metrics);
  j["cost_drag"] = r.cost_drag;
  j["final_equity"] = r.equity.back();
  j["missing_returns"] = r.missing_returns;
  return j;
}

}  // namespace

nlohmann::json backtest_report(const WalkForwardResult& result, const ForecastMetrics& test_metrics, const Digest& stage,
                               const Digest& checkpoint_sha256) {
  nlohmann::json allocations = nlohmann::json::array();
  for (const auto& r : result.rebalances) {
    allocations.push_back({{"day", r.day}, {"tickers", r.tickers}, {"weights", r.weights}, {"energy", r.energy},
                           {"degenerate", r.degenerate}});
  }
  return {{"stage_digest", to_hex(stage)},
          {"checkpoint_sha256", to_hex(checkpoint_sha256)},
          {"forecast_test", to_json(test_metrics)},
          {"rebalances", result.rebalances.size()},
          {"degenerate_solutions", result.degenerate},
          {"strategies",
           {{"hqfs", strategy_json(result.hqfs)},
            {"equal_weight", strategy_json(result.equal_weight)},
            {"mv_pg", strategy_json(result.mv_pg)}}},
          {"allocations", allocations}};
}

void write_equity_csv(std::ostream& out, const PriceTable& table, const WalkForwardResult& result) {
  out.precision(17);
  out << "date,hqfs,equal_weight,mv_pg\n";
  for (std::size_t i = 0; i < result.hqfs.days.size(); ++i) {
    out << format_date(table.calendar()[result.hqfs.days[i]]) << ',' << result.hqfs.equity[i] << ','
        << result.equal_weight.equity[i] << ',' << result.mv_pg.equity[i] << '\n';
  }
}

namespace {
constexpr std::string_view kArtifactMagic = "HQFSART1";
}

std::vector<std::uint8_t> wrap_artifact(std::string_view kind, const Digest& stage, std::span<const std::uint8_t> payload) {
  ByteWriter w;
  w.raw(kArtifactMagic);
  w.str(kind);
  w.digest(stage);
  w.raw(payload);
  return std::move(w).bytes();
}

std::vector<std::uint8_t> unwrap_artifact(std::span<const std::uint8_t> bytes, std::string_view kind, Digest* stage) {
  ByteReader r(bytes);
  r.expect_magic(kArtifactMagic);
  if (r.str() != kind) throw DataError("artifact is not a " + std::string(kind));
  const Digest d = r.digest();
  if (stage) *stage = d;
  const auto rest = r.raw(r.remaining());
  return {rest.begin(), rest.end()};
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  const std::string text = j.dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

nlohmann::json read_json(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

namespace {

std::vector<std::uint8_t> read_upstream(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) {
    throw DataError("missing upstream artifact " + path.string() + "; run '" + producer + "' first");
  }
  return read_file_bytes(path);
}

struct TableStage {
  PriceTable table;
  Digest stage{};
};

/// Loads table.bin and, when the CSV is still readable, confirms that it was
/// ingested from the same bytes under the same schema.
TableStage load_table_stage(const RunConfig& config, const fs::path& dir) {
  TableStage out;
  const auto payload = unwrap_artifact(read_upstream(dir / artifact::table, "ingest"), "table", &out.stage);
  out.table = PriceTable::deserialize(payload);
  std::error_code ec;
  if (!config.data.path.empty() && fs::exists(config.data.path, ec)) {
    const Digest expected = ingest_digest(config, sha256(read_file_bytes(config.data.path)));
    if (expected != out.stage) {
      throw ConfigError("stage mismatch: " + (dir / artifact::table).string() +
                        " was not ingested from the configured data; rerun 'ingest'");
    }
  }
  return out;
}

struct SampleStage {
  TableStage table;
  PreparedData data;
  Digest stage{};
};

SampleStage load_sample_stage(const RunConfig& config, const fs::path& dir) {
  SampleStage out{load_table_stage(config, dir), {}, {}};
  Digest stored{};
  out.data = PreparedData::deserialize(read_upstream(dir / artifact::samples, "preprocess"), &stored);
  out.stage = preprocess_digest(config, out.table.stage);
  if (stored != out.stage) {
    throw ConfigError("stage mismatch: " + (dir / artifact::samples).string() +
                      " was produced under different settings; rerun 'preprocess'");
  }
  return out;
}

std::size_t count_split(const SampleSet& s, Split split) {
  return static_cast<std::size_t>(
      std::count_if(s.samples().begin(), s.samples().end(), [&](const Sample& x) { return x.split == split; }));
}

}  // namespace

StageOutcome run_ingest(const RunConfig& config, const fs::path& dir) {
  if (config.data.path.empty()) throw ConfigError("data.path is not set");
  const auto bytes = read_upstream(config.data.path, "synth");
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  const LoadResult loaded = load_ohlcv(in, config.data.csv_schema());
  StageOutcome out;
  out.stage = ingest_digest(config, sha256(bytes));
  write_file_bytes(dir / artifact::table, wrap_artifact("table", out.stage, loaded.table.serialize()));
  const auto& r = loaded.report;
  out.report = {{"stage_digest", to_hex(out.stage)},
                {"rows_read", r.rows_read},
                {"rows_kept", r.rows_kept},
                {"rows_dropped", r.rows_dropped},
                {"duplicates", r.duplicates},
                {"missing_volume", r.missing_volume},
                {"symbols", loaded.table.symbols()},
                {"days", loaded.table.num_days()},
                {"first_day", r.first_day ? format_date(*r.first_day) : ""},
                {"last_day", r.last_day ? format_date(*r.last_day) : ""}};
  write_json(dir / artifact::ingest_report, out.report);
  return out;
}

StageOutcome run_preprocess(const RunConfig& config, const fs::path& dir) {
  const TableStage table = load_table_stage(config, dir);
  const SplitSpec split = config.split.resolve(table.table.num_days());
  const PreparedData data = prepare_samples(table.table, config.preprocess, split);
  StageOutcome out;
  out.stage = preprocess_digest(config, table.stage);
  write_file_bytes(dir / artifact::samples, data.serialize(out.stage));
  const auto& st = data.standardizer;
  out.report = {{"stage_digest", to_hex(out.stage)},
                {"upstream_digest", to_hex(table.stage)},
                {"train_end", split.train_end},
                {"val_end", split.val_end},
                {"num_days", split.num_days},
                {"samples",
                 {{"train", count_split(data.samples, Split::train)},
                  {"validation", count_split(data.samples, Split::validation)},
                  {"test", count_split(data.samples, Split::test)}}},
                {"features", feature_names(config.preprocess.lags)},
                {"feature_mean", st.mean},
                {"feature_std", st.stddev},
                {"winsor_lower", st.return_bounds.lower},
                {"winsor_upper", st.return_bounds.upper},
                {"standardizer_digest", to_hex(st.digest())}};
  write_json(dir / artifact::preprocess_report, out.report);
  return out;
}

StageOutcome run_train(const RunConfig& config, const fs::path& dir) {
  const SampleStage up = load_sample_stage(config, dir);
  const auto& samples = up.data.samples;
  const TrainResult result = train(samples, up.data.standardizer.digest(), config.circuit, config.train);
  const auto ckpt = result.model.serialize();
  write_file_bytes(dir / artifact::checkpoint, ckpt);

  StageOutcome out;
  out.stage = train_digest(config, up.stage);
  nlohmann::json history = nlohmann::json::array();
  for (const auto& e : result.history) {
    history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  }
  const auto val = samples.subset(Split::validation);
  out.report = {{"stage_digest", to_hex(out.stage)},
                {"upstream_digest", to_hex(up.stage)},
                {"checkpoint_sha256", to_hex(sha256(ckpt))},
                {"seed", config.train.seed},
                {"best_epoch", result.best_epoch},
                {"early_stopped", result.early_stopped},
                {"history", history},
                {"validation", to_json(evaluate(samples, val, result.model))}};
  write_json(dir / artifact::train_report, out.report);
  return out;
}

TrainedArtifacts load_trained(const RunConfig& config, const fs::path& dir) {
  SampleStage up = load_sample_stage(config, dir);
  TrainedArtifacts out;
  out.train_stage = train_digest(config, up.stage);
  out.checkpoint = read_upstream(dir / artifact::checkpoint, "train");
  const auto report = read_json(dir / artifact::train_report);
  if (report.value("stage_digest", "") != to_hex(out.train_stage) ||
      report.value("checkpoint_sha256", "") != to_hex(sha256(out.checkpoint))) {
    throw ConfigError("stage mismatch: " + (dir / artifact::checkpoint).string() +
                      " was trained under different settings; rerun 'train'");
  }
  out.model = ForecastModel::deserialize(out.checkpoint);
  out.table = std::move(up.table.table);
  out.data = std::move(up.data);
  return out;
}

StageOutcome run_backtest(const RunConfig& config, const fs::path& dir) {
  const TrainedArtifacts up = load_trained(config, dir);
  const auto& ckpt = up.checkpoint;
  const Digest ckpt_sha = sha256(ckpt);

  std::optional<LamportSigner> signer;
  std::optional<AuditLog> log;
  std::optional<Auditor> auditor;
  if (config.audit.enabled) {
    if (config.audit.secret_key.empty()) throw ConfigError("audit.enabled requires audit.secret_key");
    std::vector<std::uint8_t> sk_bytes;
    try {
      sk_bytes = read_file_bytes(config.audit.secret_key);
    } catch (const DataError& e) {
      throw AuditError(std::string("cannot read secret key: ") + e.what());
    }
    signer.emplace(SecretKey::deserialize(sk_bytes));
    fs::remove(dir / artifact::audit_log);
    log.emplace(dir / artifact::audit_log);
    const fs::path sk_path = config.audit.secret_key;
    LamportSigner* s = &*signer;
    auditor.emplace(*signer, *log, ckpt, [s, sk_path] {
      try {
        write_file_bytes(sk_path, s->secret_key().serialize());
      } catch (const DataError& e) {
        throw AuditError(std::string("cannot persist secret key state: ") + e.what());
      }
    });
  }

  const WalkForwardResult result =
      walk_forward(up.table, up.data, up.model, config, auditor ? &*auditor : nullptr);
  const auto test = up.data.samples.subset(Split::test);
  StageOutcome out;
  out.stage = backtest_digest(config, up.train_stage);
  out.report = backtest_report(result, evaluate(up.data.samples, test, up.model), out.stage, ckpt_sha);
  write_json(dir / artifact::backtest_report, out.report);
  {
    std::ostringstream csv;
    write_equity_csv(csv, up.table, result);
    const std::string text = csv.str();
    write_file_bytes(dir / artifact::equity, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
  if (auditor) {
    auto lat = auditor->latencies_ms();
    std::sort(lat.begin(), lat.end());
    const double median = lat.empty() ? 0.0 : lat[lat.size() / 2];
    write_json(dir / artifact::audit_report, {{"records", log->size()},
                                              {"key_id", to_hex(signer->key_id())},
                                              {"remaining_slots", signer->remaining()},
                                              {"median_latency_ms", median},
                                              {"max_latency_ms", lat.empty() ? 0.0 : lat.back()},
                                              {"record_bytes", auditor->last().serialize().size()}});
    spdlog::info("audit: {} records, median sign+append {:.3f} ms", log->size(), median);
  }
  return out;
}

}  // namespace hqfs
