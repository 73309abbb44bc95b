// hqfs: command-line front end for the forecasting, allocation and audit pipeline.
//
// Exit codes: 0 ok, 1 internal error, 2 config/usage error, 3 data error,
// 4 solver or training failure, 5 audit failure.
// Log level: HQFS_LOG=trace|debug|info|warn|error|off (default info).

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <openssl/rand.h>

#include "hqfs/annealer.hpp"
#include "hqfs/audit.hpp"
#include "hqfs/bytes.hpp"
#include "hqfs/config.hpp"
#include "hqfs/error.hpp"
#include "hqfs/pipeline.hpp"
#include "hqfs/qubo.hpp"
#include "hqfs/synthetic.hpp"

namespace fs = std::filesystem;
using namespace hqfs;

namespace {

enum Exit : int { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kSolver = 4, kAudit = 5 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return kConfig;
    case ErrorKind::data: return kData;
    case ErrorKind::solver: return kSolver;
    case ErrorKind::audit: return kAudit;
  }
  return kInternal;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("hqfs");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("HQFS_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept it when asked for.
    if (level != spdlog::level::off || std::string(env) == "off") {
      spdlog::set_level(level);
    } else {
      spdlog::warn("HQFS_LOG='{}' is not a level name; using info", env);
    }
  }
}

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string schema;
};

RunConfig load_config(const Common& c) {
  RunConfig cfg = RunConfig::load(c.config);
  if (c.seed) cfg.set_seed(*c.seed);
  if (!c.schema.empty()) cfg.data.schema = c.schema;
  // A *.ckpt --out names the checkpoint copy, not the artifact directory.
  if (!c.out.empty() && fs::path(c.out).extension() != ".ckpt") cfg.output_dir = c.out;
  return cfg;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

int cmd_stage(const Common& c, const char* name, StageOutcome (*stage)(const RunConfig&, const fs::path&)) {
  const RunConfig cfg = load_config(c);
  const StageOutcome out = stage(cfg, cfg.output_dir);
  spdlog::info("{}: stage {} -> {}", name, to_hex(out.stage).substr(0, 16), cfg.output_dir.string());
  return kOk;
}

int cmd_train(const Common& c) {
  const RunConfig cfg = load_config(c);
  const StageOutcome out = run_train(cfg, cfg.output_dir);
  const fs::path ckpt = cfg.output_dir / artifact::checkpoint;
  if (fs::path(c.out).extension() == ".ckpt") {
    write_file_bytes(c.out, read_file_bytes(ckpt));
    spdlog::info("train: checkpoint copied to {}", c.out);
  }
  spdlog::info("train: stage {} -> {}", to_hex(out.stage).substr(0, 16), ckpt.string());
  return kOk;
}

int cmd_backtest(const Common& c) {
  const RunConfig cfg = load_config(c);
  const StageOutcome out = run_backtest(cfg, cfg.output_dir);
  std::cout << "strategy        AnnRet     AnnVol     Sharpe     MDD        TO\n";
  for (const char* s : {"hqfs", "equal_weight", "mv_pg"}) {
    const auto& m = out.report["strategies"][s];
    std::printf("%-14s %9.4f  %9.4f  %9.4f  %9.4f  %9.4f\n", s, m["ann_return"].get<double>(),
                m["ann_vol"].get<double>(), m["sharpe"].get<double>(), m["max_drawdown"].get<double>(),
                m["turnover"].get<double>());
  }
  const auto& da = out.report["forecast_test"]["directional_accuracy"];
  if (!da.is_null()) std::printf("test directional accuracy: %.4f\n", da.get<double>());
  return kOk;
}

int cmd_run(const Common& c, std::size_t seeds) {
  if (seeds < 1) throw ConfigError("--seeds must be >= 1");
  RunConfig base = load_config(c);
  const std::uint64_t first_seed = c.seed.value_or(base.train.seed);
  std::map<std::string, std::map<std::string, std::vector<double>>> values;  // strategy -> metric -> per seed
  std::vector<double> accuracy;
  for (std::size_t k = 0; k < seeds; ++k) {
    RunConfig cfg = base;
    cfg.set_seed(first_seed + k);
    const fs::path dir = base.output_dir / ("seed_" + std::to_string(first_seed + k));
    spdlog::info("seed {} ({}/{})", first_seed + k, k + 1, seeds);
    run_ingest(cfg, dir);
    run_preprocess(cfg, dir);
    run_train(cfg, dir);
    const auto report = run_backtest(cfg, dir).report;
    for (const auto& [strategy, metrics] : report["strategies"].items()) {
      for (const auto& [name, v] : metrics.items()) {
        if (v.is_number_float()) values[strategy][name].push_back(v.get<double>());
      }
    }
    const auto& da = report["forecast_test"]["directional_accuracy"];
    if (!da.is_null()) accuracy.push_back(da.get<double>());
  }
  auto summarize = [](const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return nlohmann::json{{"mean", mean}, {"std", sd}, {"values", v}};
  };
  nlohmann::json summary{{"seeds", seeds}, {"first_seed", first_seed}};
  for (const auto& [strategy, metrics] : values) {
    for (const auto& [name, v] : metrics) summary["strategies"][strategy][name] = summarize(v);
  }
  if (!accuracy.empty()) summary["directional_accuracy"] = summarize(accuracy);
  write_json(base.output_dir / "summary.json", summary);
  std::cout << "strategy        Sharpe (mean +- std over " << seeds << " seeds)\n";
  for (const auto& [strategy, metrics] : summary["strategies"].items()) {
    std::printf("%-14s %8.4f +- %.4f\n", strategy.c_str(), metrics["sharpe"]["mean"].get<double>(),
                metrics["sharpe"]["std"].get<double>());
  }
  return kOk;
}

int cmd_solve_qubo(const std::string& in, const std::string& solver, std::uint64_t seed, const std::string& out,
                   const std::string& config) {
  std::ifstream file(in);
  if (!file) throw DataError("cannot open QUBO file " + in);
  const QuboProblem problem = read_qubo(file);
  SolverConfig sc = config.empty() ? SolverConfig{} : RunConfig::load(config).solver;
  sc.seed = seed;
  const SolveResult result = default_solver_registry().solve_with(solver, problem, sc);
  nlohmann::json j = to_json(result, false);
  j["dim"] = problem.dim();
  j["seed"] = seed;
  if (problem.assets() > 0) {
    const auto decoded = decode_weights(result.x, problem.assets(), problem.bits());
    j["weights"] = decoded.weights;
    j["degenerate"] = decoded.degenerate;
  }
  spdlog::info("{} solved dim {} in {:.3f} s, energy {:.10g}", result.solver, problem.dim(), result.wall_seconds,
               result.energy);
  if (out.empty()) {
    print_json(j);
  } else {
    write_json(out, j);
  }
  return kOk;
}

int cmd_export_qubo(const Common& c, std::size_t index, const std::string& file) {
  const RunConfig cfg = load_config(c);
  const TrainedArtifacts up = load_trained(cfg, cfg.output_dir);
  const auto days = rebalance_days(up.data.split, cfg.portfolio.rebalance_every);
  if (index >= days.size()) {
    throw ConfigError("rebalance index " + std::to_string(index) + " out of range (" + std::to_string(days.size()) +
                      " rebalances)");
  }
  const auto problem = rebalance_problem(up.table, up.data, up.model, cfg.portfolio, days[index]);
  if (!problem) throw DataError("no eligible assets on that rebalance date");
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file);
  write_qubo(out, problem->qubo);
  spdlog::info("rebalance {} ({}): dim {} over {}", index, format_date(up.table.calendar()[days[index]]),
               problem->qubo.dim(), fmt::join(problem->tickers, ","));
  return kOk;
}

int cmd_verify_audit(const std::string& log, const std::string& pk_path, const std::string& checkpoints) {
  const PublicKey pk = PublicKey::deserialize(read_file_bytes(pk_path));
  std::optional<CheckpointStore> store;
  if (!checkpoints.empty()) store = load_checkpoints(checkpoints);
  const LogVerdict verdict = verify_log(fs::path(log), pk, store ? &*store : nullptr);
  std::cout << "record  date        signature  key  order  digest\n";
  for (const auto& r : verdict.records) {
    std::printf("%6zu  %s  %-9s  %-3s  %-5s  %s\n", r.index, format_date(static_cast<DayKey>(r.t / 86400)).c_str(),
                r.signature_ok ? "ok" : "FAIL", r.key_ok ? "ok" : "BAD", r.order_ok ? "ok" : "BAD",
                to_string(r.digest));
  }
  std::printf("%zu records, %zu failing\n", verdict.records.size(), verdict.failures());
  return verdict.ok() ? kOk : kAudit;
}

int cmd_keygen(const std::string& dir, std::optional<std::uint64_t> seed, std::uint32_t capacity) {
  Digest s{};
  if (seed) {
    s = seed_from_u64(*seed);
    spdlog::warn("deterministic key seed; use only for reproducible tests");
  } else if (RAND_bytes(s.data(), static_cast<int>(s.size())) != 1) {
    throw AuditError("system random generator failed");
  }
  const KeyPair kp = lamport_keygen(s, capacity);
  write_file_bytes(fs::path(dir) / "hqfs.sk", kp.sk.serialize());
  write_file_bytes(fs::path(dir) / "hqfs.pk", kp.pk.serialize());
  std::printf("key id %s, %u one-time keys\n", to_hex(kp.pk.id()).c_str(), kp.sk.capacity());
  return kOk;
}

int cmd_synth(const std::string& out, SyntheticConfig sc) {
  const PriceTable table = generate_market(sc);
  std::ofstream file(out);
  if (!file) throw DataError("cannot write " + out);
  write_ohlcv(file, table);
  spdlog::info("wrote {} symbols x {} days to {}", table.num_symbols(), table.num_days(), out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Hybrid quantum-inspired forecasting and QUBO allocation pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hqfs 0.1.0");

  Common common;
  auto add_common = [&](CLI::App* sub, bool seed) {
    sub->add_option("--config", common.config, "Run configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "Output directory (overrides output.dir); for train, a *.ckpt path also receives the checkpoint");
    if (seed) sub->add_option("--seed", common.seed, "Seed for training and the solver");
  };

  auto* ingest = app.add_subcommand("ingest", "Load the OHLCV CSV into table.bin");
  add_common(ingest, false);
  ingest->add_option("--schema", common.schema, "Column overrides, e.g. symbol=ticker,date=Date");
  auto* preprocess = app.add_subcommand("preprocess", "Build standardized feature windows");
  add_common(preprocess, false);
  auto* train = app.add_subcommand("train", "Train the VQC forecaster");
  add_common(train, true);
  auto* backtest = app.add_subcommand("backtest", "Walk-forward allocation, costs and audit");
  add_common(backtest, true);

  std::size_t seeds = 5;
  auto* run = app.add_subcommand("run", "ingest + preprocess + train + backtest over several seeds");
  add_common(run, true);
  run->add_option("--seeds", seeds, "Number of consecutive seeds")->capture_default_str();

  std::size_t export_index = 0;
  std::string export_file;
  auto* export_qubo = app.add_subcommand("export-qubo", "Write the QUBO posed at one rebalance date");
  add_common(export_qubo, true);
  export_qubo->add_option("--rebalance", export_index, "Rebalance index (0 = first test day)");
  export_qubo->add_option("--file", export_file, "Destination .qubo file")->required();

  std::string qubo_in, solver = "sa", solve_out, solve_config;
  std::uint64_t solve_seed = 0;
  auto* solve = app.add_subcommand("solve-qubo", "Solve a QUBO file");
  solve->add_option("--in", qubo_in, "QUBO text file")->required()->check(CLI::ExistingFile);
  solve->add_option("--solver", solver, "Registered solver name")->capture_default_str();
  solve->add_option("--seed", solve_seed, "Solver seed");
  solve->add_option("--out", solve_out, "Result file (default: stdout)");
  solve->add_option("--config", solve_config, "Take [solver] settings from a run config")->check(CLI::ExistingFile);

  std::string log_path, pk_path, ckpt_dir;
  auto* verify = app.add_subcommand("verify-audit", "Verify every record of an audit log");
  verify->add_option("--log", log_path, "Audit log")->required();
  verify->add_option("--pk", pk_path, "Public key file")->required();
  verify->add_option("--checkpoints", ckpt_dir, "Directory of .ckpt files to recompute digests");

  std::string key_dir = ".";
  std::optional<std::uint64_t> key_seed;
  std::uint32_t capacity = 256;
  auto* keygen = app.add_subcommand("keygen", "Generate a one-time signature key chain");
  keygen->add_option("--out", key_dir, "Directory for hqfs.sk and hqfs.pk")->capture_default_str();
  keygen->add_option("--seed", key_seed, "Deterministic seed (testing only)");
  keygen->add_option("--capacity", capacity, "Number of one-time keys")->capture_default_str();

  std::string synth_out;
  SyntheticConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "Write a synthetic market with a planted signal as CSV");
  synth->add_option("--out", synth_out, "CSV destination")->required();
  synth->add_option("--assets", synth_cfg.assets)->capture_default_str();
  synth->add_option("--days", synth_cfg.days)->capture_default_str();
  synth->add_option("--phi", synth_cfg.phi, "AR(1) coefficient")->capture_default_str();
  synth->add_option("--seed", synth_cfg.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*ingest) return cmd_stage(common, "ingest", run_ingest);
    if (*preprocess) return cmd_stage(common, "preprocess", run_preprocess);
    if (*train) return cmd_train(common);
    if (*backtest) return cmd_backtest(common);
    if (*run) return cmd_run(common, seeds);
    if (*export_qubo) return cmd_export_qubo(common, export_index, export_file);
    if (*solve) return cmd_solve_qubo(qubo_in, solver, solve_seed, solve_out, solve_config);
    if (*verify) return cmd_verify_audit(log_path, pk_path, ckpt_dir);
    if (*keygen) return cmd_keygen(key_dir, key_seed, capacity);
    if (*synth) return cmd_synth(synth_out, synth_cfg);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kInternal;
  }
  return kInternal;
}
