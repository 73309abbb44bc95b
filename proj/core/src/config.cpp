#include "hqfs/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hqfs/bytes.hpp"
#include "hqfs/error.hpp"

namespace hqfs {

CsvSchema DataConfig::csv_schema() const {
  CsvSchema s = CsvSchema::with_overrides(schema);
  if (schema.find("date_format") == std::string::npos) s.date_format = date_format;
  return s;
}

SplitSpec SplitConfig::resolve(std::size_t num_days) const {
  std::size_t tr = train_end, va = val_end;
  if (tr == 0) tr = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(num_days)));
  if (va == 0) va = tr + static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(num_days)));
  try {
    return chrono_split(num_days, tr, va);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("split: ") + e.what());
  }
}

namespace {

using Setter = std::function<void(RunConfig&, const std::string&, const std::filesystem::path&)>;

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": cannot parse '" + text + "' as a number");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ConfigError(key + ": value must be finite");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::filesystem::path resolve_path(const std::string& text, const std::filesystem::path& base) {
  std::filesystem::path p(text);
  return p.is_relative() && !base.empty() ? (base / p).lexically_normal() : p;
}

template <typename T>
Setter number(T RunConfig::*section, auto field) {
  return [=](RunConfig& c, const std::string& v, const std::filesystem::path&) {
    using F = std::remove_reference_t<decltype((c.*section).*field)>;
    (c.*section).*field = parse_number<F>("", v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    using P = std::filesystem::path;
    t["data.path"] = [](RunConfig& c, const std::string& v, const P& base) { c.data.path = resolve_path(v, base); };
    t["data.schema"] = [](RunConfig& c, const std::string& v, const P&) { c.data.schema = v; };
    t["data.date_format"] = [](RunConfig& c, const std::string& v, const P&) { c.data.date_format = v; };

    t["preprocess.vol_window"] = number(&RunConfig::preprocess, &PreprocessConfig::vol_window);
    t["preprocess.lookback"] = number(&RunConfig::preprocess, &PreprocessConfig::lookback);
    t["preprocess.lags"] = number(&RunConfig::preprocess, &PreprocessConfig::lags);
    t["preprocess.winsor_alpha"] = number(&RunConfig::preprocess, &PreprocessConfig::winsor_alpha);
    t["preprocess.epsilon"] = number(&RunConfig::preprocess, &PreprocessConfig::epsilon);

    t["split.train_end"] = number(&RunConfig::split, &SplitConfig::train_end);
    t["split.val_end"] = number(&RunConfig::split, &SplitConfig::val_end);
    t["split.train_fraction"] = number(&RunConfig::split, &SplitConfig::train_fraction);
    t["split.val_fraction"] = number(&RunConfig::split, &SplitConfig::val_fraction);

    t["circuit.qubits"] = number(&RunConfig::circuit, &CircuitSpec::qubits);
    t["circuit.depth"] = number(&RunConfig::circuit, &CircuitSpec::depth);
    t["circuit.encoding_scale"] = number(&RunConfig::circuit, &CircuitSpec::encoding_scale);
    t["circuit.feature_map"] = [](RunConfig& c, const std::string& v, const P&) {
      c.circuit.feature_map.clear();
      if (v == "auto") return;
      std::stringstream ss(v);
      for (std::string item; std::getline(ss, item, ',');) {
        c.circuit.feature_map.push_back(parse_number<std::size_t>("circuit.feature_map", trim(item)));
      }
    };

    t["train.hidden"] = number(&RunConfig::train, &TrainConfig::hidden);
    t["train.beta"] = number(&RunConfig::train, &TrainConfig::beta);
    t["train.lambda"] = number(&RunConfig::train, &TrainConfig::lambda);
    t["train.learning_rate"] = number(&RunConfig::train, &TrainConfig::learning_rate);
    t["train.epochs"] = number(&RunConfig::train, &TrainConfig::epochs);
    t["train.batch_size"] = number(&RunConfig::train, &TrainConfig::batch_size);
    t["train.seed"] = number(&RunConfig::train, &TrainConfig::seed);
    t["train.patience"] = number(&RunConfig::train, &TrainConfig::patience);
    t["train.return_scale"] = number(&RunConfig::train, &TrainConfig::return_scale);
    t["train.vol_scale"] = number(&RunConfig::train, &TrainConfig::vol_scale);

    t["portfolio.assets"] = number(&RunConfig::portfolio, &PortfolioConfig::assets);
    t["portfolio.bits"] = number(&RunConfig::portfolio, &PortfolioConfig::bits);
    t["portfolio.eta"] = number(&RunConfig::portfolio, &PortfolioConfig::eta);
    t["portfolio.penalty"] = number(&RunConfig::portfolio, &PortfolioConfig::penalty);
    t["portfolio.rebalance_every"] = number(&RunConfig::portfolio, &PortfolioConfig::rebalance_every);
    t["portfolio.cost_bps"] = number(&RunConfig::portfolio, &PortfolioConfig::cost_bps);
    t["portfolio.corr_window"] = number(&RunConfig::portfolio, &PortfolioConfig::corr_window);
    t["portfolio.shrinkage"] = number(&RunConfig::portfolio, &PortfolioConfig::shrinkage);
    t["portfolio.liquidity_window"] = number(&RunConfig::portfolio, &PortfolioConfig::liquidity_window);
    t["portfolio.pg_steps"] = number(&RunConfig::portfolio, &PortfolioConfig::pg_steps);

    t["solver.name"] = [](RunConfig& c, const std::string& v, const P&) { c.solver_name = v; };
    t["solver.restarts"] = number(&RunConfig::solver, &SolverConfig::restarts);
    t["solver.sweeps"] = number(&RunConfig::solver, &SolverConfig::sweeps);
    t["solver.t_start"] = number(&RunConfig::solver, &SolverConfig::t_start);
    t["solver.t_end_ratio"] = number(&RunConfig::solver, &SolverConfig::t_end_ratio);
    t["solver.seed"] = number(&RunConfig::solver, &SolverConfig::seed);

    t["audit.enabled"] = [](RunConfig& c, const std::string& v, const P&) { c.audit.enabled = parse_bool("audit.enabled", v); };
    t["audit.secret_key"] = [](RunConfig& c, const std::string& v, const P& base) { c.audit.secret_key = resolve_path(v, base); };
    t["audit.public_key"] = [](RunConfig& c, const std::string& v, const P& base) { c.audit.public_key = resolve_path(v, base); };
    t["audit.key_capacity"] = number(&RunConfig::audit, &AuditConfig::key_capacity);

    t["output.dir"] = [](RunConfig& c, const std::string& v, const P& base) { c.output_dir = resolve_path(v, base); };
    t["run.created_at"] = [](RunConfig& c, const std::string& v, const P&) {
      c.train.created_at = parse_number<std::int64_t>("run.created_at", v);
    };
    return t;
  }();
  return table;
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config syntax error at line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' must sit inside a [section]");
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      const auto it = setters().find(name);
      if (it == setters().end()) throw ConfigError("unknown config key '" + name + "'");
      try {
        it->second(c, trim(value.data()), base_dir);
      } catch (const ConfigError& e) {
        const std::string msg = e.what();
        throw ConfigError(msg.rfind(name, 0) == 0 ? msg : name + msg);
      }
    }
  }
  c.finalize();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path());
}

void RunConfig::finalize() {
  if (circuit.feature_map.empty()) circuit.feature_map = default_feature_map(circuit.qubits, preprocess.lags);
  validate();
}

void RunConfig::validate() const {
  try {
    preprocess.validate();
    circuit.validate(feature_dim(preprocess.lags));
    train.validate();
    portfolio.validate();
    solver.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(split.train_fraction > 0 && split.val_fraction > 0 && split.train_fraction + split.val_fraction < 1)) {
    throw ConfigError("split fractions must be positive and sum to less than 1");
  }
  if (split.train_end != 0 && split.val_end != 0 && split.val_end <= split.train_end) {
    throw ConfigError("split.val_end must exceed split.train_end");
  }
  if (solver_name.empty()) throw ConfigError("solver.name must not be empty");
  if (audit.key_capacity < 1) throw ConfigError("audit.key_capacity must be >= 1");
}

void RunConfig::set_seed(std::uint64_t seed) {
  train.seed = seed;
  solver.seed = seed;
}

std::string RunConfig::canonical() const {
  std::ostringstream out;
  out.precision(17);
  auto line = [&](const char* key, const auto& value) { out << key << " = " << value << '\n'; };
  line("data.path", data.path.string());
  line("data.schema", data.schema);
  line("data.date_format", data.date_format);
  line("preprocess.vol_window", preprocess.vol_window);
  line("preprocess.lookback", preprocess.lookback);
  line("preprocess.lags", preprocess.lags);
  line("preprocess.winsor_alpha", preprocess.winsor_alpha);
  line("preprocess.epsilon", preprocess.epsilon);
  line("split.train_end", split.train_end);
  line("split.val_end", split.val_end);
  line("split.train_fraction", split.train_fraction);
  line("split.val_fraction", split.val_fraction);
  line("circuit.qubits", circuit.qubits);
  line("circuit.depth", circuit.depth);
  line("circuit.encoding_scale", circuit.encoding_scale);
  std::string map;
  for (auto f : circuit.feature_map) map += (map.empty() ? "" : ",") + std::to_string(f);
  line("circuit.feature_map", map);
  line("train.hidden", train.hidden);
  line("train.beta", train.beta);
  line("train.lambda", train.lambda);
  line("train.learning_rate", train.learning_rate);
  line("train.epochs", train.epochs);
  line("train.batch_size", train.batch_size);
  line("train.seed", train.seed);
  line("train.patience", train.patience);
  line("train.return_scale", train.return_scale);
  line("train.vol_scale", train.vol_scale);
  line("portfolio.assets", portfolio.assets);
  line("portfolio.bits", portfolio.bits);
  line("portfolio.eta", portfolio.eta);
  line("portfolio.penalty", portfolio.penalty);
  line("portfolio.rebalance_every", portfolio.rebalance_every);
  line("portfolio.cost_bps", portfolio.cost_bps);
  line("portfolio.corr_window", portfolio.corr_window);
  line("portfolio.shrinkage", portfolio.shrinkage);
  line("portfolio.liquidity_window", portfolio.liquidity_window);
  line("portfolio.pg_steps", portfolio.pg_steps);
  line("solver.name", solver_name);
  line("solver.restarts", solver.restarts);
  line("solver.sweeps", solver.sweeps);
  line("solver.t_start", solver.t_start);
  line("solver.t_end_ratio", solver.t_end_ratio);
  line("solver.seed", solver.seed);
  line("audit.enabled", audit.enabled ? "true" : "false");
  line("audit.secret_key", audit.secret_key.string());
  line("audit.public_key", audit.public_key.string());
  line("audit.key_capacity", audit.key_capacity);
  line("output.dir", output_dir.string());
  line("run.created_at", train.created_at);
  return out.str();
}

Digest ingest_digest(const RunConfig& config, const Digest& csv_sha256) {
  ByteWriter w;
  w.raw(std::string_view("hqfs/stage/ingest/v1"));
  w.str(config.data.csv_schema().canonical());
  w.digest(csv_sha256);
  return sha256(w.bytes());
}

Digest preprocess_digest(const RunConfig& config, const Digest& ingest) {
  const auto& p = config.preprocess;
  ByteWriter w;
  w.raw(std::string_view("hqfs/stage/preprocess/v1"));
  w.digest(ingest);
  w.u64(p.vol_window);
  w.u64(p.lookback);
  w.u64(p.lags);
  w.f64(p.winsor_alpha);
  w.f64(p.epsilon);
  w.u64(config.split.train_end);
  w.u64(config.split.val_end);
  w.f64(config.split.train_fraction);
  w.f64(config.split.val_fraction);
  return sha256(w.bytes());
}

Digest train_digest(const RunConfig& config, const Digest& preprocess) {
  ByteWriter w;
  w.raw(std::string_view("hqfs/stage/train/v1"));
  w.digest(preprocess);
  w.digest(config.train.digest(config.circuit));
  return sha256(w.bytes());
}

Digest backtest_digest(const RunConfig& config, const Digest& train) {
  const auto& p = config.portfolio;
  const auto& s = config.solver;
  ByteWriter w;
  w.raw(std::string_view("hqfs/stage/backtest/v1"));
  w.digest(train);
  w.u64(p.assets);
  w.u64(p.bits);
  w.f64(p.eta);
  w.f64(p.penalty);
  w.u64(p.rebalance_every);
  w.f64(p.cost_bps);
  w.u64(p.corr_window);
  w.f64(p.shrinkage);
  w.u64(p.liquidity_window);
  w.u64(p.pg_steps);
  w.str(config.solver_name);
  w.u64(s.restarts);
  w.u64(s.sweeps);
  w.f64(s.t_start);
  w.f64(s.t_end_ratio);
  w.u64(s.seed);
  return sha256(w.bytes());
}

}  // namespace hqfs
