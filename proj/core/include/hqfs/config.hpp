#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "hqfs/annealer.hpp"
#include "hqfs/forecaster.hpp"
#include "hqfs/market_data.hpp"
#include "hqfs/portfolio.hpp"
#include "hqfs/preprocess.hpp"
#include "hqfs/vqc.hpp"

namespace hqfs {

struct DataConfig {
  std::filesystem::path path;
  std::string schema;  // "field=column,..." overrides
  std::string date_format = "%Y-%m-%d";

  CsvSchema csv_schema() const;
};

/// Explicit day numbers win; otherwise the fractions of the calendar are used.
struct SplitConfig {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  double train_fraction = 0.6;
  double val_fraction = 0.2;

  SplitSpec resolve(std::size_t num_days) const;
};

struct AuditConfig {
  bool enabled = false;
  std::filesystem::path secret_key;
  std::filesystem::path public_key;
  std::uint32_t key_capacity = 256;
};

/// Everything a run needs, read from an INI-style file:
///
///   [section]
///   key = value   ; or # comments
///
/// Unknown sections or keys are rejected. Relative paths resolve against
/// the directory holding the config file.
struct RunConfig {
  DataConfig data;
  PreprocessConfig preprocess;
  SplitConfig split;
  CircuitSpec circuit;
  TrainConfig train;
  PortfolioConfig portfolio;
  std::string solver_name = "sa";
  SolverConfig solver;
  AuditConfig audit;
  std::filesystem::path output_dir = "out";

  /// Throws ConfigError with the offending key.
  static RunConfig parse(std::string_view text, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  /// Fills defaults that depend on other fields (the feature map) and checks
  /// every section; throws ConfigError.
  void finalize();
  void validate() const;

  /// Sets both the training and the solver seed.
  void set_seed(std::uint64_t seed);

  /// Normalized "section.key = value" listing of every setting.
  std::string canonical() const;
};

/// Stage digests chain each artifact to the settings and inputs that
/// produced it. Audit and output settings are deliberately left out.
Digest ingest_digest(const RunConfig& config, const Digest& csv_sha256);
Digest preprocess_digest(const RunConfig& config, const Digest& ingest);
Digest train_digest(const RunConfig& config, const Digest& preprocess);
Digest backtest_digest(const RunConfig& config, const Digest& train);

}  // namespace hqfs
