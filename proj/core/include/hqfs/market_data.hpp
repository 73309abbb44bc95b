#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hqfs/hash.hpp"

namespace hqfs {

/// Calendar day as days since 1970-01-01 (UTC).
using DayKey = std::int32_t;

DayKey parse_date(std::string_view text, std::string_view format = "%Y-%m-%d");
std::string format_date(DayKey day);
inline std::int64_t epoch_seconds(DayKey day) { return static_cast<std::int64_t>(day) * 86400; }

struct PriceBar {
  double open = 0;
  double high = 0;
  double low = 0;
  double close = 0;
  std::optional<double> volume;  // missing volume is kept, prices never

  /// low <= min(open, close) <= max(open, close) <= high, prices > 0, volume >= 0.
  bool valid() const;

  friend bool operator==(const PriceBar&, const PriceBar&) = default;
};

/// Column mapping for the CSV loader.
struct CsvSchema {
  std::string date = "date";
  std::string open = "open";
  std::string high = "high";
  std::string low = "low";
  std::string close = "close";
  std::string volume = "volume";
  std::string symbol = "Name";
  std::string date_format = "%Y-%m-%d";

  /// Applies "field=column,field=column" overrides, e.g. "symbol=ticker,date=Date".
  static CsvSchema with_overrides(std::string_view overrides);
  std::string canonical() const;
};

/// Daily bars for a set of symbols over a shared calendar. Indices are
/// trading-day positions in the calendar (0-based).
class PriceTable {
 public:
  PriceTable() = default;
  PriceTable(std::vector<std::string> symbols, std::vector<DayKey> calendar);

  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::vector<DayKey>& calendar() const { return calendar_; }
  std::size_t num_days() const { return calendar_.size(); }
  std::size_t num_symbols() const { return symbols_.size(); }

  std::optional<std::size_t> symbol_index(std::string_view symbol) const;
  const std::optional<PriceBar>& bar(std::size_t symbol, std::size_t day) const;
  void set_bar(std::size_t symbol, std::size_t day, const PriceBar& bar);

  std::vector<std::uint8_t> serialize() const;
  static PriceTable deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const PriceTable&, const PriceTable&) = default;

 private:
  std::vector<std::string> symbols_;
  std::vector<DayKey> calendar_;
  std::vector<std::optional<PriceBar>> bars_;  // symbol-major, num_days per symbol
};

/// One symbol's bars in calendar order; std::nullopt marks a missing day.
struct PriceSeries {
  std::string symbol;
  std::vector<std::optional<PriceBar>> bars;

  std::size_t size() const { return bars.size(); }
  std::size_t present() const;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t rows_dropped = 0;  // includes duplicates
  std::size_t duplicates = 0;
  std::size_t missing_volume = 0;
  std::size_t symbols = 0;
  std::optional<DayKey> first_day;
  std::optional<DayKey> last_day;
};

struct LoadResult {
  PriceTable table;
  LoadReport report;
};

LoadResult load_ohlcv(const std::filesystem::path& path, const CsvSchema& schema = {});
LoadResult load_ohlcv(std::istream& in, const CsvSchema& schema = {});

/// Writes a table back out using the default column names.
void write_ohlcv(std::ostream& out, const PriceTable& table);

PriceSeries get_series(const PriceTable& table, std::string_view symbol);

}  // namespace hqfs
