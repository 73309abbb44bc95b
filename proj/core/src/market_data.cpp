#include "hqfs/market_data.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "hqfs/bytes.hpp"
#include "hqfs/error.hpp"

namespace hqfs {

namespace {

constexpr std::string_view kTableMagic = "HQFSTBL1";

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::string buf(s);
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

DayKey parse_date(std::string_view text, std::string_view format) {
  std::tm tm{};
  std::istringstream in{std::string(trim(text))};
  in >> std::get_time(&tm, std::string(format).c_str());
  if (in.fail()) throw DataError("unparseable date '" + std::string(text) + "'");
  using namespace std::chrono;
  year_month_day ymd{year{tm.tm_year + 1900}, month{static_cast<unsigned>(tm.tm_mon + 1)},
                     day{static_cast<unsigned>(tm.tm_mday)}};
  if (!ymd.ok()) throw DataError("invalid calendar date '" + std::string(text) + "'");
  return static_cast<DayKey>(sys_days{ymd}.time_since_epoch().count());
}

std::string format_date(DayKey day) {
  using namespace std::chrono;
  year_month_day ymd{sys_days{days{day}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

bool PriceBar::valid() const {
  for (double p : {open, high, low, close}) {
    if (!std::isfinite(p) || p <= 0) return false;
  }
  if (volume && (!std::isfinite(*volume) || *volume < 0)) return false;
  return low <= std::min(open, close) && std::max(open, close) <= high;
}

CsvSchema CsvSchema::with_overrides(std::string_view overrides) {
  CsvSchema schema;
  std::map<std::string, std::string*, std::less<>> fields{
      {"date", &schema.date},   {"open", &schema.open},     {"high", &schema.high},
      {"low", &schema.low},     {"close", &schema.close},   {"volume", &schema.volume},
      {"symbol", &schema.symbol}, {"date_format", &schema.date_format}};
  for (const auto& item : split_csv_line(overrides)) {
    auto entry = trim(item);
    if (entry.empty()) continue;
    auto eq = entry.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("schema override '" + std::string(entry) + "' lacks '='");
    }
    auto key = trim(entry.substr(0, eq));
    auto it = fields.find(key);
    if (it == fields.end()) {
      throw ConfigError("unknown schema field '" + std::string(key) + "'");
    }
    *it->second = std::string(trim(entry.substr(eq + 1)));
  }
  return schema;
}

std::string CsvSchema::canonical() const {
  return "date=" + date + ",open=" + open + ",high=" + high + ",low=" + low + ",close=" + close +
         ",volume=" + volume + ",symbol=" + symbol + ",date_format=" + date_format;
}

PriceTable::PriceTable(std::vector<std::string> symbols, std::vector<DayKey> calendar)
    : symbols_(std::move(symbols)), calendar_(std::move(calendar)) {
  if (!std::is_sorted(symbols_.begin(), symbols_.end()) ||
      std::adjacent_find(symbols_.begin(), symbols_.end()) != symbols_.end()) {
    throw std::invalid_argument("PriceTable symbols must be sorted and unique");
  }
  if (std::adjacent_find(calendar_.begin(), calendar_.end(), std::greater_equal<>()) !=
      calendar_.end()) {
    throw std::invalid_argument("PriceTable calendar must be strictly increasing");
  }
  bars_.resize(symbols_.size() * calendar_.size());
}

std::optional<std::size_t> PriceTable::symbol_index(std::string_view symbol) const {
  auto it = std::lower_bound(symbols_.begin(), symbols_.end(), symbol);
  if (it == symbols_.end() || *it != symbol) return std::nullopt;
  return static_cast<std::size_t>(it - symbols_.begin());
}

const std::optional<PriceBar>& PriceTable::bar(std::size_t symbol, std::size_t day) const {
  return bars_.at(symbol * calendar_.size() + day);
}

void PriceTable::set_bar(std::size_t symbol, std::size_t day, const PriceBar& bar) {
  bars_.at(symbol * calendar_.size() + day) = bar;
}

std::vector<std::uint8_t> PriceTable::serialize() const {
  ByteWriter w;
  w.raw(kTableMagic);
  w.u32(static_cast<std::uint32_t>(symbols_.size()));
  for (const auto& s : symbols_) w.str(s);
  w.u32(static_cast<std::uint32_t>(calendar_.size()));
  for (auto d : calendar_) w.i32(d);
  for (const auto& b : bars_) {
    w.u8(b ? 1 : 0);
    if (!b) continue;
    w.f64(b->open);
    w.f64(b->high);
    w.f64(b->low);
    w.f64(b->close);
    w.u8(b->volume ? 1 : 0);
    w.f64(b->volume.value_or(0.0));
  }
  return std::move(w).bytes();
}

PriceTable PriceTable::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kTableMagic);
  std::vector<std::string> symbols(r.u32());
  for (auto& s : symbols) s = r.str();
  std::vector<DayKey> calendar(r.u32());
  for (auto& d : calendar) d = r.i32();
  PriceTable table(std::move(symbols), std::move(calendar));
  for (auto& b : table.bars_) {
    if (r.u8() == 0) continue;
    PriceBar bar;
    bar.open = r.f64();
    bar.high = r.f64();
    bar.low = r.f64();
    bar.close = r.f64();
    bool has_volume = r.u8() != 0;
    double volume = r.f64();
    if (has_volume) bar.volume = volume;
    b = bar;
  }
  if (!r.done()) throw DataError("trailing bytes after price table");
  return table;
}

std::size_t PriceSeries::present() const {
  return static_cast<std::size_t>(std::count_if(bars.begin(), bars.end(), [](const auto& b) { return b.has_value(); }));
}

LoadResult load_ohlcv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open OHLCV file " + path.string());
  return load_ohlcv(in, schema);
}

LoadResult load_ohlcv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("OHLCV input is empty (no header row)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  auto header = split_csv_line(line);
  auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    if (required) throw DataError("header has no column '" + name + "' (check --schema)");
    return std::nullopt;
  };
  const std::size_t c_date = *column(schema.date, true);
  const std::size_t c_open = *column(schema.open, true);
  const std::size_t c_high = *column(schema.high, true);
  const std::size_t c_low = *column(schema.low, true);
  const std::size_t c_close = *column(schema.close, true);
  const std::size_t c_symbol = *column(schema.symbol, true);
  const auto c_volume = column(schema.volume, false);

  struct Row {
    std::string symbol;
    DayKey day;
    PriceBar bar;
  };
  std::vector<Row> rows;
  std::set<std::pair<std::string, DayKey>> seen;
  LoadReport report;

  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++report.rows_read;
    auto fields = split_csv_line(line);
    auto field = [&](std::size_t i) -> std::string_view {
      return i < fields.size() ? std::string_view(fields[i]) : std::string_view{};
    };

    std::string symbol(trim(field(c_symbol)));
    DayKey day = 0;
    try {
      day = parse_date(field(c_date), schema.date_format);
    } catch (const DataError&) {
      ++report.rows_dropped;
      continue;
    }
    auto open = parse_number(field(c_open));
    auto high = parse_number(field(c_high));
    auto low = parse_number(field(c_low));
    auto close = parse_number(field(c_close));
    if (symbol.empty() || !open || !high || !low || !close) {
      ++report.rows_dropped;
      continue;
    }
    PriceBar bar{*open, *high, *low, *close, std::nullopt};
    if (c_volume) bar.volume = parse_number(field(*c_volume));
    if (!bar.valid()) {
      ++report.rows_dropped;
      continue;
    }
    if (!seen.emplace(symbol, day).second) {
      ++report.rows_dropped;
      ++report.duplicates;
      spdlog::warn("duplicate row for {} on {} rejected", symbol, format_date(day));
      continue;
    }
    if (!bar.volume) ++report.missing_volume;
    rows.push_back({std::move(symbol), day, bar});
  }

  if (rows.empty()) throw DataError("no valid OHLCV rows (read " + std::to_string(report.rows_read) + ")");

  std::vector<std::string> symbols;
  std::vector<DayKey> calendar;
  for (const auto& r : rows) {
    symbols.push_back(r.symbol);
    calendar.push_back(r.day);
  }
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
  std::sort(calendar.begin(), calendar.end());
  calendar.erase(std::unique(calendar.begin(), calendar.end()), calendar.end());

  PriceTable table(symbols, calendar);
  for (const auto& r : rows) {
    auto s = *table.symbol_index(r.symbol);
    auto d = static_cast<std::size_t>(std::lower_bound(calendar.begin(), calendar.end(), r.day) - calendar.begin());
    table.set_bar(s, d, r.bar);
  }

  report.rows_kept = rows.size();
  report.symbols = symbols.size();
  report.first_day = calendar.front();
  report.last_day = calendar.back();
  return {std::move(table), report};
}

void write_ohlcv(std::ostream& out, const PriceTable& table) {
  out << "date,open,high,low,close,volume,Name\n";
  out << std::setprecision(17);
  for (std::size_t d = 0; d < table.num_days(); ++d) {
    for (std::size_t s = 0; s < table.num_symbols(); ++s) {
      const auto& bar = table.bar(s, d);
      if (!bar) continue;
      out << format_date(table.calendar()[d]) << ',' << bar->open << ',' << bar->high << ','
          << bar->low << ',' << bar->close << ',';
      if (bar->volume) out << *bar->volume;
      out << ',' << table.symbols()[s] << '\n';
    }
  }
}

PriceSeries get_series(const PriceTable& table, std::string_view symbol) {
  auto idx = table.symbol_index(symbol);
  if (!idx) throw DataError("unknown symbol '" + std::string(symbol) + "'");
  PriceSeries series{std::string(symbol), {}};
  series.bars.reserve(table.num_days());
  for (std::size_t d = 0; d < table.num_days(); ++d) series.bars.push_back(table.bar(*idx, d));
  return series;
}

}  // namespace hqfs
