#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "hqfs/error.hpp"
#include "hqfs/market_data.hpp"

using namespace hqfs;

namespace {

LoadResult load(const std::string& csv, const CsvSchema& schema = {}) {
  std::istringstream in(csv);
  return load_ohlcv(in, schema);
}

const char* kHeader = "date,open,high,low,close,volume,Name\n";

}  // namespace

TEST(MarketData, TwoSymbolsThreeDays) {
  std::string csv = kHeader;
  for (const char* d : {"2020-01-02", "2020-01-03", "2020-01-06"}) {
    for (const char* s : {"BBB", "AAA"}) csv += std::string(d) + ",10,11,9,10.5,100," + s + "\n";
  }
  const auto r = load(csv);
  EXPECT_EQ(r.table.num_days(), 3u);
  EXPECT_EQ(r.table.num_symbols(), 2u);
  EXPECT_EQ(r.table.symbols(), (std::vector<std::string>{"AAA", "BBB"}));
  EXPECT_EQ(r.report.rows_kept, 6u);
  EXPECT_EQ(r.report.rows_dropped, 0u);
  EXPECT_EQ(format_date(*r.report.first_day), "2020-01-02");
  EXPECT_EQ(format_date(*r.report.last_day), "2020-01-06");
}

TEST(MarketData, HighBelowLowIsDropped) {
  std::string csv = kHeader;
  csv += "2020-01-02,10,11,9,10,100,AAA\n";
  csv += "2020-01-03,10,8,9,10,100,AAA\n";
  const auto r = load(csv);
  EXPECT_EQ(r.report.rows_read, 2u);
  EXPECT_EQ(r.report.rows_dropped, 1u);
  EXPECT_EQ(r.table.num_days(), 1u);
}

TEST(MarketData, InvalidPricesAndDatesAreDropped) {
  std::string csv = kHeader;
  csv += "2020-01-02,10,11,9,10,100,AAA\n";
  csv += "2020-01-03,-1,11,9,10,100,AAA\n";   // non-positive price
  csv += "2020-01-04,10,11,9,,100,AAA\n";     // missing close
  csv += "not-a-date,10,11,9,10,100,AAA\n";
  csv += "2020-01-05,10,11,9,12,100,AAA\n";   // close above high
  csv += "2020-01-06,10,11,9,10,-5,AAA\n";    // negative volume
  const auto r = load(csv);
  EXPECT_EQ(r.report.rows_read, 6u);
  EXPECT_EQ(r.report.rows_dropped, 5u);
  EXPECT_EQ(r.report.rows_kept, 1u);
}

TEST(MarketData, DuplicatesMatchSetBasedScan) {
  std::string csv = kHeader;
  const std::vector<std::pair<std::string, std::string>> rows{
      {"2020-01-02", "AAA"}, {"2020-01-02", "BBB"}, {"2020-01-02", "AAA"},
      {"2020-01-03", "AAA"}, {"2020-01-03", "AAA"}, {"2020-01-03", "AAA"}};
  for (const auto& [d, s] : rows) csv += d + ",10,11,9,10,100," + s + "\n";
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t dup = 0;
  for (const auto& key : rows) dup += seen.insert(key).second ? 0 : 1;

  const auto r = load(csv);
  EXPECT_EQ(r.report.duplicates, dup);
  EXPECT_EQ(r.report.rows_kept, rows.size() - dup);
}

TEST(MarketData, DuplicateKeepsFirstOccurrence) {
  std::string csv = kHeader;
  csv += "2020-01-02,10,11,9,10,100,AAA\n";
  csv += "2020-01-02,20,21,19,20,100,AAA\n";
  const auto r = load(csv);
  EXPECT_DOUBLE_EQ(r.table.bar(0, 0)->close, 10.0);
}

TEST(MarketData, MissingVolumeIsKeptAndMarked) {
  std::string csv = kHeader;
  csv += "2020-01-02,10,11,9,10,,AAA\n";
  const auto r = load(csv);
  EXPECT_EQ(r.report.missing_volume, 1u);
  ASSERT_TRUE(r.table.bar(0, 0));
  EXPECT_FALSE(r.table.bar(0, 0)->volume);
}

TEST(MarketData, VolumeColumnIsOptional) {
  const auto r = load("date,open,high,low,close,Name\n2020-01-02,10,11,9,10,AAA\n");
  EXPECT_EQ(r.report.missing_volume, 1u);
}

TEST(MarketData, ErrorsForMissingHeaderColumnEmptyInputAndNoRows) {
  EXPECT_THROW(load("date,open,high,low,close,volume\n2020-01-02,1,1,1,1,1\n"), DataError);
  EXPECT_THROW(load(""), DataError);
  EXPECT_THROW(load(std::string(kHeader) + "2020-01-02,10,8,9,10,100,AAA\n"), DataError);
  EXPECT_THROW(load_ohlcv(std::filesystem::path("/nonexistent/prices.csv")), DataError);
}

TEST(MarketData, SchemaOverridesMapOtherHeaders) {
  const std::string csv = "Date,Open,High,Low,Close,Volume,ticker\n02/01/2020,10,11,9,10,5,XYZ\n";
  const auto schema = CsvSchema::with_overrides(
      "date=Date,open=Open,high=High,low=Low,close=Close,volume=Volume,symbol=ticker,date_format=%d/%m/%Y");
  const auto r = load(csv, schema);
  EXPECT_EQ(r.table.symbols().front(), "XYZ");
  EXPECT_EQ(format_date(r.table.calendar().front()), "2020-01-02");
  EXPECT_THROW(CsvSchema::with_overrides("bogus=x"), ConfigError);
  EXPECT_THROW(CsvSchema::with_overrides("date"), ConfigError);
}

TEST(MarketData, QuotedFieldsAndByteOrderMark) {
  const auto r = load("\xEF\xBB\xBF" "date,open,high,low,close,volume,Name\n\"2020-01-02\",10,11,9,10,100,\"A,B\"\n");
  EXPECT_EQ(r.table.symbols().front(), "A,B");
}

TEST(MarketData, SeriesPreservesGaps) {
  std::string csv = kHeader;
  for (const char* d : {"2020-01-01", "2020-01-02", "2020-01-03", "2020-01-04"}) {
    csv += std::string(d) + ",10,11,9,10,100,FULL\n";
  }
  for (const char* d : {"2020-01-01", "2020-01-02", "2020-01-04"}) csv += std::string(d) + ",10,11,9,10,100,GAP\n";
  const auto r = load(csv);
  const auto gap = get_series(r.table, "GAP");
  ASSERT_EQ(gap.size(), 4u);
  EXPECT_TRUE(gap.bars[0] && gap.bars[1] && gap.bars[3]);
  EXPECT_FALSE(gap.bars[2]);
  EXPECT_EQ(get_series(r.table, "FULL").present(), 4u);
  EXPECT_THROW(get_series(r.table, "ZZZZ"), DataError);
}

TEST(MarketData, LoadIsDeterministicAndTableRoundTrips) {
  std::string csv = kHeader;
  csv += "2020-01-02,10,11,9,10,100,AAA\n2020-01-03,10,11,9,10.25,,AAA\n2020-01-03,5,6,4,5,7,BBB\n";
  const auto a = load(csv), b = load(csv);
  EXPECT_EQ(a.table, b.table);
  EXPECT_EQ(PriceTable::deserialize(a.table.serialize()), a.table);

  std::ostringstream out;
  write_ohlcv(out, a.table);
  EXPECT_EQ(load(out.str()).table, a.table);
}

TEST(MarketData, TableRejectsUnsortedInputAndTruncatedBytes) {
  EXPECT_THROW(PriceTable({"B", "A"}, {1, 2}), std::invalid_argument);
  EXPECT_THROW(PriceTable({"A"}, {2, 2}), std::invalid_argument);
  PriceTable t({"A"}, fixtures::calendar(2));
  t.set_bar(0, 0, fixtures::bar(10));
  auto bytes = t.serialize();
  bytes.pop_back();
  EXPECT_THROW(PriceTable::deserialize(bytes), DataError);
}

TEST(MarketData, DateParsingAndEpochSeconds) {
  EXPECT_EQ(parse_date("1970-01-01"), 0);
  EXPECT_EQ(parse_date("2000-03-01"), 11017);
  EXPECT_EQ(format_date(parse_date("2024-02-29")), "2024-02-29");
  EXPECT_THROW(parse_date("2023-02-30"), DataError);
  EXPECT_EQ(epoch_seconds(1), 86400);
}
