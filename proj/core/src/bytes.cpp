#include "hqfs/bytes.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hqfs/error.hpp"

namespace hqfs {

void ByteWriter::u16(std::uint16_t v) {
  for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::raw(std::span<const std::uint8_t> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

void ByteWriter::raw(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  raw(s);
}

void ByteWriter::f64s(std::span<const double> values) {
  for (double v : values) f64(v);
}

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  if (n > remaining()) {
    throw DataError("truncated input: need " + std::to_string(n) + " bytes at offset " +
                    std::to_string(pos_) + ", have " + std::to_string(remaining()));
  }
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8() { return take(1)[0]; }

std::uint16_t ByteReader::u16() {
  auto b = take(2);
  return static_cast<std::uint16_t>(b[0] | b[1] << 8);
}

std::uint32_t ByteReader::u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = v << 8 | b[i];
  return v;
}

std::uint64_t ByteReader::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = v << 8 | b[i];
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) { return take(n); }

Digest ByteReader::digest() {
  Digest d{};
  auto b = take(d.size());
  std::memcpy(d.data(), b.data(), d.size());
  return d;
}

std::string ByteReader::str() {
  auto n = u32();
  auto b = take(n);
  return {b.begin(), b.end()};
}

std::vector<double> ByteReader::f64s(std::size_t n) {
  if (n > remaining() / 8) throw DataError("truncated input: f64 array of " + std::to_string(n));
  std::vector<double> out(n);
  for (auto& v : out) v = f64();
  return out;
}

void ByteReader::expect_magic(std::string_view magic) {
  auto b = take(magic.size());
  if (!std::equal(b.begin(), b.end(), magic.begin())) {
    throw DataError("bad file magic, expected '" + std::string(magic) + "'");
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace hqfs
