#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hqfs/hash.hpp"

namespace hqfs {

/// Little-endian writer used by every on-disk layout in the project.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void raw(std::span<const std::uint8_t> bytes);
  void raw(std::string_view bytes);
  void digest(const Digest& d) { raw(d); }
  /// u32 length prefix followed by the bytes.
  void str(std::string_view s);
  void f64s(std::span<const double> values);

  const std::vector<std::uint8_t>& bytes() const& { return buf_; }
  std::vector<std::uint8_t> bytes() && { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; truncation raises DataError.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : data_(bytes) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  std::span<const std::uint8_t> raw(std::size_t n);
  Digest digest();
  std::string str();
  std::vector<double> f64s(std::size_t n);
  void expect_magic(std::string_view magic);

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::span<const std::uint8_t> take(std::size_t n);

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace hqfs
