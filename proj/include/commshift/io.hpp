#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "commshift/error.hpp"

namespace commshift::io {

// Binary containers share one layout, little-endian throughout:
//   [magic 8 bytes][version u32][payload length u64][payload][fnv1a u64 of all prior bytes]
// Truncation, wrong magic, wrong version and checksum corruption each get their own error.

class BinaryWriter {
 public:
  BinaryWriter(std::string_view magic, std::uint32_t version);

  void u8(std::uint8_t v) { payload_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void str(std::string_view s);
  void f32_array(std::span<const float> a);
  void u32_array(std::span<const std::uint32_t> a);

  // assembles header + payload + checksum and writes atomically (tmp then rename)
  void finish(const std::string& path);

 private:
  std::string magic_;
  std::uint32_t version_;
  std::string payload_;
};

class BinaryReader {
 public:
  // reads the whole file, verifies header and checksum
  BinaryReader(const std::string& path, std::string_view magic,
               std::uint32_t expected_version);

  std::uint32_t version() const { return version_; }

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str();
  std::vector<float> f32_array();
  std::vector<std::uint32_t> u32_array();

  bool at_end() const { return pos_ == payload_.size(); }
  // call after the last field; catches short payload declarations
  void expect_end() const;

 private:
  void need(std::size_t n) const;
  std::string payload_;
  std::size_t pos_ = 0;
  std::uint32_t version_ = 0;
};

// "%.6f"; all TSV floats use 6 decimals
std::string fixed6(double v);

class TsvWriter {
 public:
  explicit TsvWriter(std::string path);
  void cell(std::string_view s);
  void cell(double v) { cell(fixed6(v)); }
  void cell(std::uint64_t v);
  void cell(std::int64_t v);
  void endrow();
  void finish();

 private:
  std::string path_;
  std::string buf_;
  bool row_open_ = false;
  bool finished_ = false;
};

// rows of tab-separated cells; no quoting, fields never contain tabs
std::vector<std::vector<std::string>> read_tsv(const std::string& path);

void atomic_write_text(const std::string& path, std::string_view content);
std::string read_text(const std::string& path);
bool file_exists(const std::string& path);
// fnv1a over the file bytes, as 16 hex digits
std::string file_digest_hex(const std::string& path);

}  // namespace commshift::io
