#include "commshift/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "commshift/rng.hpp"

namespace commshift::io {

namespace {

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t load_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

std::uint64_t load_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace

BinaryWriter::BinaryWriter(std::string_view magic, std::uint32_t version)
    : magic_(magic), version_(version) {
  if (magic_.size() != 8) throw InternalError("container magic must be 8 bytes");
}

void BinaryWriter::u32(std::uint32_t v) { append_u32(payload_, v); }
void BinaryWriter::u64(std::uint64_t v) { append_u64(payload_, v); }

void BinaryWriter::f32(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  append_u32(payload_, bits);
}

void BinaryWriter::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  append_u64(payload_, bits);
}

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  payload_.append(s.data(), s.size());
}

void BinaryWriter::f32_array(std::span<const float> a) {
  u64(a.size());
  for (float v : a) f32(v);
}

void BinaryWriter::u32_array(std::span<const std::uint32_t> a) {
  u64(a.size());
  for (std::uint32_t v : a) u32(v);
}

void BinaryWriter::finish(const std::string& path) {
  std::string bytes;
  bytes.reserve(magic_.size() + 12 + payload_.size() + 8);
  bytes += magic_;
  append_u32(bytes, version_);
  append_u64(bytes, payload_.size());
  bytes += payload_;
  append_u64(bytes, fnv1a(bytes.data(), bytes.size()));
  write_file_atomic(path, bytes);
}

BinaryReader::BinaryReader(const std::string& path, std::string_view magic,
                           std::uint32_t expected_version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  constexpr std::size_t header = 8 + 4 + 8;
  if (bytes.size() < header + 8) throw DataError(path + ": truncated container");
  if (std::string_view(bytes.data(), 8) != magic)
    throw DataError(path + ": not a " + std::string(magic) + " container");
  version_ = load_u32(bytes.data() + 8);
  if (version_ != expected_version)
    throw DataError(path + ": unsupported container version " + std::to_string(version_) +
                    " (expected " + std::to_string(expected_version) + ")");
  std::uint64_t payload_len = load_u64(bytes.data() + 12);
  if (bytes.size() < header + payload_len + 8)
    throw DataError(path + ": truncated container (lost " +
                    std::to_string(header + payload_len + 8 - bytes.size()) + " bytes)");
  std::uint64_t stored = load_u64(bytes.data() + header + payload_len);
  std::uint64_t actual = fnv1a(bytes.data(), header + payload_len);
  if (stored != actual) throw DataError(path + ": checksum mismatch");

  payload_.assign(bytes.data() + header, payload_len);
}

void BinaryReader::need(std::size_t n) const {
  if (pos_ + n > payload_.size()) throw DataError("truncated container payload");
}

std::uint8_t BinaryReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(payload_[pos_++]);
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v = load_u32(payload_.data() + pos_);
  pos_ += 4;
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8);
  std::uint64_t v = load_u64(payload_.data() + pos_);
  pos_ += 8;
  return v;
}

float BinaryReader::f32() {
  std::uint32_t bits = u32();
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double BinaryReader::f64() {
  std::uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string BinaryReader::str() {
  std::uint32_t n = u32();
  need(n);
  std::string s(payload_.data() + pos_, n);
  pos_ += n;
  return s;
}

std::vector<float> BinaryReader::f32_array() {
  std::uint64_t n = u64();
  need(n * 4);
  std::vector<float> out(n);
  for (std::uint64_t i = 0; i < n; ++i) out[i] = f32();
  return out;
}

std::vector<std::uint32_t> BinaryReader::u32_array() {
  std::uint64_t n = u64();
  need(n * 4);
  std::vector<std::uint32_t> out(n);
  for (std::uint64_t i = 0; i < n; ++i) out[i] = u32();
  return out;
}

void BinaryReader::expect_end() const {
  if (pos_ != payload_.size()) throw DataError("container payload has trailing bytes");
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

TsvWriter::TsvWriter(std::string path) : path_(std::move(path)) {}

void TsvWriter::cell(std::string_view s) {
  if (row_open_) buf_ += '\t';
  buf_.append(s.data(), s.size());
  row_open_ = true;
}

void TsvWriter::cell(std::uint64_t v) { cell(std::to_string(v)); }
void TsvWriter::cell(std::int64_t v) { cell(std::to_string(v)); }

void TsvWriter::endrow() {
  buf_ += '\n';
  row_open_ = false;
}

void TsvWriter::finish() {
  if (finished_) return;
  atomic_write_text(path_, buf_);
  finished_ = true;
}

std::vector<std::vector<std::string>> read_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> row;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        row.push_back(line.substr(start));
        break;
      }
      row.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void atomic_write_text(const std::string& path, std::string_view content) {
  write_file_atomic(path, std::string(content));
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec);
}

std::string file_digest_hex(const std::string& path) {
  std::string bytes = read_text(path);
  std::uint64_t h = fnv1a(bytes.data(), bytes.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace commshift::io
