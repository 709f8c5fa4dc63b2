#include <doctest.h>

#include <fstream>
#include <vector>

#include "commshift/error.hpp"
#include "commshift/io.hpp"
#include "test_util.hpp"

using namespace commshift;

TEST_CASE("binary container round trip of every field type") {
  testutil::TempDir tmp;
  auto path = tmp.file("round.bin");
  {
    io::BinaryWriter w("testmagc", 3);
    w.u8(200);
    w.u32(0xdeadbeefu);
    w.u64(0x123456789abcdef0ull);
    w.f32(1.5f);
    w.f64(-2.25);
    w.str("hello world");
    w.f32_array(std::vector<float>{1.0f, -0.5f, 3.25f});
    w.u32_array(std::vector<std::uint32_t>{7, 8, 9});
    w.finish(path);
  }
  io::BinaryReader r(path, "testmagc", 3);
  CHECK(r.u8() == 200);
  CHECK(r.u32() == 0xdeadbeefu);
  CHECK(r.u64() == 0x123456789abcdef0ull);
  CHECK(r.f32() == 1.5f);
  CHECK(r.f64() == -2.25);
  CHECK(r.str() == "hello world");
  CHECK(r.f32_array() == std::vector<float>{1.0f, -0.5f, 3.25f});
  CHECK(r.u32_array() == std::vector<std::uint32_t>{7, 8, 9});
  CHECK(r.at_end());
  r.expect_end();
}

TEST_CASE("binary container rejects corruption") {
  testutil::TempDir tmp;
  auto path = tmp.file("c.bin");
  {
    io::BinaryWriter w("testmagc", 1);
    w.str("payload payload payload");
    w.finish(path);
  }

  SUBCASE("wrong magic") {
    CHECK_THROWS_AS(io::BinaryReader(path, "othermag", 1), DataError);
  }
  SUBCASE("wrong version") {
    CHECK_THROWS_AS(io::BinaryReader(path, "testmagc", 2), DataError);
  }
  SUBCASE("flipped payload byte fails the checksum") {
    std::string bytes = io::read_text(path);
    bytes[bytes.size() / 2] ^= 0x20;
    io::atomic_write_text(path, bytes);
    CHECK_THROWS_AS(io::BinaryReader(path, "testmagc", 1), DataError);
  }
  SUBCASE("truncation detected") {
    std::string bytes = io::read_text(path);
    io::atomic_write_text(path, bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(io::BinaryReader(path, "testmagc", 1), DataError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(io::BinaryReader(tmp.file("nope.bin"), "testmagc", 1), DataError);
  }
}

TEST_CASE("reader notices trailing and missing payload bytes") {
  testutil::TempDir tmp;
  auto path = tmp.file("t.bin");
  io::BinaryWriter w("testmagc", 1);
  w.u32(1);
  w.u32(2);
  w.finish(path);

  io::BinaryReader r(path, "testmagc", 1);
  CHECK(r.u32() == 1);
  CHECK_THROWS_AS(r.expect_end(), DataError);  // one u32 still unread
  CHECK(r.u32() == 2);
  CHECK_THROWS_AS(r.u32(), DataError);  // reading past the end
}

TEST_CASE("fixed6 prints six decimals") {
  CHECK(io::fixed6(0.0) == "0.000000");
  CHECK(io::fixed6(1.0) == "1.000000");
  CHECK(io::fixed6(-0.5) == "-0.500000");
  CHECK(io::fixed6(0.1234564) == "0.123456");
  CHECK(io::fixed6(2.5e-7) == "0.000000");
}

TEST_CASE("tsv writer and reader round trip") {
  testutil::TempDir tmp;
  auto path = tmp.file("t.tsv");
  {
    io::TsvWriter w(path);
    w.cell(std::string_view("word"));
    w.cell(std::string_view("value"));
    w.endrow();
    w.cell(std::string_view("alpha"));
    w.cell(0.25);
    w.endrow();
    w.cell(std::string_view("beta"));
    w.cell(static_cast<std::uint64_t>(42));
    w.endrow();
    w.finish();
  }
  auto rows = io::read_tsv(path);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"word", "value"});
  CHECK(rows[1] == std::vector<std::string>{"alpha", "0.250000"});
  CHECK(rows[2] == std::vector<std::string>{"beta", "42"});
}

TEST_CASE("tsv reader strips carriage returns") {
  testutil::TempDir tmp;
  auto path = tmp.file("crlf.tsv");
  io::atomic_write_text(path, "a\tb\r\nc\td\r\n");
  auto rows = io::read_tsv(path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"a", "b"});
  CHECK(rows[1] == std::vector<std::string>{"c", "d"});
}

TEST_CASE("file digest tracks content") {
  testutil::TempDir tmp;
  auto path = tmp.file("d.txt");
  io::atomic_write_text(path, "one");
  auto d1 = io::file_digest_hex(path);
  CHECK(d1.size() == 16);
  io::atomic_write_text(path, "two");
  CHECK(io::file_digest_hex(path) != d1);
  io::atomic_write_text(path, "one");
  CHECK(io::file_digest_hex(path) == d1);
}
