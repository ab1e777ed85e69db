#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "psc/io.hpp"
#include "psc/rng.hpp"
#include "support/checks.hpp"
#include "support/tempdir.hpp"

using namespace psc::io;
using psc::ErrorKind;
using testsupport::TempDir;
using testsupport::thrown_kind;

TEST_SUITE("io") {

TEST_CASE("memory source yields its bytes in chunks") {
  MemorySource src("hello");
  char buf[3];
  CHECK(src.read(buf, 3) == 3);
  CHECK(std::string(buf, 3) == "hel");
  CHECK(src.read(buf, 3) == 2);
  CHECK(std::string(buf, 2) == "lo");
  CHECK(src.read(buf, 3) == 0);
  CHECK(src.read(buf, 3) == 0);
}

TEST_CASE("line reader splits on LF and keeps the final unterminated line") {
  auto lines_of = [](std::string_view text) {
    MemorySource src(text);
    LineReader reader(src);
    std::vector<std::string> lines;
    std::string line;
    while (reader.next(line)) lines.push_back(line);
    return lines;
  };
  CHECK(lines_of("a\nbb\n") == std::vector<std::string>{"a", "bb"});
  CHECK(lines_of("a\nbb") == std::vector<std::string>{"a", "bb"});
  CHECK(lines_of("") == std::vector<std::string>{});
  CHECK(lines_of("\n\n") == std::vector<std::string>{"", ""});
  CHECK(lines_of("a\r\nb") == std::vector<std::string>{"a\r", "b"});
}

TEST_CASE("plain file sink writes atomically via a temporary sibling") {
  TempDir tmp;
  const auto target = tmp.file("out.txt");
  {
    FileSink sink(target, false);
    sink.write("first ");
    sink.write("second");
    CHECK(!std::filesystem::exists(target));
    sink.close();
    CHECK(std::filesystem::exists(target));
  }
  CHECK(read_file(target, false) == "first second");
}

TEST_CASE("gzip sink and source round-trip, including large payloads") {
  TempDir tmp;
  const auto target = tmp.file("out.bin.gz");

  std::string payload;
  psc::Rng rng(77);
  payload.reserve(1 << 20);
  for (int i = 0; i < (1 << 20); ++i)
    payload.push_back(static_cast<char>(rng.uniform_index(256)));

  {
    FileSink sink(target, true);
    sink.write(payload);
    sink.close();
  }
  const std::string raw = read_file(target, false);
  REQUIRE(raw.size() >= 2);
  CHECK(static_cast<unsigned char>(raw[0]) == 0x1f);
  CHECK(static_cast<unsigned char>(raw[1]) == 0x8b);
  CHECK(read_file(target, true) == payload);
}

TEST_CASE("gzip source rejects truncated and corrupt streams") {
  TempDir tmp;
  const auto target = tmp.file("data.gz");
  {
    FileSink sink(target, true);
    sink.write(std::string(4096, 'x'));
    sink.close();
  }
  const std::string whole = read_file(target, false);

  const auto read_all_gz = [](std::string_view bytes) {
    MemorySource raw(bytes);
    GzipSource gz(raw);
    char buf[512];
    while (gz.read(buf, sizeof buf) != 0) {
    }
  };
  CHECK(thrown_kind([&] { read_all_gz(std::string_view(whole).substr(0, whole.size() / 2)); }) ==
        ErrorKind::GzipError);
  CHECK(thrown_kind([&] { read_all_gz("not gzip at all"); }) == ErrorKind::GzipError);
}

TEST_CASE("missing inputs and unwritable outputs raise the dedicated kinds") {
  TempDir tmp;
  CHECK(thrown_kind([&] { read_file(tmp.file("nope.txt"), false); }) ==
        ErrorKind::InputUnreadable);
  CHECK(thrown_kind([&] { FileSink(tmp.file("no_dir") / "out.txt", false); }) ==
        ErrorKind::OutputUnwritable);
}

TEST_CASE("suffix helper") {
  CHECK(has_suffix("table.csv.gz", ".gz"));
  CHECK(!has_suffix("table.csv", ".gz"));
  CHECK(!has_suffix("gz", ".gz"));
}

}  // TEST_SUITE
