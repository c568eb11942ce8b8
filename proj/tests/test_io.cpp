#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>

#include "jjphoton/error.hpp"
#include "jjphoton/io.hpp"

using namespace jjphoton;

TEST_CASE("unknown keys are rejected by name") {
  const io::json j = {{"a", 1}, {"typo", 2}};
  CHECK_NOTHROW(io::reject_unknown_keys(j, {"a", "typo"}, "x"));
  try {
    io::reject_unknown_keys(j, {"a"}, "section");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("typo") != std::string::npos);
  }
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1e-300, 6.02214076e23, 1.0 / 3.0, 32.1e3}) {
    CHECK(std::stod(io::fmt(v)) == v);
  }
  CHECK(io::fmt(0.1) == "0.1");
}

TEST_CASE("atomic writes replace the whole file") {
  const auto dir = std::filesystem::temp_directory_path() / "jjphoton_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "out.txt";
  io::write_atomic(path, "first version, longer");
  io::write_atomic(path, "second");
  CHECK(io::read_text(path) == "second");
  for (const auto& e : std::filesystem::directory_iterator(dir)) CHECK(e.path() == path);
  CHECK_THROWS_AS(io::read_text(dir / "missing"), IoError);
  io::write_atomic(path, "{not json");
  CHECK_THROWS_AS(io::read_json(path), ConfigError);
  std::filesystem::remove_all(dir);
}
