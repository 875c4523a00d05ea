#include <doctest.h>

#include "temp_dir.hpp"
#include "vaxho/config.hpp"
#include "vaxho/csv.hpp"
#include "vaxho/error.hpp"
#include "vaxho/parallel.hpp"

#include <cmath>
#include <random>

using namespace vaxho;

TEST_SUITE("support") {

TEST_CASE("format_exact round-trips doubles") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    CHECK(std::stod(csv::format_exact(v)) == v);
  }
  CHECK(csv::format_exact(0.5) == "0.5");
  CHECK(csv::format_exact(60.0) == "60");
}

TEST_CASE("format_significant keeps twelve digits") {
  CHECK(csv::format_significant(0.0, 12) == "0");
  CHECK(csv::format_significant(1.0 / 3.0, 12) == "0.333333333333");
  CHECK(csv::format_significant(-2.5, 12) == "-2.5");
}

TEST_CASE("reader reports line and column of a bad cell") {
  test::TempDir dir;
  test::write_file(dir / "a.csv", "x,y\n1,2\n\n3,oops\n");
  csv::Reader r(dir / "a.csv");
  r.expect_header("x,y");
  REQUIRE(r.next());
  CHECK(r.number(1) == 2.0);
  REQUIRE(r.next());
  CHECK(r.line_number() == 4);
  try {
    r.number(1);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
    CHECK(e.column() == 2);
  }
}

TEST_CASE("reader rejects a wrong header") {
  test::TempDir dir;
  test::write_file(dir / "a.csv", "x,z\n");
  csv::Reader r(dir / "a.csv");
  CHECK_THROWS_AS(r.expect_header("x,y"), DataError);
}

TEST_CASE("config sections, comments, quotes and lists") {
  const auto cfg = KeyValueConfig::parse(
      "# comment\nyears = 2000-2002,2005\nname = \"a # b\"\n[synth]\nkappa = 0.3  # planted\n"
      "shares = 0.2, 0.4\n");
  CHECK(*cfg.get_years("years") == std::vector<int>{2000, 2001, 2002, 2005});
  CHECK(*cfg.get_string("name") == "a # b");
  CHECK(*cfg.get_double("synth.kappa") == doctest::Approx(0.3));
  CHECK(*cfg.get_double_list("synth.shares") == std::vector<double>{0.2, 0.4});
  CHECK_NOTHROW(cfg.reject_unused());
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign\n"), ConfigError);
  const auto cfg = KeyValueConfig::parse("a = x\nunused = 1\n");
  CHECK_THROWS_AS(cfg.get_double("a"), ConfigError);
  CHECK_THROWS_AS(cfg.reject_unused(), ConfigError);
  CHECK_THROWS(parse_year_list("2005-2000"));
  CHECK_THROWS(parse_year_list("20x0"));
}

TEST_CASE("parallel_for fills index-owned slots regardless of thread count") {
  for (unsigned threads : {1u, 2u, 8u}) {
    std::vector<double> out(257);
    parallel_for(out.size(), threads, [&](std::size_t i) { out[i] = std::sqrt(static_cast<double>(i)); });
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == std::sqrt(static_cast<double>(i)));
  }
  CHECK_THROWS_AS(parallel_for(10, 4,
                               [](std::size_t i) {
                                 if (i == 3) throw DataError("boom");
                               }),
                  DataError);
}

}
