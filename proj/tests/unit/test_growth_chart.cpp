#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "wholescan/error.hpp"
#include "wholescan/growth_chart.hpp"

using namespace wholescan;

namespace {

const char* kChart =
    "# comment\n"
    "biometric,ga_days,c3_mm,c50_mm,c97_mm\n"
    "FL,143,28,33,38\n"
    "\n"
    "FL,101,12.4,17.4,22.4\n"
    "FL,185,43.6,48.6,53.6\n";

GrowthChart parse(const std::string& text) {
  std::istringstream in(text);
  return GrowthChart::from_csv(in);
}

}  // namespace

TEST_CASE("gestational age parsing") {
  CHECK(GestationalAge::parse("20w3d").days() == 143);
  CHECK(GestationalAge::parse("20w").days() == 140);
  CHECK(GestationalAge::parse("20+3").days() == 143);
  CHECK(GestationalAge::parse("143").days() == 143);
  CHECK(GestationalAge::from_days(143).to_string() == "20w3d");
  CHECK(GestationalAge::from_weeks(20, 3).weeks() == 20);
  CHECK(GestationalAge::from_weeks(20, 3).day_of_week() == 3);
  CHECK_THROWS_AS(GestationalAge::parse("twenty"), ConfigError);
  CHECK_THROWS_AS(GestationalAge::parse("20w9d"), ConfigError);
  CHECK_THROWS_AS(GestationalAge::parse(""), ConfigError);
}

TEST_CASE("chart interpolation and domain") {
  const auto chart = parse(kChart);
  CHECK(chart.has(Biometric::FL));
  CHECK_FALSE(chart.has(Biometric::HC));
  CHECK(chart.at(Biometric::FL, 143).c50 == doctest::Approx(33.0));
  CHECK(chart.at(Biometric::FL, 122).c50 == doctest::Approx(25.2));
  CHECK(chart.domain(Biometric::FL).first == 101);
  CHECK(chart.domain(Biometric::FL).second == 185);
  CHECK_THROWS_AS(chart.at(Biometric::FL, 100), GAOutOfRange);
  CHECK_THROWS_AS(chart.at(Biometric::FL, 186), GAOutOfRange);
  CHECK(chart.at_clamped(Biometric::FL, 50).c3 == doctest::Approx(12.4));
  CHECK_THROWS_AS(chart.at(Biometric::HC, 143), ConfigError);
}

TEST_CASE("chart invariants are enforced") {
  CHECK_THROWS_AS(parse("biometric,ga_days,c3_mm,c50_mm,c97_mm\nFL,143,33,28,38\nFL,150,34,35,36\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse("biometric,ga_days,c3_mm,c50_mm,c97_mm\nFL,143,28,33,38\nFL,150,20,25,30\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse("biometric,ga_days,c3_mm,c50_mm,c97_mm\nFL,143,28,33,38\n"), ConfigError);
  CHECK_THROWS_AS(parse("biometric,ga_days,c3_mm,c50_mm,c97_mm\nFL,143,28,33,38\nFL,143,29,34,39\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse("ga,c3\n"), ConfigError);
  CHECK_THROWS_AS(parse("biometric,ga_days,c3_mm,c50_mm,c97_mm\nXX,143,28,33,38\n"), ConfigError);
  CHECK_THROWS_AS(parse("biometric,ga_days,c3_mm,c50_mm,c97_mm\nFL,143,28,abc,38\n"), ConfigError);
  CHECK_THROWS_AS(GrowthChart::load("/nonexistent/chart.csv"), ConfigError);
}

TEST_CASE("chart csv round trip") {
  const auto chart = parse(kChart);
  std::ostringstream out;
  chart.write_csv(out);
  const auto again = parse(out.str());
  for (double d : {101.0, 120.5, 143.0, 185.0}) {
    CHECK(again.at(Biometric::FL, d).c97 == doctest::Approx(chart.at(Biometric::FL, d).c97));
  }
}

TEST_CASE("shipped synthetic chart") {
  const auto chart = GrowthChart::load(std::filesystem::path(WHOLESCAN_DATA_DIR) / "synthetic_chart.csv");
  for (Biometric b : kAllBiometrics) CHECK(chart.has(b));
  const auto fl = chart.at(Biometric::FL, 143);
  CHECK(fl.c3 == doctest::Approx(28.0));
  CHECK(fl.c50 == doctest::Approx(33.0));
  CHECK(fl.c97 == doctest::Approx(38.0));
}
