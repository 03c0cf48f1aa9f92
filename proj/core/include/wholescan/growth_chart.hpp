#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wholescan/biometric.hpp"

namespace wholescan {

// Gestational age stored as whole days since the last menstrual period.
class GestationalAge {
 public:
  constexpr GestationalAge() = default;
  static constexpr GestationalAge from_days(int days) { return GestationalAge(days); }
  static constexpr GestationalAge from_weeks(int weeks, int days = 0) {
    return GestationalAge(weeks * 7 + days);
  }
  // Accepts "20w3d", "20w", "20+3" and a plain day count ("143").
  // Throws ConfigError on anything else.
  static GestationalAge parse(std::string_view text);

  constexpr int days() const noexcept { return days_; }
  constexpr int weeks() const noexcept { return days_ / 7; }
  constexpr int day_of_week() const noexcept { return days_ % 7; }
  std::string to_string() const;

  friend constexpr auto operator<=>(GestationalAge, GestationalAge) = default;

 private:
  constexpr explicit GestationalAge(int days) : days_(days) {}
  int days_ = 0;
};

struct Centiles {
  double c3 = 0.0;
  double c50 = 0.0;
  double c97 = 0.0;
};

struct CentileRow {
  double ga_days = 0.0;
  Centiles centiles;
};

// Piecewise-linear 3rd/50th/97th centile curves per biometric.
class GrowthChart {
 public:
  // Parses `biometric,ga_days,c3_mm,c50_mm,c97_mm` CSV. Throws ConfigError on
  // malformed rows or violated curve invariants.
  static GrowthChart from_csv(std::istream& in);
  static GrowthChart load(const std::filesystem::path& path);

  // Rows need not be sorted. Throws ConfigError if c3 < c50 < c97 fails, a
  // curve decreases, or fewer than two rows are given.
  void set_curve(Biometric b, std::vector<CentileRow> rows);

  bool has(Biometric b) const;
  // Throws GAOutOfRange outside the tabulated range, ConfigError if the
  // biometric has no curve.
  Centiles at(Biometric b, double ga_days) const;
  // Same as at() but clamps ga_days to the tabulated range.
  Centiles at_clamped(Biometric b, double ga_days) const;
  std::pair<double, double> domain(Biometric b) const;

  void write_csv(std::ostream& out) const;

 private:
  const std::vector<CentileRow>& curve(Biometric b) const;
  std::map<Biometric, std::vector<CentileRow>> curves_;
};

}  // namespace wholescan
