#include "wholescan/growth_chart.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "wholescan/error.hpp"

namespace wholescan {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_int(std::string_view s, int& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

Centiles lerp(const CentileRow& lo, const CentileRow& hi, double ga) {
  if (hi.ga_days == lo.ga_days) return lo.centiles;
  const double t = (ga - lo.ga_days) / (hi.ga_days - lo.ga_days);
  auto mix = [t](double a, double b) { return a + t * (b - a); };
  return {mix(lo.centiles.c3, hi.centiles.c3), mix(lo.centiles.c50, hi.centiles.c50),
          mix(lo.centiles.c97, hi.centiles.c97)};
}

}  // namespace

GestationalAge GestationalAge::parse(std::string_view text) {
  text = trim(text);
  int weeks = 0;
  int days = 0;
  const auto w = text.find('w');
  const auto plus = text.find('+');
  if (w != std::string_view::npos) {
    std::string_view rest = text.substr(w + 1);
    if (!parse_int(text.substr(0, w), weeks)) throw ConfigError("bad gestational age: " + std::string(text));
    if (!rest.empty()) {
      if (rest.back() != 'd' || !parse_int(rest.substr(0, rest.size() - 1), days)) {
        throw ConfigError("bad gestational age: " + std::string(text));
      }
    }
  } else if (plus != std::string_view::npos) {
    if (!parse_int(text.substr(0, plus), weeks) || !parse_int(text.substr(plus + 1), days)) {
      throw ConfigError("bad gestational age: " + std::string(text));
    }
  } else if (!parse_int(text, days)) {
    throw ConfigError("bad gestational age: " + std::string(text));
  }
  if (weeks < 0 || days < 0 || (w != std::string_view::npos && days > 6)) {
    throw ConfigError("bad gestational age: " + std::string(text));
  }
  return from_weeks(weeks, days);
}

std::string GestationalAge::to_string() const {
  return std::to_string(weeks()) + "w" + std::to_string(day_of_week()) + "d";
}

GrowthChart GrowthChart::from_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::map<Biometric, std::vector<CentileRow>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto fields = split(content, ',');
    if (!header_seen) {
      const std::vector<std::string_view> expected = {"biometric", "ga_days", "c3_mm", "c50_mm",
                                                      "c97_mm"};
      if (fields != expected) {
        throw ConfigError("growth chart line " + std::to_string(line_no) +
                          ": expected header biometric,ga_days,c3_mm,c50_mm,c97_mm");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 5) {
      throw ConfigError("growth chart line " + std::to_string(line_no) + ": expected 5 fields");
    }
    const auto b = parse_biometric(fields[0]);
    CentileRow row;
    if (!b || !parse_double(fields[1], row.ga_days) || !parse_double(fields[2], row.centiles.c3) ||
        !parse_double(fields[3], row.centiles.c50) || !parse_double(fields[4], row.centiles.c97)) {
      throw ConfigError("growth chart line " + std::to_string(line_no) + ": malformed row");
    }
    rows[*b].push_back(row);
  }
  if (!header_seen) throw ConfigError("growth chart is empty");
  GrowthChart chart;
  for (auto& [b, curve] : rows) chart.set_curve(b, std::move(curve));
  return chart;
}

GrowthChart GrowthChart::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open growth chart " + path.string());
  return from_csv(in);
}

void GrowthChart::set_curve(Biometric b, std::vector<CentileRow> rows) {
  const std::string name(to_string(b));
  if (rows.size() < 2) throw ConfigError("growth chart for " + name + " needs at least two rows");
  std::sort(rows.begin(), rows.end(),
            [](const CentileRow& l, const CentileRow& r) { return l.ga_days < r.ga_days; });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& c = rows[i].centiles;
    if (!(c.c3 < c.c50 && c.c50 < c.c97)) {
      throw ConfigError("growth chart for " + name + ": centiles not ordered at GA day " +
                        std::to_string(rows[i].ga_days));
    }
    if (i == 0) continue;
    const auto& p = rows[i - 1];
    if (p.ga_days == rows[i].ga_days) {
      throw ConfigError("growth chart for " + name + ": duplicate GA day");
    }
    if (c.c3 < p.centiles.c3 || c.c50 < p.centiles.c50 || c.c97 < p.centiles.c97) {
      throw ConfigError("growth chart for " + name + ": centile curve decreases");
    }
  }
  curves_[b] = std::move(rows);
}

bool GrowthChart::has(Biometric b) const { return curves_.contains(b); }

const std::vector<CentileRow>& GrowthChart::curve(Biometric b) const {
  const auto it = curves_.find(b);
  if (it == curves_.end()) {
    throw ConfigError("growth chart has no curve for " + std::string(to_string(b)));
  }
  return it->second;
}

std::pair<double, double> GrowthChart::domain(Biometric b) const {
  const auto& c = curve(b);
  return {c.front().ga_days, c.back().ga_days};
}

Centiles GrowthChart::at(Biometric b, double ga_days) const {
  const auto& c = curve(b);
  if (!(ga_days >= c.front().ga_days && ga_days <= c.back().ga_days)) {
    throw GAOutOfRange("GA day " + std::to_string(ga_days) + " outside chart range for " +
                       std::string(to_string(b)));
  }
  const auto hi = std::lower_bound(
      c.begin(), c.end(), ga_days,
      [](const CentileRow& row, double ga) { return row.ga_days < ga; });
  if (hi == c.begin()) return hi->centiles;
  return lerp(*(hi - 1), *hi, ga_days);
}

Centiles GrowthChart::at_clamped(Biometric b, double ga_days) const {
  const auto [lo, hi] = domain(b);
  return at(b, std::clamp(ga_days, lo, hi));
}

void GrowthChart::write_csv(std::ostream& out) const {
  const auto old_precision = out.precision(12);
  out << "biometric,ga_days,c3_mm,c50_mm,c97_mm\n";
  for (const auto& [b, rows] : curves_) {
    for (const auto& r : rows) {
      out << to_string(b) << ',' << r.ga_days << ',' << r.centiles.c3 << ',' << r.centiles.c50
          << ',' << r.centiles.c97 << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace wholescan
