#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wholescan/agreement.hpp"
#include "wholescan/calibration.hpp"
#include "wholescan/config.hpp"
#include "wholescan/error.hpp"
#include "wholescan/growth_chart.hpp"
#include "wholescan/mixture_fit.hpp"
#include "wholescan/pipeline.hpp"
#include "wholescan/records.hpp"
#include "wholescan/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wholescan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 1;
constexpr int kExitConfig = 2;
constexpr int kExitFailure = 3;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return in;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_number(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "not a number: '" + s + "'");
  }
  if (used != s.size()) throw ParseError(line, "not a number: '" + s + "'");
  return v;
}

// Numbers from a CSV: either one column or the named column. A leading
// non-numeric row is taken as a header.
std::vector<double> read_number_column(std::istream& in, const std::string& column) {
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> col;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line, ',');
    if (!col) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == column) col = i;
      }
      if (col) continue;
      col = 0;
    }
    const std::size_t i = cells.size() == 1 ? 0 : *col;
    if (i >= cells.size()) throw ParseError(line_no, "missing column '" + column + "'");
    out.push_back(to_number(cells[i], line_no));
  }
  return out;
}

// Scan-line samples: comma- or newline-separated numbers.
std::vector<double> read_samples(std::istream& in) {
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    for (const auto& cell : split(line, ',')) {
      if (!cell.empty()) out.push_back(to_number(cell, line_no));
    }
  }
  return out;
}

calibration::TickSpec parse_ticks(const std::string& text) {
  // "50:10,5" = 50 mm major ticks with 10 mm and 5 mm minor ticks.
  calibration::TickSpec t;
  const auto colon = text.find(':');
  try {
    t.major_mm = std::stod(text.substr(0, colon));
    t.minor_mm.clear();
    if (colon != std::string::npos) {
      for (const auto& s : split(text.substr(colon + 1), ',')) {
        if (!s.empty()) t.minor_mm.push_back(std::stod(s));
      }
    }
    t.validate();
  } catch (const std::exception& e) {
    throw ConfigError("bad tick spec '" + text + "': " + e.what());
  }
  return t;
}

std::pair<double, double> parse_bounds(const std::string& text) {
  const auto parts = split(text, ',');
  try {
    if (parts.size() == 2) {
      const double lower = std::stod(parts[0]), upper = std::stod(parts[1]);
      if (lower < upper) return {lower, upper};
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("bounds must be 'lower,upper' with lower < upper, got '" + text + "'");
}

json stats_json(const agreement::AgreementStats& s) {
  json j = {{"n", s.n},           {"bias_mm", s.bias_mm}, {"bias_pct", s.bias_pct},
            {"msd_mm", s.msd_mm}, {"msd_pct", s.msd_pct}, {"mad_mm", s.mad_mm},
            {"mad_pct", s.mad_pct}, {"sd_mm", s.sd_mm},   {"sd_pct", s.sd_pct}};
  json rows = json::array();
  for (const auto& r : s.rows) rows.push_back({{"mean_mm", r.mean}, {"difference_mm", r.difference}});
  j["bland_altman"] = rows;
  if (s.within_limits) j["within_limits"] = *s.within_limits;
  return j;
}

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    open_out(out_path) << j.dump(2) << '\n';
  }
}

int cmd_scenario(const std::string& chart_path, const std::string& ga, std::uint64_t seed,
                 const std::string& out_path) {
  const auto chart = GrowthChart::load(chart_path);
  const auto sc = sim::default_scenario(chart, GestationalAge::parse(ga), seed);
  if (out_path.empty() || out_path == "-") {
    std::cout << sim::scenario_to_json(sc) << '\n';
  } else {
    open_out(out_path) << sim::scenario_to_json(sc) << '\n';
  }
  return kExitOk;
}

int cmd_simulate(const std::string& scenario_path, std::optional<std::uint64_t> seed,
                 const std::string& out_path, const std::string& oracle_path) {
  auto sc = sim::load_scenario(scenario_path);
  if (seed) sc.seed = *seed;
  const auto stream = sim::simulate_stream(sc);
  auto out = open_out(out_path);
  write_jsonl(out, stream.records);
  if (!oracle_path.empty()) {
    auto oracle = open_out(oracle_path);
    oracle << "frame,biometric,from_truth,value_mm\n";
    for (const auto& e : stream.oracle) {
      oracle << stream.records[e.record_index].frame << ',' << to_string(e.biometric) << ','
             << (e.from_truth ? 1 : 0) << ',' << json(e.value_mm).dump() << '\n';
    }
  }
  return kExitOk;
}

int cmd_run(const std::string& in_path, const std::string& chart_path,
            const std::string& config_path, const std::string& report_path,
            const std::string& timeseries_path, bool strict, const std::string& ga) {
  const auto chart = GrowthChart::load(chart_path);
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  if (strict) cfg.strict = true;
  if (!ga.empty()) cfg.ga = GestationalAge::parse(ga);
  auto in = open_in(in_path);
  std::optional<std::ofstream> ts;
  if (!timeseries_path.empty()) ts = open_out(timeseries_path);
  const auto report = pipeline::run(in, chart, cfg, ts ? &*ts : nullptr);
  for (const auto& d : report.diagnostics) {
    std::cerr << "warning: line " << d.line << " skipped: " << d.message << '\n';
  }
  if (report_path.empty() || report_path == "-") {
    std::cout << pipeline::report_to_json(report) << '\n';
  } else {
    open_out(report_path) << pipeline::report_to_json(report) << '\n';
  }
  return kExitOk;
}

int cmd_fit_dist(const std::string& in_path, const std::string& bounds_text,
                 const std::string& out_path, const std::string& biometric_name) {
  const auto [lower, upper] = parse_bounds(bounds_text);
  const auto b = parse_biometric(biometric_name);
  if (!b) throw ConfigError("unknown biometric '" + biometric_name + "'");
  auto in = open_in(in_path);
  std::vector<double> samples;
  if (fs::path(in_path).extension() == ".jsonl") {
    const auto parsed = ingest(in, true);
    for (const auto& r : parsed.records) {
      if (const auto* m = std::get_if<MeasurementPayload>(&r.payload)) {
        if (const auto it = m->values_mm.find(*b); it != m->values_mm.end()) samples.push_back(it->second);
      }
    }
  } else {
    samples = read_number_column(in, "value_mm");
  }
  const auto start = std::chrono::steady_clock::now();
  const auto fit = estimator::fit_mixture_batch(samples, lower, upper);
  std::vector<double> inside;
  for (double x : samples) {
    if (x >= lower && x <= upper) inside.push_back(x);
  }
  const double ks = estimator::empirical_cdf_distance(inside, fit);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  emit({{"biometric", std::string(to_string(*b))},
        {"n", inside.size()},
        {"n_ignored", samples.size() - inside.size()},
        {"p_t", fit.p_t},
        {"mu_mm", fit.mu},
        {"sigma_mm", fit.sigma},
        {"lower_mm", fit.lower},
        {"upper_mm", fit.upper},
        {"mean_log_likelihood", fit.log_likelihood},
        {"iterations", fit.iterations},
        {"converged", fit.converged},
        {"ks_statistic", ks},
        {"seconds", seconds}},
       out_path);
  return kExitOk;
}

int cmd_calibrate(const std::string& scanline_path, const std::string& ticks_text) {
  const auto ticks = parse_ticks(ticks_text);
  auto in = open_in(scanline_path);
  std::optional<calibration::ScanLine> line;
  try {
    line.emplace(read_samples(in));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scan line rejected: ") + e.what());
  }
  const auto est = calibration::estimate_scale(*line, ticks);
  emit({{"mm_per_px", est.scale.mm_per_px()},
        {"fundamental_lag_px", est.fundamental_lag},
        {"measured_lag_px", est.measured_lag},
        {"spacing_mm", est.spacing_mm}},
       "-");
  return kExitOk;
}

std::optional<agreement::DifferenceLimits> read_limits(const std::string& path, Biometric b) {
  if (path.empty()) return std::nullopt;
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cells = split(trim(line), ',');
    if (cells.size() != 3 || cells[0] == "biometric" || cells[0].empty() || cells[0][0] == '#') continue;
    if (parse_biometric(cells[0]) == b) {
      return agreement::DifferenceLimits{to_number(cells[1], line_no), to_number(cells[2], line_no)};
    }
  }
  return std::nullopt;
}

int cmd_compare(const std::vector<std::string>& reports, const std::string& reference_path,
                const std::string& limits_path, const std::string& out_path) {
  // reference CSV: report,biometric,reference_mm where report is the report file stem.
  std::map<Biometric, std::map<std::string, double>> est, ref;
  for (const auto& path : reports) {
    const auto r = pipeline::load_report(path);
    for (const auto& [b, rep] : r.biometrics) {
      if (rep.final.n_accepted > 0) est[b][fs::path(path).stem().string()] = rep.final.mu;
    }
  }
  auto in = open_in(reference_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line, ',');
    if (cells.size() != 3) throw ParseError(line_no, "expected report,biometric,reference_mm");
    if (cells[0] == "report") continue;
    const auto b = parse_biometric(cells[1]);
    if (!b) throw ParseError(line_no, "unknown biometric '" + cells[1] + "'");
    ref[*b][cells[0]] = to_number(cells[2], line_no);
  }
  json out = json::object();
  for (const auto& [b, values] : est) {
    if (!ref.contains(b)) continue;
    try {
      out[std::string(to_string(b))] = stats_json(agreement::compare(values, ref[b], read_limits(limits_path, b)));
    } catch (const EmptyIntersection&) {
    }
  }
  if (out.empty()) throw EmptyIntersection("no report matches any reference row");
  emit(out, out_path);
  return kExitOk;
}

int cmd_test_retest(const std::vector<std::string>& a, const std::vector<std::string>& b,
                    const std::string& out_path) {
  if (a.size() != b.size()) throw ConfigError("--a and --b need the same number of reports");
  std::vector<std::pair<pipeline::RunReport, pipeline::RunReport>> pairs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pairs.emplace_back(pipeline::load_report(a[i]), pipeline::load_report(b[i]));
  }
  const auto results = agreement::test_retest(pairs);
  json out = json::object();
  for (const auto& [bio, t] : results) {
    json entry = stats_json(t.stats);
    entry["pairs"] = t.pairs;
    entry["excluded"] = t.excluded;
    entry["predicted_sd_mm"] = t.predicted_sd_mm;
    out[std::string(to_string(bio))] = entry;
  }
  emit(out, out_path);
  return kExitOk;
}

int cmd_ci_coverage(const std::vector<std::string>& reports, const std::string& scenario_path,
                    const std::string& out_path) {
  const auto sc = sim::load_scenario(scenario_path);
  std::map<Biometric, double> truth;
  for (const auto& [b, t] : sc.biometrics) truth[b] = t.true_mm + sc.operator_offset_mm;
  std::vector<pipeline::RunReport> loaded;
  for (const auto& path : reports) loaded.push_back(pipeline::load_report(path));
  json out = json::object();
  for (const auto& [b, c] : agreement::ci_coverage(loaded, truth)) {
    out[std::string(to_string(b))] = {{"n", c.n}, {"covered", c.covered}, {"fraction", c.fraction()}};
  }
  emit(out, out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-scan fetal biometry estimation"};
  app.require_subcommand(1);

  std::string chart, ga, out, scenario, in, config, report, timeseries, bounds, biometric = "FL";
  std::string scanline, ticks = "50:10,5", reference, limits, oracle;
  std::uint64_t seed = 0;
  bool strict = false;
  std::vector<std::string> reports, side_a, side_b;

  auto* scen = app.add_subcommand("scenario", "Write the default 20-minute scenario as JSON");
  scen->add_option("--chart", chart, "Growth chart CSV")->required();
  scen->add_option("--ga", ga, "Gestational age, e.g. 20w3d")->required();
  scen->add_option("--seed", seed, "Random seed");
  scen->add_option("--out", out, "Output file (default stdout)");

  auto* simc = app.add_subcommand("simulate", "Generate a JSONL frame stream from a scenario");
  simc->add_option("--scenario", scenario, "Scenario JSON")->required();
  auto* seed_opt = simc->add_option("--seed", seed, "Override the scenario seed");
  simc->add_option("--out", out, "Output JSONL")->required();
  simc->add_option("--oracle", oracle, "Optional CSV of true component labels");

  auto* runc = app.add_subcommand("run", "Estimate biometrics from a JSONL frame stream");
  runc->add_option("--in", in, "Input JSONL")->required();
  runc->add_option("--chart", chart, "Growth chart CSV")->required();
  runc->add_option("--config", config, "Run config JSON");
  runc->add_option("--report", report, "Report JSON (default stdout)");
  runc->add_option("--timeseries", timeseries, "Time-series CSV");
  runc->add_option("--ga", ga, "Override the config's gestational age");
  runc->add_flag("--strict", strict, "Abort on the first malformed line");

  auto* fit = app.add_subcommand("fit-dist", "Fit the Gaussian + uniform mixture to a batch");
  fit->add_option("--in", in, "JSONL stream or CSV of measurements")->required();
  fit->add_option("--bounds", bounds, "Uniform support 'lower,upper' in mm")->required();
  fit->add_option("--out", out, "Output JSON (default stdout)");
  fit->add_option("--biometric", biometric, "Biometric to take from a JSONL stream");

  auto* cal = app.add_subcommand("calibrate", "Pixel size from a scale-bar scan line");
  cal->add_option("--scanline", scanline, "CSV of intensities in [0, 1]")->required();
  cal->add_option("--ticks", ticks, "Tick spec 'major:minor,minor' in mm");

  auto* eval = app.add_subcommand("evaluate", "Agreement statistics over run reports");
  eval->require_subcommand(1);
  auto* cmp = eval->add_subcommand("compare", "Estimates against reference values");
  cmp->add_option("--reports", reports, "Report JSON files")->required();
  cmp->add_option("--reference", reference, "CSV report,biometric,reference_mm")->required();
  cmp->add_option("--limits", limits, "CSV biometric,lower_mm,upper_mm");
  cmp->add_option("--out", out, "Output JSON (default stdout)");
  auto* trt = eval->add_subcommand("test-retest", "Paired-scan repeatability");
  trt->add_option("--a", side_a, "Reports of the first scans")->required();
  trt->add_option("--b", side_b, "Reports of the second scans")->required();
  trt->add_option("--out", out, "Output JSON (default stdout)");
  auto* cov = eval->add_subcommand("ci-coverage", "Credible-interval coverage against a scenario");
  cov->add_option("--reports", reports, "Report JSON files")->required();
  cov->add_option("--scenario", scenario, "Scenario holding the true values")->required();
  cov->add_option("--out", out, "Output JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (scen->parsed()) return cmd_scenario(chart, ga, seed, out);
    if (simc->parsed()) {
      return cmd_simulate(scenario, seed_opt->count() > 0 ? std::optional(seed) : std::nullopt, out, oracle);
    }
    if (runc->parsed()) return cmd_run(in, chart, config, report, timeseries, strict, ga);
    if (fit->parsed()) return cmd_fit_dist(in, bounds, out, biometric);
    if (cal->parsed()) return cmd_calibrate(scanline, ticks);
    if (cmp->parsed()) return cmd_compare(reports, reference, limits, out);
    if (trt->parsed()) return cmd_test_retest(side_a, side_b, out);
    if (cov->parsed()) return cmd_ci_coverage(reports, scenario, out);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidScenario& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const GAOutOfRange& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
