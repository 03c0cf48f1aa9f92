#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <vector>

#include "doctest.h"
#include "wholescan/calibration.hpp"
#include "wholescan/error.hpp"
#include "wholescan/geometry.hpp"
#include "wholescan/growth_chart.hpp"
#include "wholescan/simulator.hpp"

using namespace wholescan;
using namespace wholescan::sim;

namespace {

ScanScenario femur_scenario(double p_t, double sigma, double seconds, std::uint64_t seed) {
  ScanScenario sc;
  sc.biometrics[Biometric::FL] = {33.0, p_t, sigma, 20.2, 45.8};
  sc.schedule = {{Plane::Femur, seconds}};
  sc.seed = seed;
  return sc;
}

std::vector<double> fl_values(const SimulatedStream& s) {
  std::vector<double> out;
  for (const auto& e : s.oracle) out.push_back(e.value_mm);
  return out;
}

double mixture_cdf(double x, double p_t, double mu, double sigma, double lo, double hi) {
  const double normal = 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
  const double uniform = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
  return p_t * normal + (1.0 - p_t) * uniform;
}

}  // namespace

TEST_CASE("near-deterministic truth") {
  const auto s = simulate_stream(femur_scenario(1.0, 1e-9, 10.0, 1));
  REQUIRE(s.oracle.size() == 300);
  for (const auto& e : s.oracle) {
    CHECK(e.from_truth);
    CHECK(e.value_mm == doctest::Approx(33.0).epsilon(1e-9));
  }
}

TEST_CASE("Gaussian-component frames average to the truth") {
  const auto s = simulate_stream(femur_scenario(0.79, 1.8, 10000.0 / 30.0, 2));
  double sum = 0.0;
  std::size_t n = 0, truth = 0;
  for (const auto& e : s.oracle) {
    if (!e.from_truth) continue;
    sum += e.value_mm;
    ++n;
  }
  truth = n;
  CHECK(s.oracle.size() == 10000);
  CHECK(std::abs(sum / n - 33.0) <= 3 * 1.8 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(static_cast<double>(truth) / 10000.0 - 0.79) < 0.015);
}

TEST_CASE("measurement marginal matches the generative mixture") {
  const auto s = simulate_stream(femur_scenario(0.79, 1.8, 10000.0 / 30.0, 3));
  auto xs = fl_values(s);
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = mixture_cdf(xs[i], 0.79, 33.0, 1.8, 20.2, 45.8);
    ks = std::max({ks, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  CHECK(ks < 0.02);
}

TEST_CASE("nuisance draws stay inside the bounds") {
  const auto s = simulate_stream(femur_scenario(0.0, 1.8, 100.0, 4));
  for (const auto& e : s.oracle) {
    CHECK_FALSE(e.from_truth);
    CHECK(e.value_mm >= 20.2);
    CHECK(e.value_mm <= 45.8);
  }
}

TEST_CASE("streams are deterministic in the seed") {
  auto sc = femur_scenario(0.79, 1.8, 20.0, 5);
  sc.schedule.insert(sc.schedule.begin(), {Plane::Other, 5.0});
  sc.scale_schedule = {{0.4, 25.0}};
  sc.emit_scanline = true;
  sc.scanline_length = 400;
  sc.freezes = {{6.0, 1.0}};
  const auto a = simulate_stream(sc);
  const auto b = simulate_stream(sc);
  CHECK(a.records == b.records);
  sc.seed = 6;
  CHECK_FALSE(simulate_stream(sc).records == a.records);

  std::size_t frozen = 0;
  for (const auto& r : a.records) frozen += r.frozen;
  CHECK(frozen == 30);
  for (const auto& r : a.records) {
    CHECK(r.scanline.has_value());
    CHECK_FALSE(r.scale_mm_per_px.has_value());
  }
}

TEST_CASE("scenario validation") {
  auto sc = femur_scenario(0.79, 1.8, 10.0, 1);
  CHECK_NOTHROW(sc.validate());
  auto bad = sc;
  bad.biometrics[Biometric::FL].sigma_mm = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidScenario);
  bad = sc;
  bad.biometrics[Biometric::FL].true_mm = 50.0;
  CHECK_THROWS_AS(bad.validate(), InvalidScenario);
  bad = sc;
  bad.schedule[0].duration_s = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidScenario);
  bad = sc;
  bad.schedule.push_back({Plane::BrainTV, 1.0});
  CHECK_THROWS_AS(bad.validate(), InvalidScenario);
  bad = sc;
  bad.payload = PayloadMode::Heatmap;
  CHECK_THROWS_AS(bad.validate(), InvalidScenario);
  bad.scale_schedule = {{0.05, 10.0}};
  CHECK_THROWS_AS(bad.validate(), InvalidScenario);  // femur does not fit the grid
  bad.scale_schedule = {{0.4, 10.0}};
  CHECK_NOTHROW(bad.validate());
}

TEST_CASE("scenario JSON round trip and schema errors") {
  auto sc = femur_scenario(0.79, 1.8, 10.0, 77);
  sc.scale_schedule = {{0.4, 10.0}};
  sc.freezes = {{1.0, 0.5}};
  sc.payload = PayloadMode::Annotation;
  sc.operator_offset_mm = 0.5;
  sc.confidence = default_confidence_models();
  const auto again = scenario_from_json(scenario_to_json(sc));
  CHECK(simulate_stream(again).records == simulate_stream(sc).records);

  CHECK_THROWS_AS(scenario_from_json("[]"), InvalidScenario);
  CHECK_THROWS_AS(scenario_from_json(R"({"payload":"video"})"), InvalidScenario);
  CHECK_THROWS_AS(scenario_from_json(R"({"biometrics":{"XX":{}}})"), InvalidScenario);
  CHECK_THROWS_AS(scenario_from_json(R"({"schedule":[{"plane":"Moon","duration_s":1}]})"), InvalidScenario);
  CHECK_THROWS_AS(scenario_from_json(R"({"schedule":[]})"), InvalidScenario);
  CHECK_THROWS_AS(load_scenario("/nonexistent.json"), ConfigError);
}

TEST_CASE("shipped scenarios load") {
  const std::filesystem::path dir = std::filesystem::path(WHOLESCAN_DATA_DIR) / "scenarios";
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_scenario(entry.path()));
  }
}

TEST_CASE("default scenario") {
  const auto chart = GrowthChart::load(std::filesystem::path(WHOLESCAN_DATA_DIR) / "synthetic_chart.csv");
  const auto sc = default_scenario(chart, GestationalAge::from_weeks(20, 3), 1);
  CHECK(sc.frame_count() == 36000);
  CHECK(sc.biometrics.size() == 5);
  CHECK(sc.biometrics.at(Biometric::FL).true_mm == doctest::Approx(33.0));

  // Confidence above 0.95 in roughly the published per-plane fractions.
  const auto stream = simulate_stream(sc);
  std::map<Plane, std::pair<int, int>> seen;
  for (const auto& r : stream.records) {
    auto& [n, hi] = seen[r.plane];
    ++n;
    hi += r.conf > 0.95;
  }
  const std::map<Plane, double> expected = {
      {Plane::BrainTV, 0.835}, {Plane::BrainCB, 0.821}, {Plane::Abdominal, 0.732}, {Plane::Femur, 0.664}};
  for (const auto& [plane, frac] : expected) {
    const auto [n, hi] = seen[plane];
    CAPTURE(to_string(plane));
    CHECK(std::abs(static_cast<double>(hi) / n - frac) < 0.03);
  }
}

TEST_CASE("simulate_scalebar") {
  const calibration::TickSpec ten{10.0, {}};
  const auto line = simulate_scalebar(0.4, ten, 400, 0.0);
  const auto hp = calibration::highpass(line.samples());
  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < hp.size(); ++i) {
    if (hp[i] > 0.2 && hp[i] >= hp[i - 1] && hp[i] > hp[i + 1]) peaks.push_back(i);
  }
  REQUIRE(peaks.size() >= 10);
  for (std::size_t k = 1; k < peaks.size(); ++k) CHECK(peaks[k] - peaks[k - 1] == 25);

  for (double mm : {0.2, 0.4, 0.8}) {
    const calibration::TickSpec ticks;
    const auto est = calibration::estimate_scale(simulate_scalebar(mm, ticks, 1024, 0.0), ticks);
    CHECK(std::abs(est.scale.mm_per_px() - mm) / mm <= 1.0 / est.measured_lag);
  }
  CHECK_THROWS_AS(simulate_scalebar(0.4, {}, 200, 0.0), InvalidScenario);
  CHECK_THROWS_AS(simulate_scalebar(0.4, {}, 32, 0.0), InvalidScenario);
  CHECK(simulate_scalebar(0.4, {}, 1024, 0.05, 3).samples().size() == 1024);
}

TEST_CASE("heatmap frames and corruptions") {
  using namespace geometry;
  const LinearEndpoints lin{{30.0, 64.0}, {90.0, 64.0}};
  const auto ell = EllipseOutline{make_ellipse({64, 64}, 38, 50, 0.7)};

  CHECK(simulate_heatmap_frame(lin, 2.0, 128, 128, Corruption::None) ==
        reconstruct_heatmap(lin, 2.0, 128, 128));

  const auto m = linear_biometric(simulate_heatmap_frame(lin, 2.0, 128, 128, Corruption::None), PixelScale(1));
  CHECK(std::abs(m.length_mm - 60.0) <= 0.5);

  CHECK_THROWS_AS(linear_biometric(simulate_heatmap_frame(lin, 2.0, 128, 128, Corruption::MissingEndpoint),
                                   PixelScale(1)),
                  SingleMaximum);

  const auto smeared = simulate_heatmap_frame(ell, 2.0, 128, 128, Corruption::Smear, 1);
  CHECK(dsc(reconstruct_heatmap(ell, 2.0, 128, 128), smeared, 0.5) < 0.6);
  const auto refit = heatmap_to_ellipse(smeared);
  CHECK(dsc(reconstruct_heatmap(EllipseOutline{refit}, 2.0, 128, 128), smeared, 0.5) < 0.6);

  const auto blob = simulate_heatmap_frame(ell, 2.0, 128, 128, Corruption::ExtraBlob, 2);
  CHECK_FALSE(blob == reconstruct_heatmap(ell, 2.0, 128, 128));

  CHECK_THROWS_AS(simulate_heatmap_frame(LinearEndpoints{{-5, 0}, {10, 10}}, 2.0, 64, 64, Corruption::None),
                  OutOfBounds);
}

TEST_CASE("paired scans") {
  PairedScanPair p;
  p.base = femur_scenario(0.79, 1.8, 30.0, 0);
  p.seed_a = p.seed_b = 4;
  CHECK_THROWS_AS(simulate_paired_scans(p), InvalidScenario);
  p.seed_b = 5;
  p.offset_a_mm = 0.5;
  p.offset_b_mm = -0.5;
  const auto [a, b] = simulate_paired_scans(p);
  CHECK_FALSE(a.records == b.records);
  double ma = 0, mb = 0;
  int na = 0, nb = 0;
  for (const auto& e : a.oracle) if (e.from_truth) { ma += e.value_mm; ++na; }
  for (const auto& e : b.oracle) if (e.from_truth) { mb += e.value_mm; ++nb; }
  CHECK(ma / na - mb / nb == doctest::Approx(1.0).epsilon(0.4));
}
