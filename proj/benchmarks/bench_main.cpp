#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>
#include <sstream>
#include <vector>

#include "wholescan/calibration.hpp"
#include "wholescan/estimator.hpp"
#include "wholescan/geometry.hpp"
#include "wholescan/mixture_fit.hpp"
#include "wholescan/pipeline.hpp"
#include "wholescan/records.hpp"
#include "wholescan/simulator.hpp"

using namespace wholescan;

namespace {

const GrowthChart& chart() {
  static const GrowthChart c =
      GrowthChart::load(std::filesystem::path(WHOLESCAN_DATA_DIR) / "synthetic_chart.csv");
  return c;
}

RunConfig config() {
  RunConfig cfg;
  cfg.ga = GestationalAge::from_weeks(20, 3);
  return cfg;
}

std::vector<double> femur_batch(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u01(0, 1), nuisance(20.2, 45.8);
  std::normal_distribution<double> truth(33.0, 1.8);
  std::vector<double> xs;
  while (xs.size() < n) {
    const double x = u01(rng) < 0.79 ? truth(rng) : nuisance(rng);
    if (x >= 20.2 && x <= 45.8) xs.push_back(x);
  }
  return xs;
}

}  // namespace

static void BM_EstimatorUpdate(benchmark::State& state) {
  const auto xs = femur_batch(4096);
  const auto init = estimator::init_estimator(Biometric::FL, GestationalAge::from_weeks(20, 3), chart());
  estimator::BiometricEstimator est(init);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(est.offer(xs[i++ & 4095]));
    if ((i & 4095) == 0) est = estimator::BiometricEstimator(init);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EstimatorUpdate);

static void BM_MixtureFit(benchmark::State& state) {
  const auto xs = femur_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimator::fit_mixture_batch(xs, 20.2, 45.8));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MixtureFit)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_Perimeter(benchmark::State& state) {
  double ratio = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(geometry::ellipse_perimeter_px(ratio * 40.0, 40.0));
    ratio = ratio < 1.0 ? ratio + 1e-3 : 0.5;
  }
}
BENCHMARK(BM_Perimeter);

static void BM_HeatmapToEllipse(benchmark::State& state) {
  const geometry::EllipseOutline head{geometry::make_ellipse({64, 64}, 38, 50, 0.3)};
  const auto h = geometry::reconstruct_heatmap(head, 2.0, 128, 128);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::heatmap_to_ellipse(h));
}
BENCHMARK(BM_HeatmapToEllipse)->Unit(benchmark::kMicrosecond);

static void BM_PixelSize(benchmark::State& state) {
  const auto line = sim::simulate_scalebar(0.4, {}, 1024, 0.05, 3);
  for (auto _ : state) benchmark::DoNotOptimize(calibration::pixel_size(line));
}
BENCHMARK(BM_PixelSize)->Unit(benchmark::kMicrosecond);

static void BM_PipelineJsonl(benchmark::State& state) {
  std::ostringstream out;
  write_jsonl(out, sim::simulate_stream(sim::default_scenario(chart(), GestationalAge::from_weeks(20, 3), 5)).records);
  const std::string text = out.str();
  std::uint64_t frames = 0;
  for (auto _ : state) {
    std::istringstream in(text);
    const auto report = pipeline::run(in, chart(), config());
    frames += report.total_frames;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(frames));
}
BENCHMARK(BM_PipelineJsonl)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
