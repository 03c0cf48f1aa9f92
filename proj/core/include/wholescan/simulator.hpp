#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wholescan/biometric.hpp"
#include "wholescan/calibration.hpp"
#include "wholescan/geometry.hpp"
#include "wholescan/growth_chart.hpp"
#include "wholescan/records.hpp"

namespace wholescan::sim {

// Generative parameters of one biometric: with probability p_t a frame
// measures N(true_mm, sigma_mm^2), otherwise U(lower, upper).
struct BiometricTruth {
  double true_mm = 0.0;
  double p_t = 0.79;
  double sigma_mm = 1.8;
  double lower = 0.0;
  double upper = 0.0;
};

// Classifier confidence is sigmoid(N(mean_logit, sd_logit^2)).
struct ConfidenceModel {
  double mean_logit = 4.0;
  double sd_logit = 1.0;
};

struct PlaneVisit {
  Plane plane = Plane::Other;
  double duration_s = 0.0;
};

struct ScaleSegment {
  double mm_per_px = 0.0;
  double duration_s = 0.0;
};

struct FreezeSegment {
  double start_s = 0.0;
  double duration_s = 0.0;
};

enum class PayloadMode { Measurement, Annotation, Heatmap };

std::string_view to_string(PayloadMode m);

struct HeatmapSettings {
  std::size_t size_px = 128;
  double kernel_sigma_px = 2.0;
  double head_axis_ratio = 0.759;     // cephalic index / 100
  double abdomen_axis_ratio = 0.92;
};

struct ScanScenario {
  GestationalAge ga = GestationalAge::from_weeks(20, 3);
  std::map<Biometric, BiometricTruth> biometrics;
  double frame_rate = 30.0;
  std::vector<PlaneVisit> schedule;
  std::map<Plane, ConfidenceModel> confidence;
  // Last segment persists to the end of the scan. Empty means frames carry no
  // scale information, which only measurement payloads tolerate.
  std::vector<ScaleSegment> scale_schedule;
  bool emit_scanline = false;
  calibration::TickSpec ticks;
  std::size_t scanline_length = 1024;
  double scanline_noise = 0.02;
  std::vector<FreezeSegment> freezes;
  PayloadMode payload = PayloadMode::Measurement;
  HeatmapSettings heatmap;
  // Added to the Gaussian component mean of every biometric.
  double operator_offset_mm = 0.0;
  std::uint64_t seed = 0;

  // Throws InvalidScenario.
  void validate() const;
  std::size_t frame_count() const;
};

// Confidence means that reproduce the per-plane fractions of frames above
// 0.95 confidence reported for a trained plane classifier (sd_logit = 1).
std::map<Plane, ConfidenceModel> default_confidence_models();

// A 20-minute examination cycling through every biometric plane, true values
// at the chart's 50th centile and nuisance bounds equal to the estimator's
// plausibility window.
ScanScenario default_scenario(const GrowthChart& chart, GestationalAge ga, std::uint64_t seed);

// Throws InvalidScenario on schema violations. Missing keys keep defaults.
ScanScenario scenario_from_json(std::string_view text);
ScanScenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const ScanScenario& sc);

// Which mixture component produced a frame's measurement. Kept out of the
// FrameRecord so nothing on the estimation path can see it.
struct OracleEntry {
  std::size_t record_index = 0;
  Biometric biometric = Biometric::FL;
  bool from_truth = false;
  double value_mm = 0.0;
};

struct SimulatedStream {
  std::vector<FrameRecord> records;
  std::vector<OracleEntry> oracle;
};

SimulatedStream simulate_stream(const ScanScenario& sc);

// Renders a scale bar: brighter ticks for wider spacings, a slowly varying
// background and uniform noise in [-noise_amp, noise_amp].
calibration::ScanLine simulate_scalebar(double mm_per_px, const calibration::TickSpec& ticks,
                                        std::size_t length, double noise_amp,
                                        std::uint64_t seed = 0);

enum class Corruption { None, ExtraBlob, MissingEndpoint, Smear };

std::string_view to_string(Corruption c);

// Clean frames equal geometry::reconstruct_heatmap. ExtraBlob adds a spurious
// peak, MissingEndpoint keeps one endpoint (or a short arc of an ellipse),
// Smear wobbles an ellipse outline radially or streaks a linear annotation.
geometry::Heatmap simulate_heatmap_frame(const geometry::Annotation& ann, double kernel_sigma,
                                         std::size_t width, std::size_t height,
                                         Corruption corruption, std::uint64_t seed = 0);

struct PairedScanPair {
  ScanScenario base;
  std::uint64_t seed_a = 1;
  std::uint64_t seed_b = 2;
  double offset_a_mm = 0.0;
  double offset_b_mm = 0.0;
};

std::pair<SimulatedStream, SimulatedStream> simulate_paired_scans(const PairedScanPair& p);

}  // namespace wholescan::sim
