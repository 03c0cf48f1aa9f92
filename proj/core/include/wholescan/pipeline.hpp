#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wholescan/biometric.hpp"
#include "wholescan/config.hpp"
#include "wholescan/estimator.hpp"
#include "wholescan/geometry.hpp"
#include "wholescan/growth_chart.hpp"
#include "wholescan/records.hpp"

namespace wholescan::pipeline {

// Where a (frame, biometric) pair ended up. Every routed pair gets exactly one.
enum class Disposition { Accepted, Frozen, Confidence, Geometry, Eccentricity, Dsc, Plausibility };

inline constexpr std::array<Disposition, 7> kAllDispositions = {
    Disposition::Accepted,     Disposition::Frozen, Disposition::Confidence,
    Disposition::Geometry,     Disposition::Eccentricity, Disposition::Dsc,
    Disposition::Plausibility};

std::string_view to_string(Disposition d);

struct GateOutcome {
  Biometric biometric = Biometric::FL;
  Disposition disposition = Disposition::Accepted;
  std::optional<double> value_mm;  // set once geometry extraction succeeded
  std::string detail;
};

// Resolves the pixel scale of each frame: explicit value, then the frame's
// scan line, then the last scale seen.
class ScaleTracker {
 public:
  explicit ScaleTracker(calibration::TickSpec ticks = {}) : ticks_(std::move(ticks)) {}

  // Only call when the frame needs a scale; scan lines are not calibrated
  // otherwise.
  std::optional<geometry::PixelScale> resolve(const FrameRecord& fr);
  std::optional<geometry::PixelScale> last() const { return last_; }

 private:
  calibration::TickSpec ticks_;
  std::optional<geometry::PixelScale> last_;
};

using EstimatorMap = std::map<Biometric, estimator::BiometricEstimator>;

// Runs one frame through frozen -> confidence -> geometry -> eccentricity ->
// DSC -> plausibility and updates the estimator of every biometric that
// passes. Frames whose plane carries no biometric, or whose biometrics have
// no estimator, return no outcomes.
std::vector<GateOutcome> gate_chain(const FrameRecord& fr, const RunConfig& cfg,
                                    ScaleTracker& scales, EstimatorMap& states);

struct SeriesPoint {
  std::uint64_t frame = 0;
  double t = 0.0;
  estimator::EstimateSnapshot snapshot;
};

struct BiometricReport {
  estimator::EstimateSnapshot prior;
  estimator::EstimateSnapshot final;
  std::vector<SeriesPoint> series;
  std::map<Disposition, std::uint64_t> counts;
  std::uint64_t routed = 0;

  // accepted / routed, 0 when nothing was routed.
  double acceptance_fraction() const;
  // accepted / frames that produced a valid measurement (past the geometry gate).
  double geometry_valid_acceptance() const;
  std::uint64_t count(Disposition d) const;
};

struct RunReport {
  std::map<Biometric, BiometricReport> biometrics;
  std::uint64_t total_frames = 0;
  std::uint64_t unrouted_frames = 0;
  std::vector<ParseDiagnostic> diagnostics;
};

// Row of the time-series CSV, emitted once per accepted measurement.
struct TimeSeriesRow {
  std::uint64_t frame = 0;
  double t = 0.0;
  Biometric biometric = Biometric::FL;
  estimator::EstimateSnapshot snapshot;
};

inline constexpr std::string_view kTimeSeriesHeader =
    "frame,t,biometric,mu_mm,sigma_hat_mm,ci_low_mm,ci_high_mm,p_t,n_accepted";

void write_timeseries_row(std::ostream& out, const TimeSeriesRow& row);

// Stateful single-consumer runner. Estimators are created for every charted
// biometric whose curve covers the configured gestational age.
class Runner {
 public:
  // Throws ConfigError if cfg has no gestational age or is invalid, and
  // GAOutOfRange if no chart curve covers it.
  Runner(const GrowthChart& chart, RunConfig cfg);

  std::vector<GateOutcome> process(const FrameRecord& fr);

  // Receives one row per accepted measurement, in frame order.
  void set_timeseries_sink(std::ostream* out);

  const RunReport& report() const { return report_; }
  RunReport take_report() { return std::move(report_); }
  const EstimatorMap& estimators() const { return states_; }

 private:
  RunConfig cfg_;
  ScaleTracker scales_;
  EstimatorMap states_;
  RunReport report_;
  std::ostream* timeseries_ = nullptr;
};

RunReport run(const std::vector<FrameRecord>& records, const GrowthChart& chart,
              const RunConfig& cfg, std::ostream* timeseries = nullptr);

// Streams JSONL records. ParseError propagates only in strict mode (cfg.strict);
// otherwise malformed lines land in RunReport::diagnostics.
RunReport run(std::istream& jsonl, const GrowthChart& chart, const RunConfig& cfg,
              std::ostream* timeseries = nullptr);

// Stable field names; see README. The series is optional since it can be
// large and duplicates the time-series CSV.
std::string report_to_json(const RunReport& r, bool include_series = true);
// Throws ConfigError on malformed input.
RunReport report_from_json(std::string_view text);
RunReport load_report(const std::filesystem::path& path);

}  // namespace wholescan::pipeline
