#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

#include "wholescan/calibration.hpp"
#include "wholescan/estimator.hpp"
#include "wholescan/geometry.hpp"
#include "wholescan/growth_chart.hpp"

namespace wholescan {

struct GateConfig {
  double confidence_min = 0.95;
  double dsc_min = 0.6;
  double dsc_binarize_at = 0.5;
  double head_ecc_min = 0.25;
  double head_ecc_max = 0.8;
  double abdomen_ecc_max = 0.6;

  // Throws ConfigError.
  void validate() const;
};

struct GeometryConfig {
  double kernel_sigma_px = 2.0;
  double intensity_floor = geometry::kDefaultIntensityFloor;
  double min_separation_px = geometry::kDefaultMinSeparationPx;
  double peak_floor = geometry::kDefaultPeakFloor;

  void validate() const;
};

struct RunConfig {
  std::optional<GestationalAge> ga;
  GateConfig gates;
  estimator::EstimatorConfig estimator;
  GeometryConfig geometry;
  calibration::TickSpec ticks;
  bool strict = false;

  void validate() const;
};

// JSON object with optional sections "gates", "estimator", "geometry",
// "ticks" and top-level "ga" and "strict". Unknown keys are rejected so typos
// do not silently fall back to defaults. Throws ConfigError.
RunConfig run_config_from_json(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace wholescan
