#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wholescan/geometry.hpp"

namespace wholescan::calibration {

inline constexpr std::size_t kMinScanLineLength = 64;

// Pixel intensities sampled along the scale-bar row of a frame.
class ScanLine {
 public:
  // Throws std::invalid_argument if shorter than kMinScanLineLength or any
  // value is non-finite or outside [0, 1].
  explicit ScanLine(std::vector<double> samples);

  std::size_t size() const noexcept { return samples_.size(); }
  std::span<const double> samples() const noexcept { return samples_; }
  double operator[](std::size_t i) const { return samples_[i]; }

 private:
  std::vector<double> samples_;
};

// Physical tick layout of the scale bar. Every minor spacing divides d_bar.
struct TickSpec {
  double major_mm = 50.0;
  std::vector<double> minor_mm = {10.0, 5.0};

  // Throws std::invalid_argument when the layout is inconsistent.
  void validate() const;
  double finest_mm() const;
};

// X' = max(X - X * G(sigma), 0) with a Gaussian truncated at +-4 sigma and
// half-sample symmetric boundaries. Output is not restricted to >= 64 samples
// so it is returned as a plain vector.
std::vector<double> highpass(std::span<const double> x, double sigma = 3.0);

// R(n) = sum_i x_i x_{i+n} for n in [0, size/2).
std::vector<double> autocorr(std::span<const double> x);

struct ScaleEstimate {
  geometry::PixelScale scale;
  double fundamental_lag = 0.0;  // px, spacing of the finest ticks
  double measured_lag = 0.0;     // px, lag actually used for the estimate
  double spacing_mm = 0.0;       // physical spacing matched to measured_lag
};

inline constexpr double kPeakProminence = 0.2;

// Full calibration result; pixel_size() keeps only the scale.
// Throws NoPeriodicity when no off-origin autocorrelation peak rises
// kPeakProminence * R(0) above the valleys on either side.
ScaleEstimate estimate_scale(const ScanLine& x, const TickSpec& ticks = {});

geometry::PixelScale pixel_size(const ScanLine& x, const TickSpec& ticks = {});

inline constexpr double kDefaultPixelEpsilon = 1.0 / 255.0;
inline constexpr double kDefaultFreezeThreshold = 0.95;

struct FramePair {
  geometry::Grid prev;
  geometry::Grid curr;
  double change_threshold = kDefaultFreezeThreshold;
};

// True iff more than change_threshold of pixels differ by at most
// pixel_epsilon. Throws DimensionMismatch on unequal frames.
bool detect_freeze(const FramePair& fp, double pixel_epsilon = kDefaultPixelEpsilon);

}  // namespace wholescan::calibration
