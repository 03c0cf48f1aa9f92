#include "wholescan/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "wholescan/error.hpp"

namespace wholescan::calibration {

namespace {

std::size_t reflect(std::ptrdiff_t idx, std::size_t n) {
  const auto len = static_cast<std::ptrdiff_t>(n);
  // Half-sample symmetric: ... x1 x0 | x0 x1 ... x_{n-1} | x_{n-1} x_{n-2} ...
  while (idx < 0 || idx >= len) {
    if (idx < 0) idx = -idx - 1;
    if (idx >= len) idx = 2 * len - idx - 1;
  }
  return static_cast<std::size_t>(idx);
}

bool is_local_max(const std::vector<double>& r, std::size_t n) {
  return n >= 1 && n + 1 < r.size() && r[n] > r[n - 1] && r[n] >= r[n + 1];
}

// Vertex of the parabola through (n-1, n, n+1).
// Height of r[n] above the higher of the two valleys separating it from
// taller lags (or the ends of r).
double prominence(const std::vector<double>& r, std::size_t n) {
  double left = r[n];
  for (std::size_t k = n; k-- > 0;) {
    if (r[k] > r[n]) break;
    left = std::min(left, r[k]);
  }
  double right = r[n];
  for (std::size_t k = n + 1; k < r.size(); ++k) {
    if (r[k] > r[n]) break;
    right = std::min(right, r[k]);
  }
  return r[n] - std::max(left, right);
}

double refine_peak(const std::vector<double>& r, std::size_t n) {
  const double left = r[n - 1];
  const double mid = r[n];
  const double right = r[n + 1];
  const double denom = left - 2.0 * mid + right;
  if (denom >= 0.0) return static_cast<double>(n);
  const double offset = 0.5 * (left - right) / denom;
  return static_cast<double>(n) + std::clamp(offset, -0.5, 0.5);
}

bool is_multiple(double value, double base) {
  const double ratio = value / base;
  return std::abs(ratio - std::round(ratio)) < 1e-9 * std::max(1.0, ratio);
}

}  // namespace

ScanLine::ScanLine(std::vector<double> samples) : samples_(std::move(samples)) {
  if (samples_.size() < kMinScanLineLength) {
    throw std::invalid_argument("scan line needs at least " + std::to_string(kMinScanLineLength) +
                                " samples, got " + std::to_string(samples_.size()));
  }
  for (double v : samples_) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("scan line value outside [0, 1]");
  }
}

void TickSpec::validate() const {
  if (!(major_mm > 0.0) || !std::isfinite(major_mm)) {
    throw std::invalid_argument("major tick spacing must be positive");
  }
  for (double m : minor_mm) {
    if (!(m > 0.0) || !is_multiple(major_mm, m)) {
      throw std::invalid_argument("minor tick spacing " + std::to_string(m) +
                                  " does not divide the major spacing");
    }
  }
}

double TickSpec::finest_mm() const {
  double finest = major_mm;
  for (double m : minor_mm) finest = std::min(finest, m);
  return finest;
}

std::vector<double> highpass(std::span<const double> x, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("highpass sigma must be positive");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // Written as a sum of differences so constant input gives exactly zero.
    double residual = 0.0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
      const std::size_t j = reflect(static_cast<std::ptrdiff_t>(i) + k, n);
      residual -= kernel[static_cast<std::size_t>(k + radius)] * (x[j] - x[i]);
    }
    out[i] = std::max(residual, 0.0);
  }
  return out;
}

std::vector<double> autocorr(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> r(n / 2, 0.0);
  for (std::size_t lag = 0; lag < r.size(); ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += x[i] * x[i + lag];
    r[lag] = acc;
  }
  return r;
}

ScaleEstimate estimate_scale(const ScanLine& x, const TickSpec& ticks) {
  ticks.validate();
  const std::vector<double> filtered = highpass(x.samples());
  const std::vector<double> r = autocorr(filtered);
  if (r.size() < 3 || !(r[0] > 0.0)) throw NoPeriodicity("scan line has no tick energy");
  const double floor = kPeakProminence * r[0];

  std::size_t first = 0;
  for (std::size_t n = 1; n + 1 < r.size(); ++n) {
    if (is_local_max(r, n) && prominence(r, n) > floor) {
      first = n;
      break;
    }
  }
  if (first == 0) throw NoPeriodicity("no prominent autocorrelation peak");
  const double fundamental = refine_peak(r, first);

  // Physical spacings visible as multiples of the finest ticks. Walking them
  // narrowest first keeps the running period estimate accurate enough that
  // each search window excludes the neighbouring tick peaks.
  const double finest = ticks.finest_mm();
  std::vector<double> spacings{ticks.major_mm};
  for (double m : ticks.minor_mm) spacings.push_back(m);
  for (int k = 2; static_cast<double>(k) * ticks.major_mm / finest * fundamental <
                  static_cast<double>(r.size());
       ++k) {
    spacings.push_back(k * ticks.major_mm);
  }
  std::sort(spacings.begin(), spacings.end());
  spacings.erase(std::unique(spacings.begin(), spacings.end()), spacings.end());

  ScaleEstimate best{geometry::PixelScale(finest / fundamental), fundamental, fundamental, finest};
  double period = fundamental;
  for (double spacing : spacings) {
    const double multiple = std::round(spacing / finest);
    const double expected = multiple * period;
    const double half_window = std::max(1.0, 0.4 * period);
    const auto lo = static_cast<std::ptrdiff_t>(std::floor(expected - half_window));
    const auto hi = static_cast<std::ptrdiff_t>(std::ceil(expected + half_window));
    if (lo < 1 || hi + 1 >= static_cast<std::ptrdiff_t>(r.size())) continue;

    std::size_t peak = static_cast<std::size_t>(lo);
    for (auto n = lo; n <= hi; ++n) {
      if (r[static_cast<std::size_t>(n)] > r[peak]) peak = static_cast<std::size_t>(n);
    }
    if (!is_local_max(r, peak) || !(prominence(r, peak) > floor)) continue;
    const double lag = refine_peak(r, peak);
    period = lag / multiple;
    if (lag > best.measured_lag) {
      best = {geometry::PixelScale(spacing / lag), fundamental, lag, spacing};
    }
  }
  return best;
}

geometry::PixelScale pixel_size(const ScanLine& x, const TickSpec& ticks) {
  return estimate_scale(x, ticks).scale;
}

bool detect_freeze(const FramePair& fp, double pixel_epsilon) {
  if (fp.prev.width() != fp.curr.width() || fp.prev.height() != fp.curr.height()) {
    throw DimensionMismatch("detect_freeze: frames differ in size");
  }
  if (!(fp.change_threshold > 0.0 && fp.change_threshold < 1.0)) {
    throw std::invalid_argument("change_threshold must lie in (0, 1)");
  }
  if (fp.prev.empty()) return false;
  const auto a = fp.prev.values();
  const auto b = fp.curr.values();
  std::size_t unchanged = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    unchanged += std::abs(a[i] - b[i]) <= pixel_epsilon;
  }
  return static_cast<double>(unchanged) > fp.change_threshold * static_cast<double>(a.size());
}

}  // namespace wholescan::calibration
