#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace wholescan::geometry {

// Pixel coordinates. Pixel (i, j) of a grid has its center at (i, j).
struct Point2D {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2D&, const Point2D&) = default;
};

double distance(Point2D p, Point2D q);

// Canonical ellipse: 0 < semi_minor <= semi_major, rotation in [0, pi) is the
// direction of the major axis measured from +x.
struct EllipseParams {
  Point2D center;
  double semi_minor = 0.0;
  double semi_major = 0.0;
  double rotation = 0.0;

  friend bool operator==(const EllipseParams&, const EllipseParams&) = default;
};

// Builds a canonical EllipseParams from two semi-axes in any order and any
// finite angle. Throws DegenerateInput on non-positive or non-finite axes.
EllipseParams make_ellipse(Point2D center, double axis1, double axis2, double angle);

bool is_valid(const EllipseParams& e);

// Dense row-major grid of intensities in [0, 1]. Used both for network output
// heatmaps and for raw greyscale frames.
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t width, std::size_t height, double fill = 0.0);
  // Throws OutOfBounds if values lie outside [0, 1] or are non-finite, and
  // DimensionMismatch if values.size() != width * height.
  Grid(std::size_t width, std::size_t height, std::vector<double> values);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double operator()(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }
  double& operator()(std::size_t x, std::size_t y) { return values_[y * width_ + x]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double max_value() const noexcept;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> values_;
};

using Heatmap = Grid;

class PixelScale {
 public:
  // Throws std::invalid_argument unless mm_per_px is finite and > 0.
  explicit PixelScale(double mm_per_px);

  double mm_per_px() const noexcept { return mm_per_px_; }
  double to_mm(double px) const noexcept { return px * mm_per_px_; }
  double to_px(double mm) const noexcept { return mm / mm_per_px_; }

  friend bool operator==(const PixelScale&, const PixelScale&) = default;

 private:
  double mm_per_px_;
};

struct LinearEndpoints {
  Point2D p1;
  Point2D p2;

  friend bool operator==(const LinearEndpoints&, const LinearEndpoints&) = default;
};

struct EllipseOutline {
  EllipseParams ellipse;

  friend bool operator==(const EllipseOutline&, const EllipseOutline&) = default;
};

using Annotation = std::variant<LinearEndpoints, EllipseOutline>;

inline constexpr double kDefaultIntensityFloor = 0.25;
inline constexpr double kDefaultMinSeparationPx = 10.0;
inline constexpr double kDefaultPeakFloor = 0.25;

// Weighted direct least-squares conic fit constrained to ellipses.
// Throws DegenerateInput when fewer than five points carry positive weight,
// the points are collinear, or no real ellipse results.
EllipseParams fit_ellipse(std::span<const Point2D> points, std::span<const double> weights);

// Fits an ellipse to the pixels of `h` above intensity_floor * peak, weighted
// by intensity. A heatmap whose support covers the fitted center is a filled
// blob rather than an outline and is rejected with DegenerateInput.
EllipseParams heatmap_to_ellipse(const Heatmap& h,
                                 double intensity_floor = kDefaultIntensityFloor);

// Perimeter from the first five terms of the Gauss-Kummer series.
double ellipse_perimeter(const EllipseParams& e, PixelScale s);
double ellipse_perimeter_px(double semi_minor, double semi_major);

double eccentricity(const EllipseParams& e);
double cephalic_index(const EllipseParams& e);

struct LinearMeasurement {
  double length_mm = 0.0;
  Point2D p1;
  Point2D p2;
};

// Distance between the two highest local maxima (8-neighbourhood) that are at
// least min_separation apart. Maxima below peak_floor * global peak are not
// considered distinct. Throws SingleMaximum if only one remains.
LinearMeasurement linear_biometric(const Heatmap& h, PixelScale s,
                                   double min_separation = kDefaultMinSeparationPx,
                                   double peak_floor = kDefaultPeakFloor);

// Biparietal diameter is the minor axis of the head ellipse.
double bpd_from_head_ellipse(const EllipseParams& e, PixelScale s);

// Occipito-frontal diameter, the major axis of the head ellipse.
double ofd_from_head_ellipse(const EllipseParams& e, PixelScale s);

// Euclidean distance from p to the closest point of the ellipse curve.
double distance_to_ellipse(const EllipseParams& e, Point2D p);

// Gaussian-profile rendering of an annotation, peak normalized to 1. Throws
// OutOfBounds if the annotation leaves the grid and std::invalid_argument if
// kernel_sigma <= 0.
Heatmap reconstruct_heatmap(const Annotation& ann, double kernel_sigma, std::size_t width,
                            std::size_t height);

// Dice coefficient of the two heatmaps binarized at `v > binarize_at`.
// Two empty sets score 1. Throws DimensionMismatch on unequal sizes.
double dsc(const Heatmap& h1, const Heatmap& h2, double binarize_at);

}  // namespace wholescan::geometry
