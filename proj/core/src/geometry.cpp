#include "wholescan/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "wholescan/error.hpp"

namespace wholescan::geometry {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_half_turn(double angle) {
  double r = std::fmod(angle, kPi);
  if (r < 0.0) r += kPi;
  if (r >= kPi) r = 0.0;
  return r;
}

// Conic A x^2 + B xy + C y^2 + D x + E y + F = 0 to canonical parameters.
EllipseParams conic_to_ellipse(double A, double B, double C, double D, double E, double F) {
  if (A + C < 0.0) {
    A = -A; B = -B; C = -C; D = -D; E = -E; F = -F;
  }
  const double det = A * C - 0.25 * B * B;
  if (!(det > 0.0)) throw DegenerateInput("fitted conic is not an ellipse");

  // Center solves the gradient of the conic equal to zero.
  const double x0 = (B * E - 2.0 * C * D) / (4.0 * det);
  const double y0 = (B * D - 2.0 * A * E) / (4.0 * det);
  const double f0 = F + 0.5 * (D * x0 + E * y0);
  if (!(f0 < 0.0)) throw DegenerateInput("fitted ellipse is imaginary");

  Eigen::Matrix2d q;
  q << A, 0.5 * B, 0.5 * B, C;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(q);
  const Eigen::Vector2d lambda = eig.eigenvalues();  // ascending
  if (!(lambda(0) > 0.0)) throw DegenerateInput("fitted conic is not an ellipse");
  const double semi_major = std::sqrt(-f0 / lambda(0));
  const double semi_minor = std::sqrt(-f0 / lambda(1));
  const Eigen::Vector2d major_dir = eig.eigenvectors().col(0);
  const double angle = std::atan2(major_dir(1), major_dir(0));
  return make_ellipse({x0, y0}, semi_minor, semi_major, angle);
}

// Robust closest-point root for the ellipse distance problem, after Eberly.
double ellipse_distance_root(double r0, double z0, double z1, double g) {
  const double n0 = r0 * z0;
  double s0 = z1 - 1.0;
  double s1 = g < 0.0 ? 0.0 : std::hypot(n0, z1) - 1.0;
  double s = 0.0;
  for (int i = 0; i < 200; ++i) {
    s = 0.5 * (s0 + s1);
    if (s == s0 || s == s1) break;
    const double ratio0 = n0 / (s + r0);
    const double ratio1 = z1 / (s + 1.0);
    g = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
    if (g > 0.0) {
      s0 = s;
    } else if (g < 0.0) {
      s1 = s;
    } else {
      break;
    }
  }
  return s;
}

// Distance from (y0, y1), both >= 0, to the axis-aligned ellipse with semi-axes
// e0 >= e1 > 0.
double distance_first_quadrant(double e0, double e1, double y0, double y1) {
  if (y1 > 0.0) {
    if (y0 > 0.0) {
      const double z0 = y0 / e0;
      const double z1 = y1 / e1;
      const double g = z0 * z0 + z1 * z1 - 1.0;
      if (g == 0.0) return 0.0;
      const double r0 = (e0 / e1) * (e0 / e1);
      const double sbar = ellipse_distance_root(r0, z0, z1, g);
      const double x0 = r0 * y0 / (sbar + r0);
      const double x1 = y1 / (sbar + 1.0);
      return std::hypot(x0 - y0, x1 - y1);
    }
    return std::abs(y1 - e1);
  }
  const double numer0 = e0 * y0;
  const double denom0 = e0 * e0 - e1 * e1;
  if (numer0 < denom0) {
    const double xde0 = numer0 / denom0;
    const double x0 = e0 * xde0;
    const double x1 = e1 * std::sqrt(1.0 - xde0 * xde0);
    return std::hypot(x0 - y0, x1);
  }
  return std::abs(y0 - e0);
}

void check_in_grid(Point2D p, std::size_t width, std::size_t height) {
  const double max_x = static_cast<double>(width) - 1.0;
  const double max_y = static_cast<double>(height) - 1.0;
  if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= max_x && p.y <= max_y)) {
    throw OutOfBounds("annotation point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ") outside " + std::to_string(width) + "x" + std::to_string(height) +
                      " grid");
  }
}

// exp(-(d^2 - d_min^2) / 2 sigma^2) for every pixel; the closest pixel gets 1
// even when sigma is far below a pixel.
Heatmap render_profile(std::vector<double> sq_dist, std::size_t width, std::size_t height,
                       double sigma) {
  const double d2_min = *std::min_element(sq_dist.begin(), sq_dist.end());
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (double& v : sq_dist) {
    v = std::isfinite(v) ? std::exp(-(v - d2_min) * inv) : 0.0;
  }
  return Heatmap(width, height, std::move(sq_dist));
}

}  // namespace

double distance(Point2D p, Point2D q) { return std::hypot(p.x - q.x, p.y - q.y); }

EllipseParams make_ellipse(Point2D center, double axis1, double axis2, double angle) {
  if (!(std::isfinite(axis1) && std::isfinite(axis2) && axis1 > 0.0 && axis2 > 0.0) ||
      !std::isfinite(angle) || !std::isfinite(center.x) || !std::isfinite(center.y)) {
    throw DegenerateInput("ellipse axes must be finite and positive");
  }
  EllipseParams e;
  e.center = center;
  if (axis1 <= axis2) {
    e.semi_minor = axis1;
    e.semi_major = axis2;
    e.rotation = wrap_half_turn(angle);
  } else {
    e.semi_minor = axis2;
    e.semi_major = axis1;
    e.rotation = wrap_half_turn(angle + 0.5 * kPi);
  }
  if (e.semi_minor == e.semi_major) e.rotation = 0.0;
  return e;
}

bool is_valid(const EllipseParams& e) {
  return std::isfinite(e.center.x) && std::isfinite(e.center.y) && e.semi_minor > 0.0 &&
         e.semi_minor <= e.semi_major && std::isfinite(e.semi_major) && e.rotation >= 0.0 &&
         e.rotation < kPi;
}

Grid::Grid(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), values_(width * height, fill) {
  if (!(fill >= 0.0 && fill <= 1.0)) throw OutOfBounds("grid fill value outside [0, 1]");
}

Grid::Grid(std::size_t width, std::size_t height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (values_.size() != width_ * height_) {
    throw DimensionMismatch("grid has " + std::to_string(values_.size()) + " values, expected " +
                            std::to_string(width_ * height_));
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw OutOfBounds("grid value outside [0, 1]");
  }
}

double Grid::max_value() const noexcept {
  if (values_.empty()) return 0.0;
  return *std::max_element(values_.begin(), values_.end());
}

PixelScale::PixelScale(double mm_per_px) : mm_per_px_(mm_per_px) {
  if (!(std::isfinite(mm_per_px) && mm_per_px > 0.0)) {
    throw std::invalid_argument("pixel scale must be finite and positive");
  }
}

EllipseParams fit_ellipse(std::span<const Point2D> points, std::span<const double> weights) {
  if (points.size() != weights.size()) {
    throw DimensionMismatch("fit_ellipse: points and weights differ in length");
  }

  double w_sum = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  std::size_t effective = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double w = weights[i];
    if (!(w >= 0.0) || !std::isfinite(w)) throw DegenerateInput("weights must be non-negative");
    if (w == 0.0) continue;
    ++effective;
    w_sum += w;
    cx += w * points[i].x;
    cy += w * points[i].y;
  }
  if (effective < 5) throw DegenerateInput("fewer than five weighted points");
  cx /= w_sum;
  cy /= w_sum;

  double spread = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double dx = points[i].x - cx;
    const double dy = points[i].y - cy;
    spread += weights[i] * (dx * dx + dy * dy);
  }
  spread = std::sqrt(spread / (2.0 * w_sum));
  if (!(spread > 0.0)) throw DegenerateInput("all points coincide");

  // Halir-Flusser partition of the scatter matrix: quadratic terms (S1) and
  // linear terms (S3) with their coupling (S2).
  Eigen::Matrix3d s1 = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d s2 = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d s3 = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double w = weights[i];
    if (w == 0.0) continue;
    const double u = (points[i].x - cx) / spread;
    const double v = (points[i].y - cy) / spread;
    const Eigen::Vector3d quad(u * u, u * v, v * v);
    const Eigen::Vector3d lin(u, v, 1.0);
    s1.noalias() += w * quad * quad.transpose();
    s2.noalias() += w * quad * lin.transpose();
    s3.noalias() += w * lin * lin.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> s3_eig(s3, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d s3_ev = s3_eig.eigenvalues();
  if (!(s3_ev(0) > 1e-10 * s3_ev(2))) throw DegenerateInput("points are collinear");

  const Eigen::Matrix3d t = -s3.ldlt().solve(s2.transpose());
  const Eigen::Matrix3d m = s1 + s2 * t;
  // Premultiply by the inverse of the ellipse constraint matrix
  // [[0,0,2],[0,-1,0],[2,0,0]].
  Eigen::Matrix3d reduced;
  reduced.row(0) = 0.5 * m.row(2);
  reduced.row(1) = -m.row(1);
  reduced.row(2) = 0.5 * m.row(0);

  Eigen::EigenSolver<Eigen::Matrix3d> eig(reduced);
  int best = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d a = eig.eigenvectors().col(k).real();
    const double cond = 4.0 * a(0) * a(2) - a(1) * a(1);
    if (!(cond > 0.0)) continue;
    // With a^T C a normalized to 1 the algebraic cost equals the eigenvalue.
    const double cost = std::abs(eig.eigenvalues()(k).real());
    if (cost < best_cost) {
      best_cost = cost;
      best = k;
    }
  }
  if (best < 0) throw DegenerateInput("no elliptic solution to the conic fit");

  const Eigen::Vector3d quad = eig.eigenvectors().col(best).real();
  const Eigen::Vector3d lin = t * quad;
  const EllipseParams normalized =
      conic_to_ellipse(quad(0), quad(1), quad(2), lin(0), lin(1), lin(2));

  return make_ellipse({normalized.center.x * spread + cx, normalized.center.y * spread + cy},
                      normalized.semi_minor * spread, normalized.semi_major * spread,
                      normalized.rotation);
}

EllipseParams heatmap_to_ellipse(const Heatmap& h, double intensity_floor) {
  const double peak = h.max_value();
  if (!(peak > 0.0)) throw DegenerateInput("heatmap is empty");
  const double threshold = intensity_floor * peak;

  std::vector<Point2D> points;
  std::vector<double> weights;
  for (std::size_t y = 0; y < h.height(); ++y) {
    for (std::size_t x = 0; x < h.width(); ++x) {
      const double v = h(x, y);
      if (v > threshold) {
        points.push_back({static_cast<double>(x), static_cast<double>(y)});
        weights.push_back(v);
      }
    }
  }
  const EllipseParams e = fit_ellipse(points, weights);

  const double cx = std::round(e.center.x);
  const double cy = std::round(e.center.y);
  if (cx >= 0.0 && cy >= 0.0 && cx < static_cast<double>(h.width()) &&
      cy < static_cast<double>(h.height())) {
    if (h(static_cast<std::size_t>(cx), static_cast<std::size_t>(cy)) > threshold) {
      throw DegenerateInput("heatmap support covers the ellipse center; not an outline");
    }
  }
  return e;
}

double ellipse_perimeter_px(double semi_minor, double semi_major) {
  const double sum = semi_minor + semi_major;
  const double r = (semi_major - semi_minor) / sum;
  const double h = r * r;
  const double series =
      1.0 + h * (1.0 / 4.0 + h * (1.0 / 64.0 + h * (1.0 / 256.0 + h * (25.0 / 16384.0))));
  return kPi * sum * series;
}

double ellipse_perimeter(const EllipseParams& e, PixelScale s) {
  return s.to_mm(ellipse_perimeter_px(e.semi_minor, e.semi_major));
}

double eccentricity(const EllipseParams& e) {
  const double ratio = e.semi_minor / e.semi_major;
  return std::sqrt(std::max(0.0, 1.0 - ratio * ratio));
}

double cephalic_index(const EllipseParams& e) { return 100.0 * e.semi_minor / e.semi_major; }

LinearMeasurement linear_biometric(const Heatmap& h, PixelScale s, double min_separation,
                                   double peak_floor) {
  struct Peak {
    double value;
    std::size_t x;
    std::size_t y;
  };
  std::vector<Peak> peaks;
  const std::size_t w = h.width();
  const std::size_t ht = h.height();
  for (std::size_t y = 0; y < ht; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = h(x, y);
      if (!(v > 0.0)) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const auto nx = static_cast<std::ptrdiff_t>(x) + dx;
          const auto ny = static_cast<std::ptrdiff_t>(y) + dy;
          if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(w) ||
              ny >= static_cast<std::ptrdiff_t>(ht)) {
            continue;
          }
          if (h(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny)) > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) peaks.push_back({v, x, y});
    }
  }
  if (peaks.empty()) throw SingleMaximum("heatmap has no local maxima");

  // Stable on row-major scan order, so ties resolve deterministically.
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.value > b.value; });
  const Peak& first = peaks.front();
  const Point2D p1{static_cast<double>(first.x), static_cast<double>(first.y)};
  const double floor = peak_floor * first.value;
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    if (peaks[i].value < floor) break;
    const Point2D p2{static_cast<double>(peaks[i].x), static_cast<double>(peaks[i].y)};
    const double d = distance(p1, p2);
    if (d >= min_separation) return {s.to_mm(d), p1, p2};
  }
  throw SingleMaximum("only one distinct maximum in heatmap");
}

double bpd_from_head_ellipse(const EllipseParams& e, PixelScale s) {
  return s.to_mm(2.0 * e.semi_minor);
}

double ofd_from_head_ellipse(const EllipseParams& e, PixelScale s) {
  return s.to_mm(2.0 * e.semi_major);
}

double distance_to_ellipse(const EllipseParams& e, Point2D p) {
  const double dx = p.x - e.center.x;
  const double dy = p.y - e.center.y;
  const double c = std::cos(e.rotation);
  const double s = std::sin(e.rotation);
  const double u = dx * c + dy * s;
  const double v = -dx * s + dy * c;
  return distance_first_quadrant(e.semi_major, e.semi_minor, std::abs(u), std::abs(v));
}

Heatmap reconstruct_heatmap(const Annotation& ann, double kernel_sigma, std::size_t width,
                            std::size_t height) {
  if (!(kernel_sigma > 0.0) || !std::isfinite(kernel_sigma)) {
    throw std::invalid_argument("kernel_sigma must be positive");
  }
  if (width == 0 || height == 0) throw OutOfBounds("empty grid");

  std::vector<double> sq(width * height, std::numeric_limits<double>::infinity());

  if (const auto* lin = std::get_if<LinearEndpoints>(&ann)) {
    check_in_grid(lin->p1, width, height);
    check_in_grid(lin->p2, width, height);
    if (lin->p1 == lin->p2) throw DegenerateInput("linear endpoints coincide");
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const Point2D p{static_cast<double>(x), static_cast<double>(y)};
        const double d1 = distance(p, lin->p1);
        const double d2 = distance(p, lin->p2);
        const double d = std::min(d1, d2);
        sq[y * width + x] = d * d;
      }
    }
    return render_profile(std::move(sq), width, height, kernel_sigma);
  }

  const EllipseParams& e = std::get<EllipseOutline>(ann).ellipse;
  if (!is_valid(e)) throw DegenerateInput("invalid ellipse annotation");
  const double c = std::cos(e.rotation);
  const double s = std::sin(e.rotation);
  const double half_w = std::hypot(e.semi_major * c, e.semi_minor * s);
  const double half_h = std::hypot(e.semi_major * s, e.semi_minor * c);
  check_in_grid({e.center.x - half_w, e.center.y - half_h}, width, height);
  check_in_grid({e.center.x + half_w, e.center.y + half_h}, width, height);

  // Pixels provably further than this from the curve render as exact zero.
  const double cutoff = std::sqrt(80.0 * kernel_sigma * kernel_sigma + 1.0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const Point2D p{static_cast<double>(x), static_cast<double>(y)};
      const double r = distance(p, e.center);
      const double lower = std::max(r - e.semi_major, e.semi_minor - r);
      if (lower > cutoff) continue;
      const double d = distance_to_ellipse(e, p);
      sq[y * width + x] = d * d;
    }
  }
  return render_profile(std::move(sq), width, height, kernel_sigma);
}

double dsc(const Heatmap& h1, const Heatmap& h2, double binarize_at) {
  if (h1.width() != h2.width() || h1.height() != h2.height()) {
    throw DimensionMismatch("dsc: heatmaps differ in size");
  }
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t both = 0;
  const auto a = h1.values();
  const auto b = h2.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool in_x = a[i] > binarize_at;
    const bool in_y = b[i] > binarize_at;
    nx += in_x;
    ny += in_y;
    both += in_x && in_y;
  }
  if (nx + ny == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(nx + ny);
}

}  // namespace wholescan::geometry
