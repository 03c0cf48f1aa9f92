#include "wholescan/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "wholescan/error.hpp"
#include "wholescan/estimator.hpp"

namespace wholescan::sim {

namespace {

using nlohmann::json;
using geometry::Point2D;

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

template <typename Segment>
const Segment* segment_at(const std::vector<Segment>& segments, double t) {
  double end = 0.0;
  for (const auto& s : segments) {
    end += s.duration_s;
    if (t < end) return &s;
  }
  return segments.empty() ? nullptr : &segments.back();
}

// Max-composite Gaussian splats of densely sampled curve points.
geometry::Heatmap splat(const std::vector<Point2D>& points, double sigma, std::size_t width,
                        std::size_t height) {
  std::vector<double> values(width * height, 0.0);
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (const auto& p : points) {
    const auto px = static_cast<std::ptrdiff_t>(std::lround(p.x));
    const auto py = static_cast<std::ptrdiff_t>(std::lround(p.y));
    for (auto y = py - radius; y <= py + radius; ++y) {
      if (y < 0 || y >= static_cast<std::ptrdiff_t>(height)) continue;
      for (auto x = px - radius; x <= px + radius; ++x) {
        if (x < 0 || x >= static_cast<std::ptrdiff_t>(width)) continue;
        const double dx = static_cast<double>(x) - p.x;
        const double dy = static_cast<double>(y) - p.y;
        double& v = values[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
        v = std::max(v, std::exp(-(dx * dx + dy * dy) * inv));
      }
    }
  }
  const double peak = *std::max_element(values.begin(), values.end());
  if (peak > 0.0) {
    for (double& v : values) v /= peak;
  }
  return geometry::Heatmap(width, height, std::move(values));
}

Point2D ellipse_point(const geometry::EllipseParams& e, double phi, double radial_offset = 0.0) {
  const double c = std::cos(e.rotation);
  const double s = std::sin(e.rotation);
  const double u = (e.semi_major + radial_offset) * std::cos(phi);
  const double v = (e.semi_minor + radial_offset) * std::sin(phi);
  return {e.center.x + u * c - v * s, e.center.y + u * s + v * c};
}

Point2D clamp_to_grid(Point2D p, std::size_t width, std::size_t height) {
  return {std::clamp(p.x, 0.0, static_cast<double>(width) - 1.0),
          std::clamp(p.y, 0.0, static_cast<double>(height) - 1.0)};
}

// Largest semi-major / half-length (px) that keeps the kernel inside the grid.
double max_extent_px(const HeatmapSettings& hs) {
  return 0.5 * static_cast<double>(hs.size_px) - 3.0 * hs.kernel_sigma_px - 2.0;
}

double axis_ratio_for(Plane plane, const HeatmapSettings& hs) {
  return plane == Plane::BrainTV ? hs.head_axis_ratio : hs.abdomen_axis_ratio;
}

struct RenderedGeometry {
  geometry::Annotation annotation;
  std::map<Biometric, double> values_mm;
};

// Converts drawn measurements into the annotation that would have produced
// them, shrinking implausibly large draws so they stay on the grid.
RenderedGeometry render_geometry(Plane plane, const std::map<Biometric, double>& drawn,
                                 double mm_per_px, const HeatmapSettings& hs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle_dist(0.0, kPi);
  const double angle = angle_dist(rng);
  const double mid = 0.5 * (static_cast<double>(hs.size_px) - 1.0);
  const Point2D center{mid, mid};
  const double limit = max_extent_px(hs);
  const geometry::PixelScale scale(mm_per_px);
  RenderedGeometry out;

  if (plane == Plane::BrainTV || plane == Plane::Abdominal) {
    const Biometric circumference = plane == Plane::BrainTV ? Biometric::HC : Biometric::AC;
    const double ratio = axis_ratio_for(plane, hs);
    const double perimeter_px = std::max(drawn.at(circumference), 1e-3) / mm_per_px;
    double semi_major = perimeter_px / geometry::ellipse_perimeter_px(ratio, 1.0);
    semi_major = std::clamp(semi_major, 2.0, limit);
    const auto e = geometry::make_ellipse(center, ratio * semi_major, semi_major, angle);
    out.annotation = geometry::EllipseOutline{e};
    out.values_mm[circumference] = geometry::ellipse_perimeter(e, scale);
    if (plane == Plane::BrainTV) out.values_mm[Biometric::BPD] = geometry::bpd_from_head_ellipse(e, scale);
    return out;
  }

  const Biometric b = biometrics_for(plane).front();
  double half = 0.5 * std::max(drawn.at(b), 1e-3) / mm_per_px;
  half = std::clamp(half, 1.0, limit);
  const Point2D offset{half * std::cos(angle), half * std::sin(angle)};
  geometry::LinearEndpoints lin{{center.x - offset.x, center.y - offset.y},
                                {center.x + offset.x, center.y + offset.y}};
  out.annotation = lin;
  out.values_mm[b] = scale.to_mm(geometry::distance(lin.p1, lin.p2));
  return out;
}

const json* find(const json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
  if (const json* v = find(j, key)) {
    try {
      out = v->get<T>();
    } catch (const json::exception& e) {
      throw InvalidScenario(std::string("scenario field '") + key + "': " + e.what());
    }
  }
}

Plane plane_or_throw(const std::string& name) {
  const auto p = parse_plane(name);
  if (!p) throw InvalidScenario("unknown plane '" + name + "'");
  return *p;
}

}  // namespace

std::string_view to_string(PayloadMode m) {
  switch (m) {
    case PayloadMode::Measurement: return "measurement";
    case PayloadMode::Annotation: return "annotation";
    case PayloadMode::Heatmap: return "heatmap";
  }
  return "?";
}

std::string_view to_string(Corruption c) {
  switch (c) {
    case Corruption::None: return "none";
    case Corruption::ExtraBlob: return "extra_blob";
    case Corruption::MissingEndpoint: return "missing_endpoint";
    case Corruption::Smear: return "smear";
  }
  return "?";
}

void ScanScenario::validate() const {
  if (!(frame_rate > 0.0)) throw InvalidScenario("frame_rate must be positive");
  if (schedule.empty()) throw InvalidScenario("plane schedule is empty");
  for (const auto& v : schedule) {
    if (!(v.duration_s > 0.0)) throw InvalidScenario("plane durations must be positive");
    for (Biometric b : biometrics_for(v.plane)) {
      if (!biometrics.contains(b)) {
        throw InvalidScenario("schedule visits " + std::string(wholescan::to_string(v.plane)) +
                              " but no truth is given for " + std::string(wholescan::to_string(b)));
      }
    }
  }
  for (const auto& [b, truth] : biometrics) {
    const std::string name(wholescan::to_string(b));
    if (!(truth.sigma_mm > 0.0)) throw InvalidScenario(name + ": sigma_mm must be positive");
    if (!(truth.p_t >= 0.0 && truth.p_t <= 1.0)) throw InvalidScenario(name + ": p_t outside [0, 1]");
    if (!(truth.lower < truth.upper)) throw InvalidScenario(name + ": bounds must satisfy lower < upper");
    if (!(truth.true_mm >= truth.lower && truth.true_mm <= truth.upper)) {
      throw InvalidScenario(name + ": true value outside nuisance bounds");
    }
  }
  for (const auto& s : scale_schedule) {
    if (!(s.mm_per_px > 0.0 && s.duration_s > 0.0)) {
      throw InvalidScenario("scale segments need positive mm_per_px and duration");
    }
  }
  for (const auto& f : freezes) {
    if (!(f.duration_s > 0.0)) throw InvalidScenario("freeze durations must be positive");
  }
  for (const auto& [plane, model] : confidence) {
    if (!(model.sd_logit >= 0.0)) throw InvalidScenario("confidence sd_logit must be >= 0");
  }
  if (emit_scanline || payload != PayloadMode::Measurement) {
    if (scale_schedule.empty()) {
      throw InvalidScenario("scanline or geometric payloads need a scale schedule");
    }
  }
  if (emit_scanline) {
    try {
      ticks.validate();
    } catch (const std::invalid_argument& e) {
      throw InvalidScenario(e.what());
    }
    for (const auto& s : scale_schedule) {
      if (static_cast<double>(scanline_length) < 3.0 * ticks.major_mm / s.mm_per_px ||
          scanline_length < calibration::kMinScanLineLength) {
        throw InvalidScenario("scanline too short for three major tick periods");
      }
    }
    if (!(scanline_noise >= 0.0)) throw InvalidScenario("scanline noise must be >= 0");
  }
  if (payload != PayloadMode::Measurement) {
    if (heatmap.size_px < 16 || !(heatmap.kernel_sigma_px > 0.0)) {
      throw InvalidScenario("heatmap grid too small or kernel sigma not positive");
    }
    if (!(heatmap.head_axis_ratio > 0.0 && heatmap.head_axis_ratio <= 1.0 &&
          heatmap.abdomen_axis_ratio > 0.0 && heatmap.abdomen_axis_ratio <= 1.0)) {
      throw InvalidScenario("axis ratios must lie in (0, 1]");
    }
    // True geometry must fit on the grid at every scale used.
    const double limit = max_extent_px(heatmap);
    for (const auto& s : scale_schedule) {
      for (const auto& [b, truth] : biometrics) {
        double extent = 0.0;
        if (b == Biometric::HC || b == Biometric::AC) {
          const double ratio = axis_ratio_for(plane_for(b), heatmap);
          extent = truth.true_mm / s.mm_per_px / geometry::ellipse_perimeter_px(ratio, 1.0);
        } else if (b != Biometric::BPD) {
          extent = 0.5 * truth.true_mm / s.mm_per_px;
        }
        if (extent > limit) {
          throw InvalidScenario(std::string(wholescan::to_string(b)) +
                                ": true geometry does not fit the heatmap grid");
        }
      }
    }
  }
}

std::size_t ScanScenario::frame_count() const {
  double total = 0.0;
  for (const auto& v : schedule) total += v.duration_s;
  return static_cast<std::size_t>(std::llround(total * frame_rate));
}

std::map<Plane, ConfidenceModel> default_confidence_models() {
  // mean = logit(0.95) + Phi^-1(fraction above 0.95) with sd 1; fractions
  // 83.5%, 82.1%, 73.2% and 66.4% for the four biometric planes.
  return {
      {Plane::BrainTV, {3.9186, 1.0}},
      {Plane::BrainCB, {3.8636, 1.0}},
      {Plane::Abdominal, {3.5633, 1.0}},
      {Plane::Femur, {3.3678, 1.0}},
      {Plane::Other, {0.0, 1.5}},
  };
}

ScanScenario default_scenario(const GrowthChart& chart, GestationalAge ga, std::uint64_t seed) {
  ScanScenario sc;
  sc.ga = ga;
  sc.seed = seed;
  sc.confidence = default_confidence_models();
  const std::map<Biometric, double> sigma = {{Biometric::HC, 4.3},
                                             {Biometric::BPD, 1.3},
                                             {Biometric::AC, 5.0},
                                             {Biometric::FL, 1.8},
                                             {Biometric::TCD, 1.0}};
  for (Biometric b : kAllBiometrics) {
    if (!chart.has(b)) continue;
    const auto prior = estimator::init_estimator(b, ga, chart);
    sc.biometrics[b] = {prior.mu, 0.79, sigma.at(b), prior.lower, prior.upper};
  }
  const std::vector<PlaneVisit> cycle = {
      {Plane::Other, 60.0},    {Plane::BrainTV, 12.0}, {Plane::Other, 30.0},
      {Plane::BrainCB, 12.0},  {Plane::Other, 30.0},   {Plane::Abdominal, 12.0},
      {Plane::Other, 30.0},    {Plane::Femur, 12.0},   {Plane::Other, 42.0},
  };
  for (int i = 0; i < 5; ++i) {
    for (const auto& v : cycle) {
      bool present = true;
      for (Biometric b : biometrics_for(v.plane)) present = present && sc.biometrics.contains(b);
      if (present) sc.schedule.push_back(v);
    }
  }
  sc.scale_schedule = {{0.4, 1200.0}};
  return sc;
}

ScanScenario scenario_from_json(std::string_view text) {
  json j = json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InvalidScenario("scenario is not a JSON object");

  ScanScenario sc;
  sc.confidence = default_confidence_models();
  read_into(j, "seed", sc.seed);
  if (const json* ga = find(j, "ga")) {
    try {
      sc.ga = ga->is_number_integer() ? GestationalAge::from_days(ga->get<int>())
                                      : GestationalAge::parse(ga->get<std::string>());
    } catch (const std::exception& e) {
      throw InvalidScenario(std::string("scenario ga: ") + e.what());
    }
  }
  read_into(j, "frame_rate", sc.frame_rate);
  read_into(j, "operator_offset_mm", sc.operator_offset_mm);
  if (const json* p = find(j, "payload")) {
    const auto mode = p->is_string() ? p->get<std::string>() : std::string();
    if (mode == "measurement") sc.payload = PayloadMode::Measurement;
    else if (mode == "annotation") sc.payload = PayloadMode::Annotation;
    else if (mode == "heatmap") sc.payload = PayloadMode::Heatmap;
    else throw InvalidScenario("payload must be measurement, annotation or heatmap");
  }
  if (const json* bs = find(j, "biometrics")) {
    if (!bs->is_object()) throw InvalidScenario("biometrics must be an object");
    for (const auto& [name, v] : bs->items()) {
      const auto b = parse_biometric(name);
      if (!b) throw InvalidScenario("unknown biometric '" + name + "'");
      BiometricTruth truth;
      read_into(v, "true_mm", truth.true_mm);
      read_into(v, "p_t", truth.p_t);
      read_into(v, "sigma_mm", truth.sigma_mm);
      std::vector<double> bounds;
      read_into(v, "bounds", bounds);
      if (bounds.size() != 2) throw InvalidScenario(name + ": bounds must be [lower, upper]");
      truth.lower = bounds[0];
      truth.upper = bounds[1];
      sc.biometrics[*b] = truth;
    }
  }
  if (const json* sched = find(j, "schedule")) {
    if (!sched->is_array()) throw InvalidScenario("schedule must be an array");
    for (const auto& v : *sched) {
      PlaneVisit visit;
      std::string plane;
      read_into(v, "plane", plane);
      visit.plane = plane_or_throw(plane);
      read_into(v, "duration_s", visit.duration_s);
      sc.schedule.push_back(visit);
    }
  }
  if (const json* conf = find(j, "confidence")) {
    if (!conf->is_object()) throw InvalidScenario("confidence must be an object");
    for (const auto& [name, v] : conf->items()) {
      ConfidenceModel m = sc.confidence[plane_or_throw(name)];
      read_into(v, "mean_logit", m.mean_logit);
      read_into(v, "sd_logit", m.sd_logit);
      sc.confidence[plane_or_throw(name)] = m;
    }
  }
  if (const json* scales = find(j, "scale_schedule")) {
    if (!scales->is_array()) throw InvalidScenario("scale_schedule must be an array");
    for (const auto& v : *scales) {
      ScaleSegment s;
      read_into(v, "mm_per_px", s.mm_per_px);
      read_into(v, "duration_s", s.duration_s);
      sc.scale_schedule.push_back(s);
    }
  }
  if (const json* line = find(j, "scanline")) {
    read_into(*line, "emit", sc.emit_scanline);
    read_into(*line, "length", sc.scanline_length);
    read_into(*line, "noise", sc.scanline_noise);
    if (const json* ticks = find(*line, "ticks")) {
      read_into(*ticks, "major_mm", sc.ticks.major_mm);
      read_into(*ticks, "minor_mm", sc.ticks.minor_mm);
    }
  }
  if (const json* fr = find(j, "freezes")) {
    if (!fr->is_array()) throw InvalidScenario("freezes must be an array");
    for (const auto& v : *fr) {
      FreezeSegment f;
      read_into(v, "start_s", f.start_s);
      read_into(v, "duration_s", f.duration_s);
      sc.freezes.push_back(f);
    }
  }
  if (const json* hm = find(j, "heatmap")) {
    read_into(*hm, "size_px", sc.heatmap.size_px);
    read_into(*hm, "kernel_sigma_px", sc.heatmap.kernel_sigma_px);
    read_into(*hm, "head_axis_ratio", sc.heatmap.head_axis_ratio);
    read_into(*hm, "abdomen_axis_ratio", sc.heatmap.abdomen_axis_ratio);
  }
  sc.validate();
  return sc;
}

ScanScenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str());
}

std::string scenario_to_json(const ScanScenario& sc) {
  json j;
  j["seed"] = sc.seed;
  j["ga"] = sc.ga.to_string();
  j["frame_rate"] = sc.frame_rate;
  j["payload"] = std::string(to_string(sc.payload));
  j["operator_offset_mm"] = sc.operator_offset_mm;
  json bs = json::object();
  for (const auto& [b, t] : sc.biometrics) {
    bs[std::string(wholescan::to_string(b))] = {
        {"true_mm", t.true_mm}, {"p_t", t.p_t}, {"sigma_mm", t.sigma_mm},
        {"bounds", {t.lower, t.upper}}};
  }
  j["biometrics"] = bs;
  json sched = json::array();
  for (const auto& v : sc.schedule) {
    sched.push_back({{"plane", std::string(wholescan::to_string(v.plane))}, {"duration_s", v.duration_s}});
  }
  j["schedule"] = sched;
  json conf = json::object();
  for (const auto& [p, m] : sc.confidence) {
    conf[std::string(wholescan::to_string(p))] = {{"mean_logit", m.mean_logit}, {"sd_logit", m.sd_logit}};
  }
  j["confidence"] = conf;
  json scales = json::array();
  for (const auto& s : sc.scale_schedule) {
    scales.push_back({{"mm_per_px", s.mm_per_px}, {"duration_s", s.duration_s}});
  }
  j["scale_schedule"] = scales;
  j["scanline"] = {{"emit", sc.emit_scanline},
                   {"length", sc.scanline_length},
                   {"noise", sc.scanline_noise},
                   {"ticks", {{"major_mm", sc.ticks.major_mm}, {"minor_mm", sc.ticks.minor_mm}}}};
  json fr = json::array();
  for (const auto& f : sc.freezes) fr.push_back({{"start_s", f.start_s}, {"duration_s", f.duration_s}});
  j["freezes"] = fr;
  j["heatmap"] = {{"size_px", sc.heatmap.size_px},
                  {"kernel_sigma_px", sc.heatmap.kernel_sigma_px},
                  {"head_axis_ratio", sc.heatmap.head_axis_ratio},
                  {"abdomen_axis_ratio", sc.heatmap.abdomen_axis_ratio}};
  return j.dump(2);
}

SimulatedStream simulate_stream(const ScanScenario& sc) {
  sc.validate();
  SimulatedStream out;
  const std::size_t n_frames = sc.frame_count();
  out.records.reserve(n_frames);

  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> standard_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto default_conf = default_confidence_models();

  for (std::size_t i = 0; i < n_frames; ++i) {
    const double t = static_cast<double>(i) / sc.frame_rate;
    const PlaneVisit* visit = segment_at(sc.schedule, t);
    FrameRecord r;
    r.frame = i;
    r.t = t;
    r.plane = visit->plane;

    const auto conf_it = sc.confidence.find(r.plane);
    const ConfidenceModel& cm =
        conf_it != sc.confidence.end() ? conf_it->second : default_conf.at(r.plane);
    r.conf = sigmoid(cm.mean_logit + cm.sd_logit * standard_normal(rng));

    for (const auto& f : sc.freezes) {
      if (t >= f.start_s && t < f.start_s + f.duration_s) r.frozen = true;
    }

    const ScaleSegment* scale = segment_at(sc.scale_schedule, t);
    if (scale != nullptr) {
      if (sc.emit_scanline) {
        const auto line = simulate_scalebar(scale->mm_per_px, sc.ticks, sc.scanline_length,
                                            sc.scanline_noise, splitmix64(sc.seed ^ splitmix64(i)));
        r.scanline = std::vector<double>(line.samples().begin(), line.samples().end());
      } else {
        r.scale_mm_per_px = scale->mm_per_px;
      }
    }

    const auto biometrics = biometrics_for(r.plane);
    if (biometrics.empty()) {
      r.payload = MeasurementPayload{};
      out.records.push_back(std::move(r));
      continue;
    }

    // One component draw per frame: a misclassified frame corrupts every
    // biometric it carries.
    const double u = unit(rng);
    std::map<Biometric, double> drawn;
    std::map<Biometric, bool> from_truth;
    for (Biometric b : biometrics) {
      const BiometricTruth& truth = sc.biometrics.at(b);
      const bool is_truth = u < truth.p_t;
      from_truth[b] = is_truth;
      drawn[b] = is_truth
                     ? truth.true_mm + sc.operator_offset_mm + truth.sigma_mm * standard_normal(rng)
                     : truth.lower + (truth.upper - truth.lower) * unit(rng);
    }

    std::map<Biometric, double> values = drawn;
    if (sc.payload == PayloadMode::Measurement) {
      r.payload = MeasurementPayload{drawn};
    } else {
      auto rendered = render_geometry(r.plane, drawn, scale->mm_per_px, sc.heatmap, rng);
      values = rendered.values_mm;
      if (sc.payload == PayloadMode::Annotation) {
        r.payload = AnnotationPayload{rendered.annotation};
      } else {
        r.payload = HeatmapPayload{simulate_heatmap_frame(rendered.annotation,
                                                          sc.heatmap.kernel_sigma_px,
                                                          sc.heatmap.size_px, sc.heatmap.size_px,
                                                          Corruption::None)};
      }
    }
    for (Biometric b : biometrics) {
      out.oracle.push_back({out.records.size(), b, from_truth.at(b), values.at(b)});
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

calibration::ScanLine simulate_scalebar(double mm_per_px, const calibration::TickSpec& ticks,
                                        std::size_t length, double noise_amp, std::uint64_t seed) {
  try {
    ticks.validate();
  } catch (const std::invalid_argument& e) {
    throw InvalidScenario(e.what());
  }
  if (!(mm_per_px > 0.0)) throw InvalidScenario("mm_per_px must be positive");
  if (length < calibration::kMinScanLineLength ||
      static_cast<double>(length) < 3.0 * ticks.major_mm / mm_per_px) {
    throw InvalidScenario("scan line too short for three major tick periods");
  }
  if (!(noise_amp >= 0.0)) throw InvalidScenario("noise_amp must be >= 0");

  std::vector<double> spacings = ticks.minor_mm;
  std::sort(spacings.begin(), spacings.end(), std::greater<>());
  const double finest = ticks.finest_mm();

  std::vector<double> line(length);
  const double n = static_cast<double>(length);
  for (std::size_t i = 0; i < length; ++i) {
    line[i] = 0.15 + 0.08 * std::sin(2.0 * kPi * 1.3 * static_cast<double>(i) / n);
  }

  const double origin_px = 4.3;
  const double finest_px = finest / mm_per_px;
  for (int k = 0;; ++k) {
    const double pos = origin_px + k * finest_px;
    if (pos > n - 1.0) break;
    const double mm = k * finest;
    double amp = 0.0;
    if (std::abs(std::remainder(mm, ticks.major_mm)) < 1e-9) {
      amp = 0.8;
    } else {
      double level = 0.55;
      for (double s : spacings) {
        if (std::abs(std::remainder(mm, s)) < 1e-9) {
          amp = level;
          break;
        }
        level *= 0.65;
      }
    }
    // Anti-aliased: split between the two nearest pixels.
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    line[lo] += amp * (1.0 - frac);
    if (lo + 1 < length) line[lo + 1] += amp * frac;
  }

  if (noise_amp > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> noise(-noise_amp, noise_amp);
    for (double& v : line) v += noise(rng);
  }
  for (double& v : line) v = std::clamp(v, 0.0, 1.0);
  return calibration::ScanLine(std::move(line));
}

geometry::Heatmap simulate_heatmap_frame(const geometry::Annotation& ann, double kernel_sigma,
                                         std::size_t width, std::size_t height,
                                         Corruption corruption, std::uint64_t seed) {
  geometry::Heatmap clean = geometry::reconstruct_heatmap(ann, kernel_sigma, width, height);
  if (corruption == Corruption::None) return clean;

  const auto* lin = std::get_if<geometry::LinearEndpoints>(&ann);
  const auto* outline = std::get_if<geometry::EllipseOutline>(&ann);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  switch (corruption) {
    case Corruption::None:
      break;
    case Corruption::ExtraBlob: {
      Point2D blob;
      if (lin != nullptr) {
        const Point2D mid{0.5 * (lin->p1.x + lin->p2.x), 0.5 * (lin->p1.y + lin->p2.y)};
        const double len = geometry::distance(lin->p1, lin->p2);
        const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
        blob = {mid.x - side * 0.5 * (lin->p2.y - lin->p1.y), mid.y + side * 0.5 * (lin->p2.x - lin->p1.x)};
        if (len == 0.0) blob = mid;
      } else {
        const double phi = unit(rng) < 0.5 ? 0.0 : kPi;
        blob = ellipse_point(outline->ellipse, phi, 0.3 * outline->ellipse.semi_major);
      }
      blob = clamp_to_grid(blob, width, height);
      const auto spot = splat({blob}, 1.5 * kernel_sigma, width, height);
      std::vector<double> values(clean.values().begin(), clean.values().end());
      for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::max(values[i], spot.values()[i]);
      return geometry::Heatmap(width, height, std::move(values));
    }
    case Corruption::MissingEndpoint: {
      if (lin != nullptr) {
        return splat({lin->p1}, kernel_sigma, width, height);
      }
      // Keep only a short arc around one end of the major axis.
      const auto& e = outline->ellipse;
      std::vector<Point2D> arc;
      for (int k = -20; k <= 20; ++k) arc.push_back(ellipse_point(e, k * (kPi / 180.0)));
      return splat(arc, kernel_sigma, width, height);
    }
    case Corruption::Smear: {
      std::vector<Point2D> curve;
      if (lin != nullptr) {
        const int steps = 400;
        for (int k = 0; k <= steps; ++k) {
          const double s = static_cast<double>(k) / steps;
          curve.push_back({lin->p1.x + s * (lin->p2.x - lin->p1.x),
                           lin->p1.y + s * (lin->p2.y - lin->p1.y)});
        }
        return splat(curve, kernel_sigma, width, height);
      }
      const auto& e = outline->ellipse;
      const double amplitude = 6.0 * kernel_sigma;
      const double lobes = 7.0;
      const double phase = 2.0 * kPi * unit(rng);
      const int steps = 2000;
      for (int k = 0; k < steps; ++k) {
        const double phi = 2.0 * kPi * k / steps;
        Point2D p = ellipse_point(e, phi, amplitude * std::sin(lobes * phi + phase));
        curve.push_back(clamp_to_grid(p, width, height));
      }
      return splat(curve, 1.5 * kernel_sigma, width, height);
    }
  }
  return clean;
}

std::pair<SimulatedStream, SimulatedStream> simulate_paired_scans(const PairedScanPair& p) {
  if (p.seed_a == p.seed_b) throw InvalidScenario("paired scans need distinct seeds");
  ScanScenario a = p.base;
  ScanScenario b = p.base;
  a.seed = p.seed_a;
  b.seed = p.seed_b;
  a.operator_offset_mm = p.offset_a_mm;
  b.operator_offset_mm = p.offset_b_mm;
  return {simulate_stream(a), simulate_stream(b)};
}

}  // namespace wholescan::sim
