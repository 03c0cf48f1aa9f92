#include "wholescan/pipeline.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "wholescan/calibration.hpp"
#include "wholescan/error.hpp"

namespace wholescan::pipeline {

namespace {

using nlohmann::json;
using estimator::EstimateSnapshot;

struct Extracted {
  std::map<Biometric, double> values_mm;
  std::optional<geometry::EllipseParams> ellipse;
  std::optional<geometry::Annotation> reconstruct_from;  // heatmap payloads only
};

bool is_ellipse_plane(Plane p) { return p == Plane::BrainTV || p == Plane::Abdominal; }

void put_ellipse_values(Plane plane, const geometry::EllipseParams& e, geometry::PixelScale s,
                        Extracted& out) {
  if (plane == Plane::BrainTV) {
    out.values_mm[Biometric::HC] = geometry::ellipse_perimeter(e, s);
    out.values_mm[Biometric::BPD] = geometry::bpd_from_head_ellipse(e, s);
  } else {
    out.values_mm[Biometric::AC] = geometry::ellipse_perimeter(e, s);
  }
  out.ellipse = e;
}

// Throws wholescan::Error (or std::invalid_argument) when the payload cannot
// produce a measurement for this plane.
Extracted extract(const FrameRecord& fr, const RunConfig& cfg, ScaleTracker& scales) {
  Extracted out;
  if (const auto* m = std::get_if<MeasurementPayload>(&fr.payload)) {
    for (Biometric b : biometrics_for(fr.plane)) {
      if (const auto it = m->values_mm.find(b); it != m->values_mm.end()) {
        if (!std::isfinite(it->second)) throw DegenerateInput("non-finite measurement");
        out.values_mm[b] = it->second;
      }
    }
    return out;
  }

  const auto scale = scales.resolve(fr);
  if (!scale) throw OutOfBounds("no pixel scale available");

  if (const auto* a = std::get_if<AnnotationPayload>(&fr.payload)) {
    if (const auto* outline = std::get_if<geometry::EllipseOutline>(&a->annotation)) {
      if (!is_ellipse_plane(fr.plane)) throw DegenerateInput("ellipse annotation on a linear plane");
      put_ellipse_values(fr.plane, outline->ellipse, *scale, out);
    } else {
      const auto& lin = std::get<geometry::LinearEndpoints>(a->annotation);
      if (is_ellipse_plane(fr.plane)) throw DegenerateInput("linear annotation on an ellipse plane");
      out.values_mm[biometrics_for(fr.plane).front()] = scale->to_mm(geometry::distance(lin.p1, lin.p2));
    }
    return out;
  }

  const auto& h = std::get<HeatmapPayload>(fr.payload).heatmap;
  if (is_ellipse_plane(fr.plane)) {
    const auto e = geometry::heatmap_to_ellipse(h, cfg.geometry.intensity_floor);
    put_ellipse_values(fr.plane, e, *scale, out);
    out.reconstruct_from = geometry::EllipseOutline{e};
  } else {
    const auto lm = geometry::linear_biometric(h, *scale, cfg.geometry.min_separation_px,
                                               cfg.geometry.peak_floor);
    out.values_mm[biometrics_for(fr.plane).front()] = lm.length_mm;
    out.reconstruct_from = geometry::LinearEndpoints{lm.p1, lm.p2};
  }
  return out;
}

std::optional<std::string> eccentricity_violation(Plane plane, const geometry::EllipseParams& e,
                                                  const GateConfig& g) {
  const double ecc = geometry::eccentricity(e);
  if (plane == Plane::BrainTV && (ecc < g.head_ecc_min || ecc > g.head_ecc_max)) {
    return "head eccentricity " + std::to_string(ecc) + " outside range";
  }
  if (plane == Plane::Abdominal && ecc > g.abdomen_ecc_max) {
    return "abdomen eccentricity " + std::to_string(ecc) + " above maximum";
  }
  return std::nullopt;
}

// Dice overlap between the payload (peak-normalized) and the rendering of the
// geometry extracted from it.
double reconstruction_dsc(const geometry::Heatmap& h, const geometry::Annotation& ann,
                          const RunConfig& cfg) {
  const auto recon = geometry::reconstruct_heatmap(ann, cfg.geometry.kernel_sigma_px, h.width(),
                                                   h.height());
  const double peak = h.max_value();
  if (!(peak > 0.0)) return 0.0;
  std::vector<double> scaled(h.values().begin(), h.values().end());
  for (double& v : scaled) v /= peak;
  return geometry::dsc(geometry::Heatmap(h.width(), h.height(), std::move(scaled)), recon,
                       cfg.gates.dsc_binarize_at);
}

void append_number(std::string& out, double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), res.ptr);
}

json snapshot_json(const EstimateSnapshot& s) {
  return {{"mu_mm", s.mu},          {"sigma_hat_mm", s.sigma_hat}, {"ci_low_mm", s.ci_low},
          {"ci_high_mm", s.ci_high}, {"p_t", s.p_t},               {"n_accepted", s.n_accepted},
          {"n_rejected", s.n_rejected}};
}

EstimateSnapshot snapshot_from_json(const json& j) {
  EstimateSnapshot s;
  s.mu = j.at("mu_mm").get<double>();
  s.sigma_hat = j.at("sigma_hat_mm").get<double>();
  s.ci_low = j.at("ci_low_mm").get<double>();
  s.ci_high = j.at("ci_high_mm").get<double>();
  s.p_t = j.at("p_t").get<double>();
  s.n_accepted = j.at("n_accepted").get<std::uint64_t>();
  s.n_rejected = j.at("n_rejected").get<std::uint64_t>();
  return s;
}

std::optional<Disposition> parse_disposition(std::string_view name) {
  for (Disposition d : kAllDispositions) {
    if (to_string(d) == name) return d;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Disposition d) {
  switch (d) {
    case Disposition::Accepted: return "accepted";
    case Disposition::Frozen: return "frozen";
    case Disposition::Confidence: return "confidence";
    case Disposition::Geometry: return "geometry";
    case Disposition::Eccentricity: return "eccentricity";
    case Disposition::Dsc: return "dsc";
    case Disposition::Plausibility: return "plausibility";
  }
  return "?";
}

std::optional<geometry::PixelScale> ScaleTracker::resolve(const FrameRecord& fr) {
  if (fr.scale_mm_per_px) {
    last_ = geometry::PixelScale(*fr.scale_mm_per_px);
    return last_;
  }
  if (fr.scanline) {
    try {
      last_ = calibration::pixel_size(calibration::ScanLine(*fr.scanline), ticks_);
    } catch (const NoPeriodicity&) {
    } catch (const std::invalid_argument&) {
    }
  }
  return last_;
}

std::vector<GateOutcome> gate_chain(const FrameRecord& fr, const RunConfig& cfg,
                                    ScaleTracker& scales, EstimatorMap& states) {
  std::vector<GateOutcome> outcomes;
  for (Biometric b : biometrics_for(fr.plane)) {
    if (states.contains(b)) outcomes.push_back({b, Disposition::Accepted, std::nullopt, {}});
  }
  if (outcomes.empty()) return outcomes;

  const auto reject_all = [&](Disposition d, const std::string& detail) {
    for (auto& o : outcomes) {
      o.disposition = d;
      o.detail = detail;
    }
    return outcomes;
  };

  if (fr.frozen) return reject_all(Disposition::Frozen, "frozen frame");
  if (fr.conf < cfg.gates.confidence_min) return reject_all(Disposition::Confidence, "low confidence");

  Extracted ex;
  try {
    ex = extract(fr, cfg, scales);
  } catch (const Error& e) {
    return reject_all(Disposition::Geometry, e.what());
  } catch (const std::invalid_argument& e) {
    return reject_all(Disposition::Geometry, e.what());
  }

  if (ex.ellipse) {
    if (auto why = eccentricity_violation(fr.plane, *ex.ellipse, cfg.gates)) {
      return reject_all(Disposition::Eccentricity, *why);
    }
  }

  if (ex.reconstruct_from) {
    double overlap = 0.0;
    try {
      overlap = reconstruction_dsc(std::get<HeatmapPayload>(fr.payload).heatmap,
                                   *ex.reconstruct_from, cfg);
    } catch (const Error& e) {
      return reject_all(Disposition::Geometry, e.what());
    }
    if (overlap < cfg.gates.dsc_min) {
      return reject_all(Disposition::Dsc, "reconstruction DSC " + std::to_string(overlap));
    }
  }

  for (auto& o : outcomes) {
    const auto it = ex.values_mm.find(o.biometric);
    if (it == ex.values_mm.end()) {
      o.disposition = Disposition::Geometry;
      o.detail = "payload lacks this biometric";
      continue;
    }
    o.value_mm = it->second;
    if (!states.at(o.biometric).offer(it->second)) {
      o.disposition = Disposition::Plausibility;
      o.detail = "outside plausibility window";
    }
  }
  return outcomes;
}

double BiometricReport::acceptance_fraction() const {
  return routed == 0 ? 0.0 : static_cast<double>(count(Disposition::Accepted)) / routed;
}

double BiometricReport::geometry_valid_acceptance() const {
  const std::uint64_t valid = routed - count(Disposition::Frozen) - count(Disposition::Confidence) -
                              count(Disposition::Geometry);
  return valid == 0 ? 0.0 : static_cast<double>(count(Disposition::Accepted)) / valid;
}

std::uint64_t BiometricReport::count(Disposition d) const {
  const auto it = counts.find(d);
  return it == counts.end() ? 0 : it->second;
}

void write_timeseries_row(std::ostream& out, const TimeSeriesRow& row) {
  std::string line = std::to_string(row.frame);
  line += ',';
  append_number(line, row.t);
  line += ',';
  line += to_string(row.biometric);
  for (double v : {row.snapshot.mu, row.snapshot.sigma_hat, row.snapshot.ci_low,
                   row.snapshot.ci_high, row.snapshot.p_t}) {
    line += ',';
    append_number(line, v);
  }
  line += ',';
  line += std::to_string(row.snapshot.n_accepted);
  line += '\n';
  out << line;
}

Runner::Runner(const GrowthChart& chart, RunConfig cfg)
    : cfg_(std::move(cfg)), scales_(cfg_.ticks) {
  cfg_.validate();
  if (!cfg_.ga) throw ConfigError("run config needs a gestational age");
  for (Biometric b : kAllBiometrics) {
    if (!chart.has(b)) continue;
    const auto [lo, hi] = chart.domain(b);
    if (cfg_.ga->days() < lo || cfg_.ga->days() > hi) continue;
    const auto initial = estimator::init_estimator(b, *cfg_.ga, chart, cfg_.estimator);
    states_.emplace(b, estimator::BiometricEstimator(initial, cfg_.estimator.ci_multiplier));
    auto& rep = report_.biometrics[b];
    rep.prior = estimator::snapshot(initial, cfg_.estimator.ci_multiplier);
    rep.final = rep.prior;
    for (Disposition d : kAllDispositions) rep.counts[d] = 0;
  }
  if (states_.empty()) {
    throw GAOutOfRange("gestational age " + cfg_.ga->to_string() +
                       " is outside every growth chart curve");
  }
}

void Runner::set_timeseries_sink(std::ostream* out) { timeseries_ = out; }

std::vector<GateOutcome> Runner::process(const FrameRecord& fr) {
  ++report_.total_frames;
  auto outcomes = gate_chain(fr, cfg_, scales_, states_);
  if (outcomes.empty()) ++report_.unrouted_frames;
  for (const auto& o : outcomes) {
    auto& rep = report_.biometrics.at(o.biometric);
    ++rep.routed;
    ++rep.counts[o.disposition];
    rep.final = states_.at(o.biometric).snapshot();
    if (o.disposition != Disposition::Accepted) continue;
    rep.series.push_back({fr.frame, fr.t, rep.final});
    if (timeseries_ != nullptr) write_timeseries_row(*timeseries_, {fr.frame, fr.t, o.biometric, rep.final});
  }
  return outcomes;
}

RunReport run(const std::vector<FrameRecord>& records, const GrowthChart& chart,
              const RunConfig& cfg, std::ostream* timeseries) {
  Runner runner(chart, cfg);
  if (timeseries != nullptr) {
    *timeseries << kTimeSeriesHeader << '\n';
    runner.set_timeseries_sink(timeseries);
  }
  for (const auto& r : records) runner.process(r);
  return runner.take_report();
}

RunReport run(std::istream& jsonl, const GrowthChart& chart, const RunConfig& cfg,
              std::ostream* timeseries) {
  Runner runner(chart, cfg);
  if (timeseries != nullptr) {
    *timeseries << kTimeSeriesHeader << '\n';
    runner.set_timeseries_sink(timeseries);
  }
  auto diagnostics =
      for_each_record(jsonl, cfg.strict, [&](FrameRecord&& r) { runner.process(r); });
  RunReport report = runner.take_report();
  report.diagnostics = std::move(diagnostics);
  return report;
}

std::string report_to_json(const RunReport& r, bool include_series) {
  json j;
  j["total_frames"] = r.total_frames;
  j["unrouted_frames"] = r.unrouted_frames;
  json diags = json::array();
  for (const auto& d : r.diagnostics) diags.push_back({{"line", d.line}, {"message", d.message}});
  j["diagnostics"] = diags;
  json bs = json::object();
  for (const auto& [b, rep] : r.biometrics) {
    json entry;
    entry["prior"] = snapshot_json(rep.prior);
    entry["final"] = snapshot_json(rep.final);
    entry["routed"] = rep.routed;
    entry["acceptance_fraction"] = rep.acceptance_fraction();
    json counts = json::object();
    for (Disposition d : kAllDispositions) counts[std::string(to_string(d))] = rep.count(d);
    entry["counts"] = counts;
    if (include_series) {
      json series = json::array();
      for (const auto& p : rep.series) {
        json point = snapshot_json(p.snapshot);
        point["frame"] = p.frame;
        point["t"] = p.t;
        series.push_back(std::move(point));
      }
      entry["series"] = std::move(series);
    }
    bs[std::string(wholescan::to_string(b))] = std::move(entry);
  }
  j["biometrics"] = bs;
  return j.dump(2);
}

RunReport report_from_json(std::string_view text) {
  const json j = json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("report is not a JSON object");
  RunReport r;
  try {
    r.total_frames = j.at("total_frames").get<std::uint64_t>();
    r.unrouted_frames = j.at("unrouted_frames").get<std::uint64_t>();
    for (const auto& d : j.value("diagnostics", json::array())) {
      r.diagnostics.push_back({d.at("line").get<std::size_t>(), d.at("message").get<std::string>()});
    }
    for (const auto& [name, entry] : j.at("biometrics").items()) {
      const auto b = parse_biometric(name);
      if (!b) throw ConfigError("report names unknown biometric '" + name + "'");
      BiometricReport rep;
      rep.prior = snapshot_from_json(entry.at("prior"));
      rep.final = snapshot_from_json(entry.at("final"));
      rep.routed = entry.at("routed").get<std::uint64_t>();
      for (const auto& [dname, count] : entry.at("counts").items()) {
        const auto d = parse_disposition(dname);
        if (!d) throw ConfigError("report names unknown disposition '" + dname + "'");
        rep.counts[*d] = count.get<std::uint64_t>();
      }
      if (const auto it = entry.find("series"); it != entry.end()) {
        for (const auto& p : *it) {
          rep.series.push_back(
              {p.at("frame").get<std::uint64_t>(), p.at("t").get<double>(), snapshot_from_json(p)});
        }
      }
      r.biometrics[*b] = std::move(rep);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

RunReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open report " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

}  // namespace wholescan::pipeline
