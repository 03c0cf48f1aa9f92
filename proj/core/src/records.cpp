#include "wholescan/records.hpp"

#include <istream>
#include <ostream>

#include "json.hpp"
#include "wholescan/error.hpp"

namespace wholescan {

namespace {

using nlohmann::json;

json point_json(geometry::Point2D p) { return json::array({p.x, p.y}); }

json payload_json(const Payload& payload) {
  json out;
  if (const auto* m = std::get_if<MeasurementPayload>(&payload)) {
    out["kind"] = "measurement";
    json values = json::object();
    for (const auto& [b, v] : m->values_mm) values[std::string(to_string(b))] = v;
    out["values"] = std::move(values);
  } else if (const auto* h = std::get_if<HeatmapPayload>(&payload)) {
    out["kind"] = "heatmap";
    out["width"] = h->heatmap.width();
    out["height"] = h->heatmap.height();
    const auto v = h->heatmap.values();
    out["values"] = std::vector<double>(v.begin(), v.end());
  } else {
    const auto& ann = std::get<AnnotationPayload>(payload).annotation;
    out["kind"] = "annotation";
    if (const auto* lin = std::get_if<geometry::LinearEndpoints>(&ann)) {
      out["type"] = "linear";
      out["p1"] = point_json(lin->p1);
      out["p2"] = point_json(lin->p2);
    } else {
      const auto& e = std::get<geometry::EllipseOutline>(ann).ellipse;
      out["type"] = "ellipse";
      out["center"] = point_json(e.center);
      out["semi_minor"] = e.semi_minor;
      out["semi_major"] = e.semi_major;
      out["rotation"] = e.rotation;
    }
  }
  return out;
}

// Field access with schema errors mapped to ParseError at the current line.
class Reader {
 public:
  explicit Reader(std::size_t line) : line_(line) {}

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, what); }

  const json& field(const json& obj, const char* key) const {
    const auto it = obj.find(key);
    if (it == obj.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }

  double number(const json& obj, const char* key) const {
    const json& v = field(obj, key);
    if (!v.is_number()) fail(std::string("field '") + key + "' is not a number");
    return v.get<double>();
  }

  std::string string(const json& obj, const char* key) const {
    const json& v = field(obj, key);
    if (!v.is_string()) fail(std::string("field '") + key + "' is not a string");
    return v.get<std::string>();
  }

  geometry::Point2D point(const json& obj, const char* key) const {
    const json& v = field(obj, key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      fail(std::string("field '") + key + "' is not an [x, y] pair");
    }
    return {v[0].get<double>(), v[1].get<double>()};
  }

  std::vector<double> numbers(const json& v, const char* key) const {
    if (!v.is_array()) fail(std::string("field '") + key + "' is not an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
      if (!e.is_number()) fail(std::string("field '") + key + "' holds a non-number");
      out.push_back(e.get<double>());
    }
    return out;
  }

 private:
  std::size_t line_;
};

Payload parse_payload(const json& p, const Reader& rd) {
  if (!p.is_object()) rd.fail("payload is not an object");
  const std::string kind = rd.string(p, "kind");
  if (kind == "measurement") {
    MeasurementPayload m;
    const json& values = rd.field(p, "values");
    if (!values.is_object()) rd.fail("measurement values must be an object");
    for (const auto& [name, v] : values.items()) {
      const auto b = parse_biometric(name);
      if (!b) rd.fail("unknown biometric '" + name + "'");
      if (!v.is_number()) rd.fail("measurement for " + name + " is not a number");
      m.values_mm[*b] = v.get<double>();
    }
    return m;
  }
  if (kind == "heatmap") {
    const double w = rd.number(p, "width");
    const double h = rd.number(p, "height");
    if (!(w >= 0 && h >= 0)) rd.fail("negative heatmap size");
    auto values = rd.numbers(rd.field(p, "values"), "values");
    try {
      return HeatmapPayload{geometry::Heatmap(static_cast<std::size_t>(w),
                                              static_cast<std::size_t>(h), std::move(values))};
    } catch (const Error& e) {
      rd.fail(std::string("invalid heatmap: ") + e.what());
    }
  }
  if (kind == "annotation") {
    const std::string type = rd.string(p, "type");
    if (type == "linear") {
      geometry::LinearEndpoints lin{rd.point(p, "p1"), rd.point(p, "p2")};
      if (lin.p1 == lin.p2) rd.fail("linear annotation endpoints coincide");
      return AnnotationPayload{lin};
    }
    if (type == "ellipse") {
      try {
        const auto e = geometry::make_ellipse(rd.point(p, "center"), rd.number(p, "semi_minor"),
                                              rd.number(p, "semi_major"), rd.number(p, "rotation"));
        return AnnotationPayload{geometry::EllipseOutline{e}};
      } catch (const DegenerateInput& e) {
        rd.fail(std::string("invalid ellipse annotation: ") + e.what());
      }
    }
    rd.fail("unknown annotation type '" + type + "'");
  }
  rd.fail("unknown payload kind '" + kind + "'");
}

}  // namespace

std::string to_json_line(const FrameRecord& r) {
  json j;
  j["frame"] = r.frame;
  j["t"] = r.t;
  j["plane"] = std::string(to_string(r.plane));
  j["conf"] = r.conf;
  j["payload"] = payload_json(r.payload);
  if (r.scale_mm_per_px) j["scale_mm_per_px"] = *r.scale_mm_per_px;
  if (r.scanline) j["scanline"] = *r.scanline;
  j["frozen"] = r.frozen;
  return j.dump();
}

FrameRecord parse_json_line(std::string_view line, std::size_t line_no) {
  const Reader rd(line_no);
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) rd.fail("invalid JSON");
  if (!j.is_object()) rd.fail("record is not a JSON object");

  FrameRecord r;
  const json& frame = rd.field(j, "frame");
  if (!frame.is_number_integer() || frame.get<std::int64_t>() < 0) {
    rd.fail("field 'frame' must be a non-negative integer");
  }
  r.frame = frame.get<std::uint64_t>();
  r.t = rd.number(j, "t");
  r.plane = parse_plane(rd.string(j, "plane")).value_or(Plane::Other);
  r.conf = rd.number(j, "conf");
  if (!(r.conf >= 0.0 && r.conf <= 1.0)) rd.fail("field 'conf' outside [0, 1]");
  r.payload = parse_payload(rd.field(j, "payload"), rd);

  if (const auto it = j.find("scale_mm_per_px"); it != j.end() && !it->is_null()) {
    if (!it->is_number() || !(it->get<double>() > 0.0)) {
      rd.fail("field 'scale_mm_per_px' must be a positive number");
    }
    r.scale_mm_per_px = it->get<double>();
  }
  if (const auto it = j.find("scanline"); it != j.end() && !it->is_null()) {
    auto samples = rd.numbers(*it, "scanline");
    for (double v : samples) {
      if (!(v >= 0.0 && v <= 1.0)) rd.fail("scanline value outside [0, 1]");
    }
    r.scanline = std::move(samples);
  }
  if (const auto it = j.find("frozen"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) rd.fail("field 'frozen' is not a boolean");
    r.frozen = it->get<bool>();
  }
  return r;
}

void write_jsonl(std::ostream& out, const std::vector<FrameRecord>& records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

std::vector<ParseDiagnostic> for_each_record(std::istream& in, bool strict,
                                             const std::function<void(FrameRecord&&)>& sink) {
  std::vector<ParseDiagnostic> diagnostics;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    FrameRecord record;
    try {
      record = parse_json_line(line, line_no);
    } catch (const ParseError& e) {
      if (strict) throw;
      diagnostics.push_back({line_no, e.what()});
      continue;
    }
    sink(std::move(record));
  }
  return diagnostics;
}

IngestResult ingest(std::istream& in, bool strict) {
  IngestResult result;
  result.diagnostics =
      for_each_record(in, strict, [&](FrameRecord&& r) { result.records.push_back(std::move(r)); });
  return result;
}

}  // namespace wholescan
