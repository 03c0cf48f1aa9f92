#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wholescan/biometric.hpp"
#include "wholescan/geometry.hpp"

namespace wholescan {

// Measurements already converted to millimetres upstream.
struct MeasurementPayload {
  std::map<Biometric, double> values_mm;

  friend bool operator==(const MeasurementPayload&, const MeasurementPayload&) = default;
};

struct HeatmapPayload {
  geometry::Heatmap heatmap;

  friend bool operator==(const HeatmapPayload&, const HeatmapPayload&) = default;
};

struct AnnotationPayload {
  geometry::Annotation annotation;

  friend bool operator==(const AnnotationPayload&, const AnnotationPayload&) = default;
};

using Payload = std::variant<MeasurementPayload, HeatmapPayload, AnnotationPayload>;

// One observed frame of an examination. Labels the classifier emits that are
// not biometric planes are read as Plane::Other.
struct FrameRecord {
  std::uint64_t frame = 0;
  double t = 0.0;
  Plane plane = Plane::Other;
  double conf = 0.0;
  Payload payload;
  std::optional<double> scale_mm_per_px;
  std::optional<std::vector<double>> scanline;
  bool frozen = false;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

// One JSON object, no trailing newline.
std::string to_json_line(const FrameRecord& r);

// Throws ParseError (carrying line_no) on schema violations.
FrameRecord parse_json_line(std::string_view line, std::size_t line_no = 1);

void write_jsonl(std::ostream& out, const std::vector<FrameRecord>& records);

struct ParseDiagnostic {
  std::size_t line = 0;
  std::string message;
};

// Streams records to `sink` in file order. Blank lines are skipped. In
// strict mode the first malformed line throws ParseError; otherwise it is
// reported through the returned diagnostics and skipped.
std::vector<ParseDiagnostic> for_each_record(std::istream& in, bool strict,
                                             const std::function<void(FrameRecord&&)>& sink);

struct IngestResult {
  std::vector<FrameRecord> records;
  std::vector<ParseDiagnostic> diagnostics;
};

IngestResult ingest(std::istream& in, bool strict = false);

}  // namespace wholescan
