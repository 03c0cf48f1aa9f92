#include <sstream>

#include "doctest.h"
#include "wholescan/error.hpp"
#include "wholescan/records.hpp"
#include "wholescan/simulator.hpp"

using namespace wholescan;

TEST_CASE("measurement record round trip") {
  FrameRecord r;
  r.frame = 17;
  r.t = 0.5666666666666667;
  r.plane = Plane::Femur;
  r.conf = 0.9731;
  r.payload = MeasurementPayload{{{Biometric::FL, 33.12345678901234}}};
  r.scale_mm_per_px = 0.4;
  r.frozen = true;
  CHECK(parse_json_line(to_json_line(r)) == r);
}

TEST_CASE("annotation and heatmap round trip") {
  FrameRecord lin;
  lin.plane = Plane::BrainCB;
  lin.conf = 1.0;
  lin.payload = AnnotationPayload{geometry::LinearEndpoints{{1.5, 2.25}, {30.125, 40.0}}};
  lin.scanline = std::vector<double>(64, 0.25);
  CHECK(parse_json_line(to_json_line(lin)) == lin);

  FrameRecord ell = lin;
  ell.payload = AnnotationPayload{geometry::EllipseOutline{geometry::make_ellipse({40, 41}, 20, 25, 1.0)}};
  CHECK(parse_json_line(to_json_line(ell)) == ell);

  FrameRecord hm = lin;
  std::vector<double> v(12);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i / 11.0;
  hm.payload = HeatmapPayload{geometry::Heatmap(4, 3, v)};
  CHECK(parse_json_line(to_json_line(hm)) == hm);
}

TEST_CASE("schema defaults and tolerance") {
  const auto r = parse_json_line(
      R"({"frame":3,"t":0.1,"plane":"Head-Sagittal","conf":0.5,"payload":{"kind":"measurement","values":{}},"extra":1})");
  CHECK(r.plane == Plane::Other);
  CHECK_FALSE(r.frozen);
  CHECK_FALSE(r.scale_mm_per_px.has_value());
}

TEST_CASE("schema violations carry the line number") {
  const char* bad[] = {
      R"({"frame":1,"t":0,"plane":"Femur","conf":0.9})",
      R"({"frame":1,"t":0,"plane":"Femur","conf":1.5,"payload":{"kind":"measurement","values":{}}})",
      R"({"frame":-1,"t":0,"plane":"Femur","conf":0.5,"payload":{"kind":"measurement","values":{}}})",
      R"({"frame":1,"t":0,"plane":"Femur","conf":0.5,"payload":{"kind":"blob"}})",
      R"({"frame":1,"t":0,"plane":"Femur","conf":0.5,"payload":{"kind":"measurement","values":{"XX":1}}})",
      R"({"frame":1,"t":0,"plane":"Femur","conf":0.5,"payload":{"kind":"heatmap","width":2,"height":2,"values":[0,0,0]}})",
      R"({"frame":1,"t":0,"plane":"Femur","conf":0.5,"payload":{"kind":"annotation","type":"linear","p1":[1,1],"p2":[1,1]}})",
      R"({"frame":1,"t":0,"plane":"Femur","conf":0.5,"payload":{"kind":"measurement","values":{}},"scale_mm_per_px":0})",
      R"({"frame":1,"t":0,"plane":"Femur","conf":0.5,"payload":{"kind":"measurement","values":{}},"frozen":"yes"})",
      R"(not json)",
      R"([1,2,3])",
  };
  for (const char* line : bad) {
    CAPTURE(line);
    try {
      parse_json_line(line, 42);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 42);
    }
  }
}

TEST_CASE("ingest skips or aborts on malformed lines") {
  const std::string good =
      R"({"frame":0,"t":0,"plane":"Femur","conf":0.99,"payload":{"kind":"measurement","values":{"FL":33}}})";
  const std::string text = good + "\n\n{broken\n" + good + "\n";

  std::istringstream lenient(text);
  const auto res = ingest(lenient);
  CHECK(res.records.size() == 2);
  REQUIRE(res.diagnostics.size() == 1);
  CHECK(res.diagnostics[0].line == 3);

  std::istringstream strict(text);
  try {
    ingest(strict, true);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }

  std::istringstream empty("");
  CHECK(ingest(empty).records.empty());
}

TEST_CASE("simulator output round-trips losslessly") {
  auto sc = sim::ScanScenario{};
  sc.biometrics[Biometric::FL] = {33.0, 0.79, 1.8, 20.2, 45.8};
  sc.schedule = {{Plane::Other, 1.0}, {Plane::Femur, 2.0}};
  sc.scale_schedule = {{0.4, 3.0}};
  sc.emit_scanline = true;
  sc.scanline_length = 400;
  sc.payload = sim::PayloadMode::Annotation;
  sc.seed = 9;
  const auto stream = sim::simulate_stream(sc);
  std::ostringstream out;
  write_jsonl(out, stream.records);
  std::istringstream in(out.str());
  const auto back = ingest(in, true);
  CHECK(back.records == stream.records);
}
