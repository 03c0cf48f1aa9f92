#include "wholescan/biometric.hpp"

namespace wholescan {

std::string_view to_string(Biometric b) {
  switch (b) {
    case Biometric::HC: return "HC";
    case Biometric::BPD: return "BPD";
    case Biometric::AC: return "AC";
    case Biometric::FL: return "FL";
    case Biometric::TCD: return "TCD";
  }
  return "?";
}

std::string_view to_string(Plane p) {
  switch (p) {
    case Plane::BrainTV: return "Brain-TV";
    case Plane::BrainCB: return "Brain-CB";
    case Plane::Abdominal: return "Abdominal";
    case Plane::Femur: return "Femur";
    case Plane::Other: return "Other";
  }
  return "?";
}

std::optional<Biometric> parse_biometric(std::string_view name) {
  for (auto b : kAllBiometrics) {
    if (to_string(b) == name) return b;
  }
  return std::nullopt;
}

std::optional<Plane> parse_plane(std::string_view name) {
  for (auto p : kAllPlanes) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

std::span<const Biometric> biometrics_for(Plane p) {
  static constexpr Biometric kHead[] = {Biometric::HC, Biometric::BPD};
  static constexpr Biometric kCerebellum[] = {Biometric::TCD};
  static constexpr Biometric kAbdomen[] = {Biometric::AC};
  static constexpr Biometric kFemur[] = {Biometric::FL};
  switch (p) {
    case Plane::BrainTV: return kHead;
    case Plane::BrainCB: return kCerebellum;
    case Plane::Abdominal: return kAbdomen;
    case Plane::Femur: return kFemur;
    case Plane::Other: break;
  }
  return {};
}

Plane plane_for(Biometric b) {
  switch (b) {
    case Biometric::HC:
    case Biometric::BPD: return Plane::BrainTV;
    case Biometric::TCD: return Plane::BrainCB;
    case Biometric::AC: return Plane::Abdominal;
    case Biometric::FL: return Plane::Femur;
  }
  return Plane::Other;
}

MeasurementKind measurement_kind(Biometric b) {
  switch (b) {
    case Biometric::HC:
    case Biometric::BPD:
    case Biometric::AC: return MeasurementKind::Ellipse;
    case Biometric::FL:
    case Biometric::TCD: return MeasurementKind::Linear;
  }
  return MeasurementKind::Linear;
}

}  // namespace wholescan
