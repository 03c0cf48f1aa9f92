#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace wholescan {

enum class Biometric { HC, BPD, AC, FL, TCD };

inline constexpr std::array<Biometric, 5> kAllBiometrics = {
    Biometric::HC, Biometric::BPD, Biometric::AC, Biometric::FL, Biometric::TCD};

// Standard planes as labelled by the upstream frame classifier. `Other`
// covers every frame that carries no biometric.
enum class Plane { BrainTV, BrainCB, Abdominal, Femur, Other };

inline constexpr std::array<Plane, 5> kAllPlanes = {
    Plane::BrainTV, Plane::BrainCB, Plane::Abdominal, Plane::Femur, Plane::Other};

enum class MeasurementKind { Linear, Ellipse };

std::string_view to_string(Biometric b);
std::string_view to_string(Plane p);
std::optional<Biometric> parse_biometric(std::string_view name);
std::optional<Plane> parse_plane(std::string_view name);

// Biometrics measured in a plane. Brain-TV yields both HC and BPD from the
// same head ellipse.
std::span<const Biometric> biometrics_for(Plane p);

// The plane in which a biometric is measured.
Plane plane_for(Biometric b);

MeasurementKind measurement_kind(Biometric b);

}  // namespace wholescan
