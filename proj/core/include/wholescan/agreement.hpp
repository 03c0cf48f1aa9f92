#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wholescan/biometric.hpp"
#include "wholescan/pipeline.hpp"

namespace wholescan::agreement {

struct BlandAltmanRow {
  double mean = 0.0;
  double difference = 0.0;  // estimate - reference
};

// Differences are estimate - reference. MSD is the root-mean-square
// difference. Percentages are relative to the mean of the reference values.
struct AgreementStats {
  std::size_t n = 0;
  double bias_mm = 0.0;
  double bias_pct = 0.0;
  double msd_mm = 0.0;
  double msd_pct = 0.0;
  double mad_mm = 0.0;
  double mad_pct = 0.0;
  double sd_mm = 0.0;   // sample sd (n - 1), 0 for a single pair
  double sd_pct = 0.0;
  std::vector<BlandAltmanRow> rows;
  // Fraction of differences inside caller-supplied limits, when given.
  std::optional<double> within_limits;
};

struct DifferenceLimits {
  double lower_mm = 0.0;
  double upper_mm = 0.0;
};

// Throws EmptyIntersection on empty input and DimensionMismatch on unequal
// lengths.
AgreementStats agreement(std::span<const double> estimate, std::span<const double> reference,
                         std::optional<DifferenceLimits> limits = std::nullopt);

// Matches estimates and references by key; unmatched keys are ignored.
// Throws EmptyIntersection if no key matches.
AgreementStats compare(const std::map<std::string, double>& estimates,
                       const std::map<std::string, double>& references,
                       std::optional<DifferenceLimits> limits = std::nullopt);

struct TestRetestStats {
  AgreementStats stats;  // scan A vs scan B
  std::size_t pairs = 0;
  std::size_t excluded = 0;
  // sqrt(mean(sigma_hat_a^2 + sigma_hat_b^2)): sd of the differences implied
  // by the reported standard errors.
  double predicted_sd_mm = 0.0;
};

// Per-biometric test-retest agreement over paired reports. A pair is excluded
// for a biometric when either scan accepted fewer than min_accepted
// measurements of it. Throws EmptyIntersection if no biometric has a pair.
std::map<Biometric, TestRetestStats> test_retest(
    std::span<const std::pair<pipeline::RunReport, pipeline::RunReport>> pairs,
    std::uint64_t min_accepted = 1);

struct CoverageStats {
  std::size_t n = 0;
  std::size_t covered = 0;
  double fraction() const { return n == 0 ? 0.0 : static_cast<double>(covered) / n; }
};

// Counts how often truth lies in [ci_low, ci_high] over reports; biometrics
// without a truth value or without accepted measurements are skipped.
std::map<Biometric, CoverageStats> ci_coverage(std::span<const pipeline::RunReport> reports,
                                               const std::map<Biometric, double>& truth);

}  // namespace wholescan::agreement
