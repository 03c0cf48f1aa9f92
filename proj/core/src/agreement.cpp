#include "wholescan/agreement.hpp"

#include <cmath>
#include <numeric>

#include "wholescan/error.hpp"

namespace wholescan::agreement {

AgreementStats agreement(std::span<const double> estimate, std::span<const double> reference,
                         std::optional<DifferenceLimits> limits) {
  if (estimate.size() != reference.size()) {
    throw DimensionMismatch("estimate and reference lengths differ");
  }
  if (estimate.empty()) throw EmptyIntersection("no pairs to compare");

  AgreementStats s;
  s.n = estimate.size();
  const double n = static_cast<double>(s.n);
  double sum_d = 0.0, sum_sq = 0.0, sum_abs = 0.0, sum_ref = 0.0;
  std::size_t inside = 0;
  s.rows.reserve(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    const double d = estimate[i] - reference[i];
    sum_d += d;
    sum_sq += d * d;
    sum_abs += std::abs(d);
    sum_ref += reference[i];
    s.rows.push_back({0.5 * (estimate[i] + reference[i]), d});
    if (limits && d >= limits->lower_mm && d <= limits->upper_mm) ++inside;
  }
  s.bias_mm = sum_d / n;
  s.msd_mm = std::sqrt(sum_sq / n);
  s.mad_mm = sum_abs / n;
  if (s.n > 1) {
    double ss = 0.0;
    for (const auto& row : s.rows) ss += (row.difference - s.bias_mm) * (row.difference - s.bias_mm);
    s.sd_mm = std::sqrt(ss / (n - 1.0));
  }
  const double ref_mean = sum_ref / n;
  if (ref_mean != 0.0) {
    const double k = 100.0 / std::abs(ref_mean);
    s.bias_pct = s.bias_mm * k;
    s.msd_pct = s.msd_mm * k;
    s.mad_pct = s.mad_mm * k;
    s.sd_pct = s.sd_mm * k;
  }
  if (limits) s.within_limits = static_cast<double>(inside) / n;
  return s;
}

AgreementStats compare(const std::map<std::string, double>& estimates,
                       const std::map<std::string, double>& references,
                       std::optional<DifferenceLimits> limits) {
  std::vector<double> est, ref;
  for (const auto& [key, value] : estimates) {
    if (const auto it = references.find(key); it != references.end()) {
      est.push_back(value);
      ref.push_back(it->second);
    }
  }
  if (est.empty()) throw EmptyIntersection("estimates and references share no keys");
  return agreement(est, ref, limits);
}

std::map<Biometric, TestRetestStats> test_retest(
    std::span<const std::pair<pipeline::RunReport, pipeline::RunReport>> pairs,
    std::uint64_t min_accepted) {
  std::map<Biometric, TestRetestStats> out;
  for (Biometric b : kAllBiometrics) {
    std::vector<double> a_vals, b_vals;
    double sum_var = 0.0;
    std::size_t excluded = 0;
    for (const auto& [a, bb] : pairs) {
      const auto ia = a.biometrics.find(b);
      const auto ib = bb.biometrics.find(b);
      const bool in_a = ia != a.biometrics.end();
      const bool in_b = ib != bb.biometrics.end();
      if (!in_a && !in_b) continue;
      if (!in_a || !in_b || ia->second.final.n_accepted < min_accepted ||
          ib->second.final.n_accepted < min_accepted) {
        ++excluded;
        continue;
      }
      a_vals.push_back(ia->second.final.mu);
      b_vals.push_back(ib->second.final.mu);
      sum_var += ia->second.final.sigma_hat * ia->second.final.sigma_hat +
                 ib->second.final.sigma_hat * ib->second.final.sigma_hat;
    }
    if (a_vals.empty()) continue;
    TestRetestStats t;
    t.stats = agreement(a_vals, b_vals);
    t.pairs = a_vals.size();
    t.excluded = excluded;
    t.predicted_sd_mm = std::sqrt(sum_var / static_cast<double>(t.pairs));
    out[b] = std::move(t);
  }
  if (out.empty()) throw EmptyIntersection("no biometric has a usable pair of scans");
  return out;
}

std::map<Biometric, CoverageStats> ci_coverage(std::span<const pipeline::RunReport> reports,
                                               const std::map<Biometric, double>& truth) {
  std::map<Biometric, CoverageStats> out;
  for (const auto& r : reports) {
    for (const auto& [b, rep] : r.biometrics) {
      const auto it = truth.find(b);
      if (it == truth.end() || rep.final.n_accepted == 0) continue;
      auto& c = out[b];
      ++c.n;
      if (it->second >= rep.final.ci_low && it->second <= rep.final.ci_high) ++c.covered;
    }
  }
  return out;
}

}  // namespace wholescan::agreement
