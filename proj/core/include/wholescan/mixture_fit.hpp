#pragma once

#include <cstddef>
#include <span>

namespace wholescan::estimator {

// P_t N(mu, sigma^2) + (1 - P_t) U(lower, upper)
struct MixtureFit {
  double p_t = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double log_likelihood = 0.0;  // mean per sample
  int iterations = 0;
  bool converged = false;

  double pdf(double x) const;
  double cdf(double x) const;
};

inline constexpr std::size_t kMinBatchSamples = 50;
inline constexpr int kMaxEmIterations = 500;
inline constexpr double kEmTolerance = 1e-9;

// Maximum-likelihood fit by expectation-maximization, started from
// mu = median, sigma = IQR / 2, P_t = 0.75. Stops once the mean log-likelihood
// improves by less than kEmTolerance; after kMaxEmIterations the best iterate
// is returned with converged = false. Samples outside [lower, upper] are
// ignored; throws std::invalid_argument if fewer than kMinBatchSamples remain.
MixtureFit fit_mixture_batch(std::span<const double> samples, double lower, double upper);

// Kolmogorov-Smirnov statistic between the empirical CDF of `samples` and the
// fitted mixture CDF. Throws std::invalid_argument below kMinBatchSamples.
double empirical_cdf_distance(std::span<const double> samples, const MixtureFit& fit);

}  // namespace wholescan::estimator
