#include "wholescan/mixture_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace wholescan::estimator {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double MixtureFit::pdf(double x) const {
  const double z = (x - mu) / sigma;
  const double normal = std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
  const double uniform = (x >= lower && x <= upper) ? 1.0 / (upper - lower) : 0.0;
  return p_t * normal + (1.0 - p_t) * uniform;
}

double MixtureFit::cdf(double x) const {
  const double normal = 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
  const double uniform = std::clamp((x - lower) / (upper - lower), 0.0, 1.0);
  return p_t * normal + (1.0 - p_t) * uniform;
}

MixtureFit fit_mixture_batch(std::span<const double> samples, double lower, double upper) {
  if (!(upper > lower)) throw std::invalid_argument("mixture bounds must satisfy lower < upper");
  std::vector<double> xs;
  xs.reserve(samples.size());
  for (double x : samples) {
    if (x >= lower && x <= upper) xs.push_back(x);
  }
  if (xs.size() < kMinBatchSamples) {
    throw std::invalid_argument("mixture fit needs at least " + std::to_string(kMinBatchSamples) +
                                " in-bounds samples, got " + std::to_string(xs.size()));
  }

  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  const double width = upper - lower;
  // Keeps the Gaussian from collapsing onto a single sample.
  const double sigma_floor = 1e-4 * width;

  MixtureFit fit;
  fit.lower = lower;
  fit.upper = upper;
  fit.p_t = 0.75;
  fit.mu = quantile_sorted(sorted, 0.5);
  fit.sigma = std::max(0.5 * (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)),
                       sigma_floor);

  const double n = static_cast<double>(xs.size());
  const double uniform_density = 1.0 / width;
  std::vector<double> resp(xs.size());

  MixtureFit best = fit;
  best.log_likelihood = -std::numeric_limits<double>::infinity();
  double previous = -std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= kMaxEmIterations; ++iter) {
    // E-step at the current parameters; also yields their log-likelihood.
    const double norm = 1.0 / (fit.sigma * std::sqrt(2.0 * std::numbers::pi));
    double ll = 0.0;
    double r_sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double z = (xs[i] - fit.mu) / fit.sigma;
      const double truth = fit.p_t * norm * std::exp(-0.5 * z * z);
      const double nuisance = (1.0 - fit.p_t) * uniform_density;
      const double total = truth + nuisance;
      resp[i] = truth / total;
      r_sum += resp[i];
      ll += std::log(total);
    }
    ll /= n;
    fit.log_likelihood = ll;
    fit.iterations = iter;
    if (ll > best.log_likelihood) best = fit;
    if (iter > 1 && ll - previous < kEmTolerance) {
      best.converged = true;
      best.iterations = iter;
      return best;
    }
    previous = ll;
    if (!(r_sum > 0.0)) break;

    // M-step.
    double mean = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) mean += resp[i] * xs[i];
    mean /= r_sum;
    double var = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double d = xs[i] - mean;
      var += resp[i] * d * d;
    }
    var /= r_sum;
    fit.p_t = std::clamp(r_sum / n, 1e-12, 1.0 - 1e-12);
    fit.mu = mean;
    fit.sigma = std::max(std::sqrt(var), sigma_floor);
  }
  best.converged = false;
  return best;
}

double empirical_cdf_distance(std::span<const double> samples, const MixtureFit& fit) {
  if (samples.size() < kMinBatchSamples) {
    throw std::invalid_argument("KS distance needs at least " + std::to_string(kMinBatchSamples) +
                                " samples");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = fit.cdf(sorted[i]);
    const double above = static_cast<double>(i + 1) / n - f;
    const double below = f - static_cast<double>(i) / n;
    d = std::max({d, above, below});
  }
  return std::clamp(d, 0.0, 1.0);
}

}  // namespace wholescan::estimator
