#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "wholescan/mixture_fit.hpp"

using namespace wholescan::estimator;

namespace {

std::vector<double> draw_mixture(std::size_t n, double p_t, double mu, double sigma, double lo,
                                 double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(mu, sigma);
  std::vector<double> out;
  while (out.size() < n) {
    if (unit(rng) < p_t) {
      const double x = normal(rng);
      if (x >= lo && x <= hi) out.push_back(x);
    } else {
      out.push_back(lo + (hi - lo) * unit(rng));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("EM recovers the femur-like mixture") {
  const auto xs = draw_mixture(10000, 0.79, 0.0, 1.8, -9.0, 9.0, 42);
  const auto fit = fit_mixture_batch(xs, -9.0, 9.0);
  CHECK(fit.converged);
  CHECK(std::abs(fit.p_t - 0.79) <= 0.03);
  CHECK(std::abs(fit.mu) <= 0.05);
  CHECK(std::abs(fit.sigma - 1.8) <= 0.1);
  CHECK(empirical_cdf_distance(xs, fit) < 0.02);
}

TEST_CASE("EM on one-component data") {
  SUBCASE("pure Gaussian") {
    const auto xs = draw_mixture(5000, 1.0, 10.0, 1.0, 0.0, 20.0, 3);
    CHECK(fit_mixture_batch(xs, 0.0, 20.0).p_t >= 0.97);
  }
  SUBCASE("pure uniform") {
    const auto xs = draw_mixture(5000, 0.0, 10.0, 1.0, 0.0, 20.0, 4);
    CHECK(fit_mixture_batch(xs, 0.0, 20.0).p_t <= 0.1);
  }
}

TEST_CASE("EM is deterministic and rejects small batches") {
  const auto xs = draw_mixture(500, 0.7, 5.0, 2.0, -10.0, 20.0, 5);
  const auto a = fit_mixture_batch(xs, -10.0, 20.0);
  const auto b = fit_mixture_batch(xs, -10.0, 20.0);
  CHECK(a.mu == b.mu);
  CHECK(a.sigma == b.sigma);
  CHECK(a.p_t == b.p_t);
  CHECK(a.iterations == b.iterations);

  std::vector<double> few(49, 1.0);
  CHECK_THROWS_AS(fit_mixture_batch(few, 0.0, 2.0), std::invalid_argument);
  std::vector<double> outside(100, 30.0);
  CHECK_THROWS_AS(fit_mixture_batch(outside, 0.0, 2.0), std::invalid_argument);
}

TEST_CASE("mixture pdf and cdf are consistent") {
  const auto xs = draw_mixture(2000, 0.8, 0.0, 1.0, -5.0, 5.0, 6);
  const auto fit = fit_mixture_batch(xs, -5.0, 5.0);
  // The Gaussian component is not truncated, so its tails leak past the bounds.
  CHECK(fit.cdf(-5.0) < 1e-6);
  CHECK(fit.cdf(5.0) > 1.0 - 1e-6);
  // Trapezoid integral of the pdf matches the cdf.
  double area = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x0 = -5.0 + 10.0 * i / n, x1 = -5.0 + 10.0 * (i + 1) / n;
    area += 0.5 * (fit.pdf(x0) + fit.pdf(x1)) * (x1 - x0);
  }
  CHECK(area == doctest::Approx(1.0).epsilon(1e-6));
  double prev = 0.0;
  for (double x = -5.0; x <= 5.0; x += 0.1) {
    CHECK(fit.cdf(x) >= prev);
    prev = fit.cdf(x);
  }
}

TEST_CASE("KS statistic bounds") {
  const auto xs = draw_mixture(1000, 0.8, 0.0, 1.0, -5.0, 5.0, 7);
  const auto fit = fit_mixture_batch(xs, -5.0, 5.0);
  const double ks = empirical_cdf_distance(xs, fit);
  CHECK(ks >= 0.0);
  CHECK(ks <= 1.0);
  const std::vector<double> constant(100, 0.0);
  CHECK(empirical_cdf_distance(constant, fit) >= 0.5);
  CHECK_THROWS_AS(empirical_cdf_distance(std::vector<double>(10, 0.0), fit), std::invalid_argument);
}
