#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "doctest.h"
#include "wholescan/error.hpp"
#include "wholescan/estimator.hpp"
#include "wholescan/growth_chart.hpp"

using namespace wholescan;
using namespace wholescan::estimator;

namespace {

MixtureState example_state() {
  MixtureState s;
  s.p_t = 0.75;
  s.mu = 33.0;
  s.var = 1.8 * 1.8;
  s.lower = 24.0;
  s.upper = 42.0;
  s.w = 10.0;
  s.w_mu = 2.0;
  s.w_var = 2.0;
  return s;
}

GrowthChart femur_chart() {
  std::istringstream csv(
      "biometric,ga_days,c3_mm,c50_mm,c97_mm\n"
      "FL,101,12.4,17.4,22.4\n"
      "FL,122,20.2,25.2,30.2\n"
      "FL,143,28,33,38\n"
      "FL,164,35.8,40.8,45.8\n"
      "FL,185,43.6,48.6,53.6\n");
  return GrowthChart::from_csv(csv);
}

}  // namespace

TEST_CASE("init_estimator from the chart") {
  const auto chart = femur_chart();
  const auto s = init_estimator(Biometric::FL, GestationalAge::from_weeks(20, 3), chart);
  CHECK(s.mu == doctest::Approx(33.0));
  CHECK(std::sqrt(s.var) == doctest::Approx(2.5));
  CHECK(s.lower == doctest::Approx(20.2));
  CHECK(s.upper == doctest::Approx(45.8));
  CHECK(s.p_t == 0.75);
  CHECK(s.w == 10.0);
  CHECK(satisfies_invariants(s, 10.0));

  const auto snap = snapshot(s);
  CHECK(snap.ci_low < 33.0);
  CHECK(snap.ci_high > 33.0);
  CHECK(snap.ci_high - snap.ci_low == doctest::Approx(4.0 * 2.5 / std::sqrt(2.0)));

  CHECK_THROWS_AS(init_estimator(Biometric::FL, GestationalAge::from_weeks(30), chart), GAOutOfRange);
  CHECK_THROWS_AS(init_estimator(Biometric::HC, GestationalAge::from_weeks(20), chart), ConfigError);
}

TEST_CASE("window lookups clamp at the chart edge") {
  const auto chart = femur_chart();
  const auto s = init_estimator(Biometric::FL, GestationalAge::from_days(105), chart);
  CHECK(s.lower == doctest::Approx(12.4));
}

TEST_CASE("EstimatorConfig validation") {
  EstimatorConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.p_t0 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.w_mu0 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("plausibility gate is a closed interval") {
  auto s = example_state();
  CHECK(plausibility_gate(23.9, s) == GateResult::Reject);
  CHECK(s.n_rejected == 1);
  auto before = s;
  CHECK(plausibility_gate(33.0, s) == GateResult::Accept);
  CHECK(plausibility_gate(42.0, s) == GateResult::Accept);
  CHECK(plausibility_gate(24.0, s) == GateResult::Accept);
  CHECK(s == before);
  CHECK(plausibility_gate(42.0001, s) == GateResult::Reject);
  before.n_rejected = 2;
  CHECK(s == before);
}

TEST_CASE("posterior truth probability") {
  const auto s = example_state();
  CHECK(posterior_truth_prob(33.0, s) == doctest::Approx(0.922888702776).epsilon(1e-10));
  CHECK(posterior_truth_prob(33.0 + 5 * 1.8, s) < 0.05);
  CHECK(posterior_truth_prob(33.0 + 5 * 1.8, s) == doctest::Approx(4.46e-5).epsilon(0.01));

  auto sure = s;
  sure.p_t = 1.0 - 1e-12;
  for (double x : {24.0, 30.0, 41.9}) CHECK(posterior_truth_prob(x, sure) > 0.999);

  double prev = 1.0;
  for (double d = 0.0; d <= 9.0; d += 0.25) {
    const double p = posterior_truth_prob(33.0 + d, s);
    CHECK(p == doctest::Approx(posterior_truth_prob(33.0 - d, s)));
    if (d > 0) CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("the printed odds form is not a probability") {
  // Without the truth term in the denominator the value at x = mu is an odds
  // ratio above one, which cannot serve as a weight in [0, 1].
  const auto s = example_state();
  const double n = std::exp(0.0) / (1.8 * std::sqrt(2 * std::numbers::pi));
  const double odds = n * s.p_t / ((1 - s.p_t) / (s.upper - s.lower));
  CHECK(odds > 1.0);
  CHECK(posterior_truth_prob(33.0, s) == doctest::Approx(odds / (1 + odds)));
}

TEST_CASE("update worked example") {
  const auto s = example_state();
  const double p = posterior_truth_prob(34.0, s);
  CHECK(p == doctest::Approx(0.911164561026).epsilon(1e-10));
  const auto next = update(s, 34.0);
  CHECK(next.mu == doctest::Approx(33.3129897132).epsilon(1e-10));
  CHECK(next.p_t == doctest::Approx(0.76465132373).epsilon(1e-10));
  CHECK(next.var == doctest::Approx(2.538903042438).epsilon(1e-10));
  CHECK(next.w == 11.0);
  CHECK(next.w_mu == doctest::Approx(2.0 + p));
  CHECK(next.w_var == doctest::Approx(2.0 + p));
  CHECK(next.n_accepted == 1);
}

TEST_CASE("update at the mean and at the bound") {
  const auto s = example_state();
  const auto at_mu = update(s, 33.0);
  CHECK(at_mu.mu == 33.0);
  CHECK(at_mu.var < s.var);
  CHECK(at_mu.var == doctest::Approx(2.0 * s.var / (posterior_truth_prob(33.0, s) + 2.0)));

  const auto at_b = update(s, 42.0);
  CHECK(posterior_truth_prob(42.0, s) < 1e-3);
  CHECK(at_b.mu - s.mu < 1e-3 * (42.0 - 33.0));
}

TEST_CASE("standard error") {
  auto s = example_state();
  s.w_var = 81.0;
  CHECK(standard_error(s) == doctest::Approx(0.2));
  s.w_var = 1.0;
  CHECK(standard_error(s) == doctest::Approx(1.8));

  auto t = example_state();
  double sum_p = 0.0;
  for (int i = 0; i < 50; ++i) {
    sum_p += posterior_truth_prob(t.mu, t);
    t = update(t, t.mu);
  }
  CHECK(standard_error(t) == doctest::Approx(std::sqrt(t.var) / std::sqrt(2.0 + sum_p)));
}

TEST_CASE("sigma_hat strictly decreases under repeated x = mu") {
  auto s = example_state();
  double prev = standard_error(s);
  double prev_wvar = s.w_var;
  for (int i = 0; i < 200; ++i) {
    s = update(s, s.mu);
    CHECK(standard_error(s) < prev);
    CHECK(s.w_var > prev_wvar);
    prev = standard_error(s);
    prev_wvar = s.w_var;
  }
}

TEST_CASE("fuzzed updates preserve the invariants") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int run = 0; run < 200; ++run) {
    auto s = example_state();
    s.lower = 10.0 + 20.0 * u(rng);
    s.upper = s.lower + 1.0 + 40.0 * u(rng);
    s.mu = s.lower + (s.upper - s.lower) * (0.1 + 0.8 * u(rng));
    s.var = std::pow(0.01 + 5.0 * u(rng), 2);
    s.p_t = 0.01 + 0.98 * u(rng);
    for (int i = 0; i < 500; ++i) {
      const double x = s.lower + (s.upper - s.lower) * u(rng);
      const double w_before = s.w;
      s = update(s, x);
      REQUIRE(satisfies_invariants(s, 10.0));
      REQUIRE(s.w == w_before + 1.0);
    }
  }
}

TEST_CASE("snapshot packaging and replay") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(33.0, 1.8);
  std::vector<double> xs;
  for (int i = 0; i < 300; ++i) xs.push_back(n(rng));

  BiometricEstimator a(example_state());
  BiometricEstimator b(example_state());
  for (double x : xs) a.offer(x);
  for (double x : xs) b.offer(x);
  CHECK(a.snapshot() == b.snapshot());

  const auto snap = a.snapshot();
  CHECK(snap.ci_low == snap.mu - 2 * snap.sigma_hat);
  CHECK(snap.ci_high == snap.mu + 2 * snap.sigma_hat);
  CHECK(snap.sigma_hat > 0.0);
  CHECK(snap.n_accepted + snap.n_rejected == xs.size());
}

TEST_CASE("SharedEstimator readers see whole updates") {
  SharedEstimator shared{BiometricEstimator(example_state())};
  std::atomic<bool> done = false;
  std::atomic<int> bad = 0;
  std::thread reader([&] {
    while (!done) {
      const auto s = shared.state();
      if (!satisfies_invariants(s, 10.0) || s.w != 10.0 + s.n_accepted) ++bad;
    }
  });
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(24.0, 42.0);
  for (int i = 0; i < 20000; ++i) shared.offer(u(rng));
  done = true;
  reader.join();
  CHECK(bad == 0);
  CHECK(shared.snapshot().n_accepted == 20000);
}
