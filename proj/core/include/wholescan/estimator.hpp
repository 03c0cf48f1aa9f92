#pragma once

#include <cstdint>
#include <mutex>

#include "wholescan/biometric.hpp"
#include "wholescan/growth_chart.hpp"

namespace wholescan::estimator {

struct EstimatorConfig {
  double p_t0 = 0.75;       // prior truth probability
  double w0 = 10.0;         // prior weight of p_t0
  double w_mu0 = 2.0;       // prior weight of the chart median
  double w_var0 = 2.0;      // prior weight of the chart spread
  double ci_multiplier = 2.0;

  // Throws ConfigError.
  void validate() const;
};

// Recursive state of the Gaussian + uniform mixture for one biometric.
// [lower, upper] is both the support of the nuisance uniform and the
// plausibility window.
struct MixtureState {
  double p_t = 0.0;
  double mu = 0.0;
  double var = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double w = 0.0;
  double w_mu = 0.0;
  double w_var = 0.0;
  std::uint64_t n_accepted = 0;
  std::uint64_t n_rejected = 0;

  friend bool operator==(const MixtureState&, const MixtureState&) = default;
};

// 0 < p_t < 1, var > 0, lower < mu < upper, w >= w0 > 0, w_mu > 0, w_var > 0.
bool satisfies_invariants(const MixtureState& s, double w0);

struct EstimateSnapshot {
  double mu = 0.0;
  double sigma_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_t = 0.0;
  std::uint64_t n_accepted = 0;
  std::uint64_t n_rejected = 0;

  friend bool operator==(const EstimateSnapshot&, const EstimateSnapshot&) = default;
};

inline constexpr int kPlausibilityWindowDays = 21;

// Prior from the chart: mu = c50(GA), window [c3(GA - 3w), c97(GA + 3w)],
// sigma = (c97(GA) - c3(GA)) / 4. Window lookups are clamped to the chart's
// tabulated range. Throws GAOutOfRange when GA itself is outside it.
MixtureState init_estimator(Biometric b, GestationalAge ga, const GrowthChart& chart,
                            const EstimatorConfig& cfg = {});

enum class GateResult { Accept, Reject };

// Closed interval [lower, upper]. A rejection bumps n_rejected and nothing else.
GateResult plausibility_gate(double x, MixtureState& state);

// Normalized posterior probability that x came from the Gaussian component.
double posterior_truth_prob(double x, const MixtureState& state);

// One weighted-cumulative-average step. x must have passed the gate.
MixtureState update(const MixtureState& state, double x);

// sigma / sqrt(w_var).
double standard_error(const MixtureState& state);

EstimateSnapshot snapshot(const MixtureState& state, double ci_multiplier = 2.0);

// Gate + update for one biometric stream. Not synchronized; see
// SharedEstimator for concurrent readers.
class BiometricEstimator {
 public:
  BiometricEstimator(MixtureState initial, double ci_multiplier = 2.0)
      : state_(initial), ci_multiplier_(ci_multiplier) {}

  // Returns true if x was accepted and folded into the estimate.
  bool offer(double x);

  const MixtureState& state() const noexcept { return state_; }
  EstimateSnapshot snapshot() const { return estimator::snapshot(state_, ci_multiplier_); }

 private:
  MixtureState state_;
  double ci_multiplier_;
};

// Single writer, any number of readers; every snapshot reflects a state
// between two whole updates.
class SharedEstimator {
 public:
  explicit SharedEstimator(BiometricEstimator inner) : inner_(std::move(inner)) {}

  bool offer(double x) {
    std::lock_guard lock(mutex_);
    return inner_.offer(x);
  }

  EstimateSnapshot snapshot() const {
    std::lock_guard lock(mutex_);
    return inner_.snapshot();
  }

  MixtureState state() const {
    std::lock_guard lock(mutex_);
    return inner_.state();
  }

 private:
  mutable std::mutex mutex_;
  BiometricEstimator inner_;
};

}  // namespace wholescan::estimator
