#include "wholescan/estimator.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "wholescan/error.hpp"

namespace wholescan::estimator {

namespace {

double normal_pdf(double x, double mu, double var) {
  const double d = x - mu;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

void EstimatorConfig::validate() const {
  if (!(p_t0 > 0.0 && p_t0 < 1.0)) throw ConfigError("p_t0 must lie in (0, 1)");
  if (!(w0 > 0.0 && w_mu0 > 0.0 && w_var0 > 0.0)) {
    throw ConfigError("estimator prior weights must be positive");
  }
  if (!(ci_multiplier > 0.0)) throw ConfigError("ci_multiplier must be positive");
}

bool satisfies_invariants(const MixtureState& s, double w0) {
  return s.p_t > 0.0 && s.p_t < 1.0 && s.var > 0.0 && std::isfinite(s.var) && s.lower < s.mu &&
         s.mu < s.upper && w0 > 0.0 && s.w >= w0 && s.w_mu > 0.0 && s.w_var > 0.0;
}

MixtureState init_estimator(Biometric b, GestationalAge ga, const GrowthChart& chart,
                            const EstimatorConfig& cfg) {
  cfg.validate();
  const double day = ga.days();
  const Centiles now = chart.at(b, day);
  const Centiles early = chart.at_clamped(b, day - kPlausibilityWindowDays);
  const Centiles late = chart.at_clamped(b, day + kPlausibilityWindowDays);

  MixtureState s;
  s.p_t = cfg.p_t0;
  s.mu = now.c50;
  const double sigma0 = (now.c97 - now.c3) / 4.0;
  s.var = sigma0 * sigma0;
  s.lower = early.c3;
  s.upper = late.c97;
  s.w = cfg.w0;
  s.w_mu = cfg.w_mu0;
  s.w_var = cfg.w_var0;
  return s;
}

GateResult plausibility_gate(double x, MixtureState& state) {
  if (x >= state.lower && x <= state.upper) return GateResult::Accept;
  ++state.n_rejected;
  return GateResult::Reject;
}

double posterior_truth_prob(double x, const MixtureState& state) {
  const double truth = normal_pdf(x, state.mu, state.var) * state.p_t;
  const double nuisance = (1.0 - state.p_t) / (state.upper - state.lower);
  return truth / (truth + nuisance);
}

MixtureState update(const MixtureState& state, double x) {
  const double p = posterior_truth_prob(x, state);
  MixtureState next = state;
  next.p_t = (p + state.w * state.p_t) / (state.w + 1.0);
  next.mu = (x * p + state.w_mu * state.mu) / (p + state.w_mu);
  const double d = x - state.mu;
  next.var = (d * d * p + state.w_var * state.var) / (p + state.w_var);
  next.w = state.w + 1.0;
  next.w_mu = state.w_mu + p;
  next.w_var = state.w_var + p;
  ++next.n_accepted;
  return next;
}

double standard_error(const MixtureState& state) {
  return std::sqrt(state.var) / std::sqrt(state.w_var);
}

EstimateSnapshot snapshot(const MixtureState& state, double ci_multiplier) {
  EstimateSnapshot snap;
  snap.mu = state.mu;
  snap.sigma_hat = standard_error(state);
  snap.ci_low = state.mu - ci_multiplier * snap.sigma_hat;
  snap.ci_high = state.mu + ci_multiplier * snap.sigma_hat;
  snap.p_t = state.p_t;
  snap.n_accepted = state.n_accepted;
  snap.n_rejected = state.n_rejected;
  return snap;
}

bool BiometricEstimator::offer(double x) {
  if (plausibility_gate(x, state_) == GateResult::Reject) return false;
  state_ = update(state_, x);
  return true;
}

}  // namespace wholescan::estimator
