#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "immfpf/error.hpp"
#include "immfpf/hybrid_model.hpp"
#include "immfpf/particle_bank.hpp"

namespace immfpf {

/// Posterior mode probabilities mu^m = P(theta_t = m | Z_t).
class ModeProbabilities {
 public:
  ModeProbabilities() = default;
  explicit ModeProbabilities(std::vector<double> values) : p_(std::move(values)) {}

  static ModeProbabilities uniform(std::size_t n_modes) {
    return ModeProbabilities(std::vector<double>(n_modes, 1.0 / static_cast<double>(n_modes)));
  }

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t m) const { return p_[m]; }
  std::span<const double> values() const { return p_; }
  operator std::span<const double>() const { return p_; }

  bool on_simplex(double tolerance = 1e-12) const {
    double s = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0)) return false;
      s += v;
    }
    return std::abs(s - 1.0) <= tolerance;
  }

  /// Lowest index among the maximal entries.
  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(p_.begin(), p_.end()) - p_.begin());
  }

  bool operator==(const ModeProbabilities&) const = default;

 private:
  std::vector<double> p_;
};

/// Floors every entry at `floor` and rescales onto the simplex.
inline ModeProbabilities normalize_clamp(std::span<const double> mu, double floor) {
  std::vector<double> out(mu.begin(), mu.end());
  double sum = 0.0;
  for (double& v : out) {
    require(std::isfinite(v), "mode probabilities must be finite");
    v = std::max(v, floor);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return ModeProbabilities(std::move(out));
}

/// Euler step of
///   dmu^m = sum_l q_lm mu^l dt + (h^m - h)(dZ - h dt) mu^m
/// in unit-noise units, then floored and renormalized.
inline ModeProbabilities mu_step_euler(std::span<const double> mu, std::span<const double> h_hat_mode,
                                       double h_hat_global, const GeneratorMatrix& gen,
                                       double dz_rescaled, double dt, double floor) {
  const std::size_t M = mu.size();
  require(h_hat_mode.size() == M && gen.size() == M, "mode count mismatch");
  const double innovation = dz_rescaled - h_hat_global * dt;
  std::vector<double> next(M);
  for (std::size_t m = 0; m < M; ++m) {
    double transfer = 0.0;
    for (std::size_t l = 0; l < M; ++l) transfer += gen(l, m) * mu[l];
    next[m] = mu[m] + transfer * dt + (h_hat_mode[m] - h_hat_global) * innovation * mu[m];
  }
  return normalize_clamp(next, floor);
}

/// Generator prediction mu + Q^T mu dt.
inline std::vector<double> predict_mode_probabilities(std::span<const double> mu,
                                                      const GeneratorMatrix& gen, double dt) {
  const std::size_t M = mu.size();
  std::vector<double> out(M);
  for (std::size_t m = 0; m < M; ++m) {
    double transfer = 0.0;
    for (std::size_t l = 0; l < M; ++l) transfer += gen(l, m) * mu[l];
    out[m] = mu[m] + transfer * dt;
  }
  return out;
}

/// log L_m(dz) with L_m(dz) = (1/N) sum_i N(dz; h^m(X_i) dt, sigma_W^2 dt).
inline double log_mode_likelihood(const ParticleBank& bank, const HybridModel& model, std::size_t m,
                                  double dz, double dt) {
  const double var = model.obs_noise * model.obs_noise * dt;
  const auto& h = model.modes[m].observation;
  const auto xs = bank.mode(m);
  std::vector<double> log_terms(xs.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = dz - h(xs[i]) * dt;
    log_terms[i] = -0.5 * r * r / var;
    peak = std::max(peak, log_terms[i]);
  }
  if (!std::isfinite(peak)) return -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (double lt : log_terms) acc += std::exp(lt - peak);
  return peak + std::log(acc / static_cast<double>(xs.size())) -
         0.5 * std::log(2.0 * std::numbers::pi * var);
}

/// Discrete-time Bayes update: generator prediction (floored), then correction
/// by the particle-approximated likelihoods, accumulated in log space and
/// normalized exactly. Falls back to the prediction when every likelihood
/// underflows or is undefined.
inline ModeProbabilities mu_step_bayes(std::span<const double> mu, const ParticleBank& bank,
                                       const HybridModel& model, const GeneratorMatrix& gen,
                                       double dz, double dt, double floor) {
  const std::size_t M = mu.size();
  require(bank.n_modes() == M && model.n_modes() == M && gen.size() == M, "mode count mismatch");
  const auto prior = normalize_clamp(predict_mode_probabilities(mu, gen, dt), floor);
  std::vector<double> log_post(M);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < M; ++m) {
    log_post[m] = std::log(prior[m]) + log_mode_likelihood(bank, model, m, dz, dt);
    if (log_post[m] > peak) peak = log_post[m];
  }
  if (!std::isfinite(peak)) return prior;  // every likelihood is zero
  std::vector<double> post(M);
  double sum = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    post[m] = std::exp(log_post[m] - peak);
    sum += post[m];
  }
  for (double& p : post) p /= sum;
  return ModeProbabilities(std::move(post));
}

}  // namespace immfpf
