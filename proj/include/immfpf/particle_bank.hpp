#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "immfpf/error.hpp"
#include "immfpf/hybrid_model.hpp"
#include "immfpf/random.hpp"
#include "immfpf/text.hpp"

namespace immfpf {

/// M sub-populations of N scalar particles, stored mode-major.
class ParticleBank {
 public:
  ParticleBank() = default;
  ParticleBank(std::size_t n_modes, std::size_t n_particles, double fill = 0.0)
      : modes_(n_modes), particles_(n_particles), states_(n_modes * n_particles, fill) {
    require(n_modes >= 1, "bank needs at least one mode");
    require(n_particles >= 2, "bank needs at least two particles per mode");
  }

  /// Builds a bank from per-mode particle lists of equal length.
  static ParticleBank from_modes(const std::vector<std::vector<double>>& per_mode) {
    require(!per_mode.empty(), "bank needs at least one mode");
    ParticleBank bank(per_mode.size(), per_mode.front().size());
    for (std::size_t m = 0; m < per_mode.size(); ++m) {
      require(per_mode[m].size() == bank.particles_, "all modes need the same particle count");
      std::copy(per_mode[m].begin(), per_mode[m].end(), bank.mode(m).begin());
    }
    return bank;
  }

  std::size_t n_modes() const { return modes_; }
  std::size_t n_particles() const { return particles_; }

  std::span<double> mode(std::size_t m) {
    return {states_.data() + m * particles_, particles_};
  }
  std::span<const double> mode(std::size_t m) const {
    return {states_.data() + m * particles_, particles_};
  }

  double& operator()(std::size_t m, std::size_t i) { return states_[m * particles_ + i]; }
  double operator()(std::size_t m, std::size_t i) const { return states_[m * particles_ + i]; }

  bool all_finite() const {
    return std::all_of(states_.begin(), states_.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const ParticleBank&) const = default;

 private:
  std::size_t modes_ = 0;
  std::size_t particles_ = 0;
  std::vector<double> states_;
};

enum class GainMode { constant };

struct FilterConfig {
  double dt = 0.01;
  GainMode gain_mode = GainMode::constant;
  double clamp_floor = 1e-9;
  double c_cap = 1e3;

  void validate(std::size_t n_modes) const {
    require(dt > 0.0 && std::isfinite(dt), "filter dt must be positive");
    require(clamp_floor > 0.0 && clamp_floor < 1.0 / static_cast<double>(n_modes),
            "clamp_floor must lie in (0, 1/M)");
    require(c_cap > 0.0, "c_cap must be positive");
  }
};

/// Per-mode quantities frozen at the start of a step. Observation-related
/// entries are in unit-noise units (h / sigma_W).
struct ModeStatistics {
  std::vector<double> h_hat_mode;
  double h_hat_global = 0.0;
  std::vector<double> gains;
  std::vector<double> controls;
  std::vector<double> means;
  /// Total interaction rate sum_{l != m} c_lm, used to integrate the control.
  std::vector<double> control_rates;
};

inline double particle_mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline std::vector<double> bank_means(const ParticleBank& bank) {
  std::vector<double> means(bank.n_modes());
  for (std::size_t m = 0; m < bank.n_modes(); ++m) means[m] = particle_mean(bank.mode(m));
  return means;
}

/// (1/N) sum_i h^m(X^{i;m}) in observation units.
inline double mode_h_hat(const ParticleBank& bank, const HybridModel& model, std::size_t m) {
  require(m < bank.n_modes() && m < model.n_modes(), "mode index out of range");
  const auto& h = model.modes[m].observation;
  double s = 0.0;
  for (double x : bank.mode(m)) s += h(x);
  return s / static_cast<double>(bank.n_particles());
}

inline double global_h_hat(std::span<const double> h_hat_mode, std::span<const double> mu) {
  require(h_hat_mode.size() == mu.size(), "mode count mismatch");
  double s = 0.0;
  for (std::size_t m = 0; m < mu.size(); ++m) s += mu[m] * h_hat_mode[m];
  return s;
}

/// Constant-gain approximation (1/N) sum_i (h(X_i) - h_hat) X_i, i.e. the
/// population covariance of (h(X), X). Observation units, not rescaled.
inline double constant_gain(const ParticleBank& bank, const HybridModel& model, std::size_t m,
                            double h_hat_m) {
  require(m < bank.n_modes() && m < model.n_modes(), "mode index out of range");
  const auto& h = model.modes[m].observation;
  const auto xs = bank.mode(m);
  // Centering x as well leaves the sum unchanged (sum of h - h_hat is zero)
  // but avoids cancellation when the particles sit far from the origin.
  const double x_bar = particle_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (h(x) - h_hat_m) * (x - x_bar);
  return s / static_cast<double>(xs.size());
}

/// c_lm = q_lm mu^l / mu^m with mu floored at `clamp_floor` and each
/// coefficient capped at `c_cap`.
inline double interaction_coefficient(std::span<const double> mu, const GeneratorMatrix& gen,
                                      std::size_t l, std::size_t m, const FilterConfig& config) {
  if (l == m) return 0.0;
  const double mu_l = std::max(mu[l], config.clamp_floor);
  const double mu_m = std::max(mu[m], config.clamp_floor);
  return std::min(gen(l, m) * mu_l / mu_m, config.c_cap);
}

/// u^m = sum_l c_lm (mean_l - mean_m).
inline double interaction_control(std::span<const double> bank_means, std::span<const double> mu,
                                  const GeneratorMatrix& gen, std::size_t m,
                                  const FilterConfig& config) {
  require(bank_means.size() == mu.size() && mu.size() == gen.size(), "mode count mismatch");
  double u = 0.0;
  for (std::size_t l = 0; l < mu.size(); ++l)
    u += interaction_coefficient(mu, gen, l, m, config) * (bank_means[l] - bank_means[m]);
  return u;
}

inline ModeStatistics compute_mode_statistics(const ParticleBank& bank, std::span<const double> mu,
                                              const HybridModel& model, const FilterConfig& config) {
  const std::size_t M = bank.n_modes();
  require(M == model.n_modes() && mu.size() == M, "mode count mismatch");
  const double inv_sigma = 1.0 / model.obs_noise;
  ModeStatistics s;
  s.h_hat_mode.resize(M);
  s.gains.resize(M);
  s.controls.resize(M);
  s.control_rates.resize(M);
  s.means = bank_means(bank);
  for (std::size_t m = 0; m < M; ++m) {
    const double h_hat = mode_h_hat(bank, model, m);
    s.h_hat_mode[m] = h_hat * inv_sigma;
    s.gains[m] = constant_gain(bank, model, m, h_hat) * inv_sigma;
  }
  s.h_hat_global = global_h_hat(s.h_hat_mode, mu);
  for (std::size_t m = 0; m < M; ++m) {
    s.controls[m] = interaction_control(s.means, mu, model.generator, m, config);
    double rate = 0.0;
    for (std::size_t l = 0; l < M; ++l) rate += interaction_coefficient(mu, model.generator, l, m, config);
    s.control_rates[m] = rate;
  }
  return s;
}

/// Draws every sub-population i.i.d. from N(mean, std^2), one stream per mode.
inline ParticleBank sample_initial_bank(std::size_t n_modes, std::size_t n_particles, double mean,
                                        double std, std::uint64_t seed) {
  require(std >= 0.0, "prior std must be nonnegative");
  ParticleBank bank(n_modes, n_particles);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t m = 0; m < n_modes; ++m) {
    auto eng = rng::engine(seed, rng::Stream::particle_init, m);
    for (double& x : bank.mode(m)) x = mean + std * normal(eng);
  }
  return bank;
}

/// Identifies the noise for one filter step: particle (i, m) at step k draws
/// from the per-(seed, m, k) stream, so results do not depend on scheduling.
struct StepNoise {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

/// One Euler step of the M parallel feedback particle filters, using
/// statistics computed from the pre-step bank.
///
/// The constant gain is state independent, so the Stratonovich particle SDE
/// has no Wong-Zakai drift and the Euler form is used unchanged. A
/// state-dependent gain would need the extra 0.5 K K' term.
///
/// The interaction control moves the mode mean toward a weighted target at
/// total rate C = sum_l c_lm. It is applied as u * (1 - exp(-C dt)) / (C dt),
/// which equals u to first order and stays stable when C dt is large.
inline ParticleBank fpf_step(const ParticleBank& bank, const ModeStatistics& stats, double dz,
                             const HybridModel& model, const FilterConfig& config,
                             StepNoise noise) {
  const std::size_t M = bank.n_modes();
  const double dt = config.dt;
  const double sqrt_dt = std::sqrt(dt);
  const double inv_sigma = 1.0 / model.obs_noise;
  const double dz_scaled = dz * inv_sigma;
  ParticleBank next = bank;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t m = 0; m < M; ++m) {
    const auto& dyn = model.modes[m];
    auto eng = rng::engine(noise.seed, rng::Stream::particle_noise, m, noise.step);
    const double gain = stats.gains[m];
    const double h_hat = stats.h_hat_mode[m];
    const double rate_dt = stats.control_rates[m] * dt;
    const double damping = rate_dt > 1e-8 ? -std::expm1(-rate_dt) / rate_dt : 1.0;
    const double control = stats.controls[m] * damping;
    auto xs = next.mode(m);
    for (double& x : xs) {
      const double dv = normal(eng);
      const double innovation = dz_scaled - 0.5 * (dyn.observation(x) * inv_sigma + h_hat) * dt;
      x += dyn.drift(x) * dt + dyn.diffusion * sqrt_dt * dv + gain * innovation + control * dt;
      if (!std::isfinite(x))
        fail(ErrorCode::non_finite_state,
             "particle in mode " + std::to_string(m + 1) + " became non-finite");
    }
  }
  return next;
}

inline ParticleBank fpf_step(const ParticleBank& bank, std::span<const double> mu, double dz,
                             const HybridModel& model, const FilterConfig& config, StepNoise noise) {
  return fpf_step(bank, compute_mode_statistics(bank, mu, model, config), dz, model, config, noise);
}

/// sum_m mu^m * mean_m.
inline double bank_estimate(const ParticleBank& bank, std::span<const double> mu) {
  require(mu.size() == bank.n_modes(), "mode count mismatch");
  double s = 0.0;
  for (std::size_t m = 0; m < mu.size(); ++m) s += mu[m] * particle_mean(bank.mode(m));
  return s;
}

/// Debug snapshot as `mode,particle,x` (1-based indices).
inline void write_bank_csv(std::ostream& os, const ParticleBank& bank) {
  os << "mode,particle,x\n";
  for (std::size_t m = 0; m < bank.n_modes(); ++m)
    for (std::size_t i = 0; i < bank.n_particles(); ++i)
      os << m + 1 << ',' << i + 1 << ',' << text::format_double(bank(m, i)) << '\n';
}

}  // namespace immfpf
