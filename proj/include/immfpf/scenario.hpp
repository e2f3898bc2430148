#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "immfpf/error.hpp"
#include "immfpf/hybrid_model.hpp"
#include "immfpf/mode_probability.hpp"
#include "immfpf/oracles.hpp"
#include "immfpf/particle_bank.hpp"

namespace immfpf {

enum class MuUpdate { euler, bayes };

/// How the ground-truth mode path is produced.
struct TruthSpec {
  enum class Source { schedule, generator };
  Source source = Source::schedule;
  SwitchSchedule schedule;  // also holds the initial mode for Source::generator
  double x0 = 0.0;

  bool operator==(const TruthSpec&) const = default;
};

struct OracleSpec {
  Grid1D grid;
  /// Transport sub-steps per filter step; 0 picks the smallest stable count.
  std::size_t substeps = 0;
  std::vector<double> snapshot_times;
  GridCorrection correction = GridCorrection::euler;

  bool operator==(const OracleSpec&) const = default;
};

struct ScenarioConfig {
  HybridModel model;
  TruthSpec truth;
  double prior_mean = 0.0;
  double prior_std = 1.0;
  double dt = 0.01;
  double horizon = 1.0;
  std::size_t n_particles = 100;
  MuUpdate mu_update = MuUpdate::euler;
  double clamp_floor = 1e-9;
  double c_cap = 1e3;
  std::vector<std::uint64_t> seeds{1};
  double burn_in = 1.0;
  std::optional<OracleSpec> oracle;
  std::string output_dir = "out";

  FilterConfig filter_config() const { return {dt, GainMode::constant, clamp_floor, c_cap}; }

  std::size_t steps() const { return step_count(dt, horizon); }

  void validate() const {
    model.validate();
    require(n_particles >= 2, "particles must be at least 2");
    require(std::isfinite(prior_mean), "prior_mean must be finite");
    require(prior_std >= 0.0 && std::isfinite(prior_std), "prior_std must be nonnegative");
    require(std::isfinite(truth.x0), "truth x0 must be finite");
    require(burn_in >= 0.0, "burn_in must be nonnegative");
    require(!seeds.empty(), "at least one seed is required");
    filter_config().validate(model.n_modes());
    (void)steps();
    require(truth.schedule.initial_mode < model.n_modes(), "truth initial mode out of range");
    for (const auto& [t, m] : truth.schedule.switches) {
      require(m < model.n_modes(), "truth switch mode out of range");
      require(t >= 0.0 && std::isfinite(t), "switch times must be nonnegative");
    }
    if (oracle) oracle->grid.validate();
  }

  bool operator==(const ScenarioConfig&) const = default;
};

/// Grid oracle output on the filter's time grid.
struct OracleTrace {
  std::vector<std::vector<double>> mu;         // [step][mode] = int q*_m
  std::vector<std::vector<double>> mode_mean;  // moments of rho*_m
  std::vector<std::vector<double>> mode_variance;
  std::vector<std::pair<double, GridDensity>> snapshots;
};

struct FilterTrace {
  std::vector<double> times;
  std::vector<double> estimate;
  std::vector<std::vector<double>> mode_mean;
  std::vector<std::vector<double>> mode_variance;
  std::vector<ModeProbabilities> mu;
  std::optional<OracleTrace> oracle;
  ParticleBank final_bank;
};

struct RunMetrics {
  double rmse = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> segment_accuracy;
  double runtime_seconds = 0.0;
};

struct RunResult {
  std::uint64_t seed = 0;
  TruthTrajectory truth;
  ObservationPath observations;
  FilterTrace filter;
  RunMetrics metrics;
};

inline double particle_variance(std::span<const double> xs) {
  const double m = particle_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size());
}

namespace detail {

inline std::size_t oracle_substeps(const OracleSpec& spec, const GridDensity& density,
                                   const HybridModel& model, double dt) {
  if (spec.substeps > 0) return spec.substeps;
  const double limit = max_stable_dt(density, model);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dt / limit - 1e-9)));
}

inline void record_bank(FilterTrace& trace, const ParticleBank& bank, const ModeProbabilities& mu) {
  std::vector<double> means(bank.n_modes());
  std::vector<double> vars(bank.n_modes());
  for (std::size_t m = 0; m < bank.n_modes(); ++m) {
    means[m] = particle_mean(bank.mode(m));
    vars[m] = particle_variance(bank.mode(m));
  }
  double est = 0.0;
  for (std::size_t m = 0; m < bank.n_modes(); ++m) est += mu[m] * means[m];
  trace.estimate.push_back(est);
  trace.mode_mean.push_back(std::move(means));
  trace.mode_variance.push_back(std::move(vars));
  trace.mu.push_back(mu);
}

inline void record_oracle(OracleTrace& trace, const GridDensity& density) {
  std::vector<double> mass(density.n_modes), mean(density.n_modes), var(density.n_modes);
  for (std::size_t m = 0; m < density.n_modes; ++m) {
    const auto mo = grid_moments(density, m);
    mass[m] = mo.mass;
    mean[m] = mo.mean;
    var[m] = mo.variance;
  }
  trace.mu.push_back(std::move(mass));
  trace.mode_mean.push_back(std::move(mean));
  trace.mode_variance.push_back(std::move(var));
}

inline bool is_snapshot(const std::vector<double>& times, double t, double dt) {
  return std::any_of(times.begin(), times.end(),
                     [&](double s) { return std::abs(s - t) <= 0.5 * dt; });
}

}  // namespace detail

/// Runs the IMM-FPF (and the grid oracle when configured) over a given
/// observation path. Per step: statistics from the pre-step bank, particle
/// update, mode-probability update, then the estimate at t + dt.
inline FilterTrace run_filter(const ScenarioConfig& config, const ObservationPath& obs,
                              std::uint64_t seed) {
  const HybridModel& model = config.model;
  const FilterConfig fc = config.filter_config();
  const std::size_t M = model.n_modes();
  const std::size_t steps = obs.increments.size();
  require(std::abs(obs.dt - config.dt) <= 1e-12 * config.dt,
          "observation step must equal the filter dt");

  FilterTrace trace;
  trace.times = time_grid(config.dt, steps);
  auto bank = sample_initial_bank(M, config.n_particles, config.prior_mean, config.prior_std, seed);
  auto mu = normalize_clamp(model.initial_mode_dist, fc.clamp_floor);
  detail::record_bank(trace, bank, mu);

  std::optional<GridDensity> density;
  std::size_t substeps = 1;
  if (config.oracle) {
    require(config.prior_std > 0.0, "the grid oracle needs prior_std > 0");
    density = initial_grid_density(config.oracle->grid, model.initial_mode_dist, config.prior_mean,
                                   config.prior_std);
    substeps = detail::oracle_substeps(*config.oracle, *density, model, config.dt);
    trace.oracle.emplace();
    detail::record_oracle(*trace.oracle, *density);
    if (detail::is_snapshot(config.oracle->snapshot_times, 0.0, config.dt))
      trace.oracle->snapshots.emplace_back(0.0, *density);
  }

  const double inv_sigma = 1.0 / model.obs_noise;
  for (std::size_t k = 0; k < steps; ++k) {
    const double dz = obs.increments[k];
    try {
      const auto stats = compute_mode_statistics(bank, mu, model, fc);
      auto next = fpf_step(bank, stats, dz, model, fc, {seed, k});
      if (config.mu_update == MuUpdate::euler) {
        mu = mu_step_euler(mu, stats.h_hat_mode, stats.h_hat_global, model.generator, dz * inv_sigma,
                           config.dt, fc.clamp_floor);
      } else {
        mu = mu_step_bayes(mu, bank, model, model.generator, dz, config.dt, fc.clamp_floor);
      }
      bank = std::move(next);
      if (density) {
        *density = kushner_grid_step(*density, model, dz, config.dt, substeps, config.oracle->correction);
        detail::record_oracle(*trace.oracle, *density);
        const double t = trace.times[k + 1];
        if (detail::is_snapshot(config.oracle->snapshot_times, t, config.dt))
          trace.oracle->snapshots.emplace_back(t, *density);
      }
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(k) + ": " + e.what());
    }
    detail::record_bank(trace, bank, mu);
  }
  trace.final_bank = std::move(bank);
  return trace;
}

/// Per maximal constant-mode segment of the truth, the fraction of steps at
/// least `burn_in` after the segment start where argmax mu equals the true
/// mode. Ties resolve to the lowest index.
inline std::vector<double> mode_accuracy(const TruthTrajectory& truth,
                                         const std::vector<ModeProbabilities>& mu, double burn_in) {
  require(mu.size() == truth.modes.size(), "mu path and truth must share the time grid");
  std::vector<double> acc;
  std::size_t start = 0;
  const std::size_t n = truth.modes.size();
  while (start < n) {
    std::size_t end = start;
    while (end < n && truth.modes[end] == truth.modes[start]) ++end;
    const double t0 = truth.times[start];
    std::size_t hits = 0;
    std::size_t counted = 0;
    for (std::size_t k = start; k < end; ++k) {
      if (truth.times[k] + 1e-9 < t0 + burn_in) continue;
      ++counted;
      if (mu[k].argmax() == truth.modes[k]) ++hits;
    }
    if (counted == 0)
      fail(ErrorCode::segment_shorter_than_burn_in,
           "segment starting at t=" + text::format_double(t0) + " is shorter than the burn-in");
    acc.push_back(static_cast<double>(hits) / static_cast<double>(counted));
    start = end;
  }
  return acc;
}

/// RMSE of the estimate over steps that are past the burn-in of their segment.
inline double post_burn_in_rmse(const TruthTrajectory& truth, std::span<const double> estimate,
                                double burn_in) {
  require(estimate.size() == truth.states.size(), "estimate and truth must share the time grid");
  double sq = 0.0;
  std::size_t count = 0;
  double segment_start = 0.0;
  for (std::size_t k = 0; k < truth.states.size(); ++k) {
    if (k > 0 && truth.modes[k] != truth.modes[k - 1]) segment_start = truth.times[k];
    if (truth.times[k] + 1e-9 < segment_start + burn_in) continue;
    const double e = estimate[k] - truth.states[k];
    sq += e * e;
    ++count;
  }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(sq / static_cast<double>(count));
}

inline TruthTrajectory simulate_scenario_truth(const ScenarioConfig& config, std::uint64_t seed) {
  const std::size_t steps = config.steps();
  std::vector<std::size_t> path;
  if (config.truth.source == TruthSpec::Source::schedule)
    path = mode_path_from_schedule(config.truth.schedule, config.dt, steps);
  else
    path = simulate_mode_chain(config.model.generator, config.truth.schedule.initial_mode, config.dt,
                               config.horizon, seed);
  return simulate_truth(config.model, path, config.truth.x0, config.dt, seed);
}

/// Truth, observations, filter and metrics for one seed.
inline RunResult run_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();
  RunResult result;
  result.seed = seed;
  result.truth = simulate_scenario_truth(config, seed);
  result.observations = synthesize_observations(config.model, result.truth, seed);
  result.filter = run_filter(config, result.observations, seed);
  if (result.truth.steps() > 0) {
    result.metrics.rmse = post_burn_in_rmse(result.truth, result.filter.estimate, config.burn_in);
    // Accuracy needs at least one post-burn-in step in every segment.
    try {
      result.metrics.segment_accuracy = mode_accuracy(result.truth, result.filter.mu, config.burn_in);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::segment_shorter_than_burn_in) throw;
    }
  }
  result.metrics.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

struct SweepRow {
  std::uint64_t seed = 0;
  double rmse = 0.0;
  std::vector<double> segment_accuracy;
  double min_accuracy = 0.0;
  double mean_accuracy = 0.0;
  double runtime_seconds = 0.0;
};

struct SweepSummary {
  std::vector<SweepRow> rows;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
};

inline double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = particle_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

/// Runs every configured seed and aggregates RMSE and mean segment accuracy.
inline SweepSummary seed_sweep(const ScenarioConfig& config) {
  require(config.seeds.size() >= 2, "a sweep needs at least two seeds");
  SweepSummary summary;
  std::vector<double> rmses;
  std::vector<double> accs;
  for (auto seed : config.seeds) {
    const auto result = run_scenario(config, seed);
    SweepRow row;
    row.seed = seed;
    row.rmse = result.metrics.rmse;
    row.segment_accuracy = result.metrics.segment_accuracy;
    if (!row.segment_accuracy.empty()) {
      row.min_accuracy = *std::min_element(row.segment_accuracy.begin(), row.segment_accuracy.end());
      row.mean_accuracy = particle_mean(row.segment_accuracy);
    }
    row.runtime_seconds = result.metrics.runtime_seconds;
    rmses.push_back(row.rmse);
    accs.push_back(row.mean_accuracy);
    summary.rows.push_back(std::move(row));
  }
  summary.rmse_mean = particle_mean(rmses);
  summary.rmse_std = sample_std(rmses);
  summary.accuracy_mean = particle_mean(accs);
  summary.accuracy_std = sample_std(accs);
  return summary;
}

}  // namespace immfpf
