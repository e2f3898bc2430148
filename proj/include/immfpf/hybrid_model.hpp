#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "immfpf/error.hpp"
#include "immfpf/random.hpp"
#include "immfpf/scalar_function.hpp"

namespace immfpf {

/// Mode-conditioned coefficients: dX = drift(X) dt + diffusion dB,
/// dZ = observation(X) dt + sigma_W dW.
struct ModeDynamics {
  ScalarFunction drift;
  double diffusion = 0.0;
  ScalarFunction observation;

  bool operator==(const ModeDynamics&) const = default;
};

/// Transition-rate matrix of the continuous-time mode chain. Only
/// constructible through validate_generator().
class GeneratorMatrix {
 public:
  GeneratorMatrix() = default;

  std::size_t size() const { return n_; }
  double operator()(std::size_t from, std::size_t to) const { return q_[from * n_ + to]; }

  /// Largest exit rate max_m |q_mm|.
  double max_exit_rate() const {
    double r = 0.0;
    for (std::size_t m = 0; m < n_; ++m) r = std::max(r, std::abs((*this)(m, m)));
    return r;
  }

  bool is_zero() const {
    return std::all_of(q_.begin(), q_.end(), [](double v) { return v == 0.0; });
  }

  std::vector<std::vector<double>> rows() const {
    std::vector<std::vector<double>> out(n_, std::vector<double>(n_));
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) out[i][j] = (*this)(i, j);
    return out;
  }

  bool operator==(const GeneratorMatrix&) const = default;

 private:
  friend GeneratorMatrix validate_generator(const std::vector<std::vector<double>>& raw);

  std::size_t n_ = 0;
  std::vector<double> q_;
};

/// Validates a raw rate matrix. NaN diagonal entries mean "not supplied" and
/// are filled with minus the off-diagonal row sum. Supplied diagonals must
/// balance their row to 1e-9; the stored diagonal is then refilled so every
/// row sums to zero up to rounding.
inline GeneratorMatrix validate_generator(const std::vector<std::vector<double>>& raw) {
  const std::size_t n = raw.size();
  require(n >= 1, "generator must have at least one mode");
  GeneratorMatrix g;
  g.n_ = n;
  g.q_.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    require(raw[i].size() == n, "generator must be square");
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = raw[i][j];
      require(std::isfinite(v), "generator entries must be finite");
      if (v < 0.0)
        fail(ErrorCode::negative_off_diagonal,
             "generator entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                 ") is negative");
      g.q_[i * n + j] = v;
      off += v;
    }
    const double diag = raw[i][i];
    if (!std::isnan(diag)) {
      require(std::isfinite(diag), "generator entries must be finite");
      if (std::abs(diag + off) > 1e-9)
        fail(ErrorCode::row_sum_nonzero,
             "generator row " + std::to_string(i + 1) + " sums to " + text::format_double(diag + off));
    }
    g.q_[i * n + i] = -off;
  }
  return g;
}

struct HybridModel {
  std::vector<ModeDynamics> modes;
  GeneratorMatrix generator;
  double obs_noise = 1.0;  // sigma_W
  std::vector<double> initial_mode_dist;

  std::size_t n_modes() const { return modes.size(); }

  void validate() const {
    require(!modes.empty(), "model needs at least one mode");
    require(generator.size() == modes.size(), "generator dimension must equal the number of modes");
    require(obs_noise > 0.0 && std::isfinite(obs_noise), "obs_noise must be positive");
    for (const auto& m : modes)
      require(m.diffusion >= 0.0 && std::isfinite(m.diffusion), "diffusion must be nonnegative");
    require(initial_mode_dist.size() == modes.size(),
            "initial_mode_dist length must equal the number of modes");
    double sum = 0.0;
    for (double p : initial_mode_dist) {
      require(p >= 0.0 && std::isfinite(p), "initial_mode_dist entries must be nonnegative");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "initial_mode_dist must sum to 1");
  }

  bool operator==(const HybridModel&) const = default;
};

struct TruthTrajectory {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<double> states;
  std::vector<std::size_t> modes;

  std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
};

/// Observation increments dZ over [t_k, t_k + dt), k = 0..K-1.
struct ObservationPath {
  double dt = 0.0;
  std::vector<double> increments;
};

/// Deterministic switch script: `initial_mode` from t = 0, then each
/// (time, mode) pair takes effect from that time on.
struct SwitchSchedule {
  std::size_t initial_mode = 0;
  std::vector<std::pair<double, std::size_t>> switches;

  std::size_t mode_at(double t, double tolerance = 1e-9) const {
    std::size_t m = initial_mode;
    for (const auto& [when, mode] : switches)
      if (when <= t + tolerance) m = mode;
    return m;
  }

  bool operator==(const SwitchSchedule&) const = default;
};

/// Number of steps for a horizon; the horizon must be a whole number of steps.
inline std::size_t step_count(double dt, double horizon) {
  require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
  require(horizon >= 0.0 && std::isfinite(horizon), "horizon must be nonnegative");
  const double k = std::round(horizon / dt);
  require(std::abs(k * dt - horizon) <= 1e-9 * std::max(1.0, horizon),
          "horizon must be an integer multiple of dt");
  return static_cast<std::size_t>(k);
}

inline std::vector<double> time_grid(double dt, std::size_t steps) {
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = static_cast<double>(k) * dt;
  return t;
}

/// First-order chain simulation: from mode m, jump to l with probability
/// q_ml dt. Returns steps + 1 mode indices starting with `init`.
inline std::vector<std::size_t> simulate_mode_chain(const GeneratorMatrix& gen, std::size_t init,
                                                    double dt, double horizon,
                                                    std::uint64_t seed) {
  require(init < gen.size(), "initial mode out of range");
  const std::size_t steps = step_count(dt, horizon);
  if (dt * gen.max_exit_rate() >= 0.1)
    fail(ErrorCode::step_too_large, "dt * max exit rate must be below 0.1");
  auto eng = rng::engine(seed, rng::Stream::mode_chain);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::size_t> path(steps + 1);
  path[0] = init;
  std::size_t m = init;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double u = unif(eng);
    double acc = 0.0;
    for (std::size_t l = 0; l < gen.size(); ++l) {
      if (l == m) continue;
      acc += gen(m, l) * dt;
      if (u < acc) {
        m = l;
        break;
      }
    }
    path[k] = m;
  }
  return path;
}

inline std::vector<std::size_t> mode_path_from_schedule(const SwitchSchedule& schedule, double dt,
                                                        std::size_t steps) {
  std::vector<std::size_t> path(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) path[k] = schedule.mode_at(static_cast<double>(k) * dt);
  return path;
}

/// Euler-Maruyama ground truth driven by a given mode path.
inline TruthTrajectory simulate_truth(const HybridModel& model, std::span<const std::size_t> mode_path,
                                      double x0, double dt, std::uint64_t seed) {
  require(std::isfinite(x0), "x0 must be finite");
  require(dt > 0.0, "dt must be positive");
  require(!mode_path.empty(), "mode path must contain the initial mode");
  const std::size_t steps = mode_path.size() - 1;
  TruthTrajectory truth;
  truth.dt = dt;
  truth.times = time_grid(dt, steps);
  truth.states.resize(steps + 1);
  truth.modes.assign(mode_path.begin(), mode_path.end());
  for (auto m : truth.modes) require(m < model.n_modes(), "mode index out of range");

  auto eng = rng::engine(seed, rng::Stream::truth_diffusion);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sqrt_dt = std::sqrt(dt);
  double x = x0;
  truth.states[0] = x;
  for (std::size_t k = 0; k < steps; ++k) {
    const auto& mode = model.modes[truth.modes[k]];
    const double xi = normal(eng);
    x += mode.drift(x) * dt + mode.diffusion * sqrt_dt * xi;
    truth.states[k + 1] = x;
  }
  return truth;
}

inline TruthTrajectory simulate_truth(const HybridModel& model, const SwitchSchedule& schedule,
                                      double x0, double dt, double horizon, std::uint64_t seed) {
  const auto path = mode_path_from_schedule(schedule, dt, step_count(dt, horizon));
  return simulate_truth(model, path, x0, dt, seed);
}

/// dZ_k = h^{m_k}(X_k) dt + sigma_W sqrt(dt) eta_k on its own noise stream.
inline ObservationPath synthesize_observations(const HybridModel& model, const TruthTrajectory& truth,
                                               std::uint64_t seed) {
  ObservationPath obs;
  obs.dt = truth.dt;
  const std::size_t steps = truth.steps();
  obs.increments.resize(steps);
  auto eng = rng::engine(seed, rng::Stream::observation_noise);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = model.obs_noise * std::sqrt(truth.dt);
  for (std::size_t k = 0; k < steps; ++k) {
    require(truth.modes[k] < model.n_modes(), "truth mode index out of range");
    const double h = model.modes[truth.modes[k]].observation(truth.states[k]);
    obs.increments[k] = h * truth.dt + scale * normal(eng);
  }
  return obs;
}

}  // namespace immfpf
