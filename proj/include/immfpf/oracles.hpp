#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "immfpf/error.hpp"
#include "immfpf/hybrid_model.hpp"
#include "immfpf/text.hpp"

// Desk-scale exact filters used to check the particle filter: Kalman-Bucy
// for linear-Gaussian models, an explicit finite-volume solver for the joint
// conditional density q*_m(x, t), and grid solutions of the gain and
// interaction-control boundary value problems.

namespace immfpf {

/// Uniform cell-centred grid on [x_min, x_max].
struct Grid1D {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t n_cells = 16;

  void validate() const {
    require(std::isfinite(x_min) && std::isfinite(x_max) && x_min < x_max,
            "grid needs x_min < x_max");
    require(n_cells >= 16, "grid needs at least 16 cells");
  }

  double spacing() const { return (x_max - x_min) / static_cast<double>(n_cells); }
  double center(std::size_t j) const {
    return x_min + (static_cast<double>(j) + 0.5) * spacing();
  }
  /// Face between cells j - 1 and j.
  double face(std::size_t j) const { return x_min + static_cast<double>(j) * spacing(); }

  std::vector<double> centers() const {
    std::vector<double> xs(n_cells);
    for (std::size_t j = 0; j < n_cells; ++j) xs[j] = center(j);
    return xs;
  }

  bool operator==(const Grid1D&) const = default;
};

/// Stacked per-mode densities q*_m on a shared grid, mode-major.
struct GridDensity {
  Grid1D grid;
  std::size_t n_modes = 1;
  std::vector<double> values;

  std::span<double> mode(std::size_t m) {
    return {values.data() + m * grid.n_cells, grid.n_cells};
  }
  std::span<const double> mode(std::size_t m) const {
    return {values.data() + m * grid.n_cells, grid.n_cells};
  }

  double total_mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.spacing();
  }
};

struct Moments {
  double mass = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

inline Moments density_moments(const Grid1D& grid, std::span<const double> q) {
  const double hx = grid.spacing();
  Moments mo;
  double first = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    mo.mass += q[j] * hx;
    first += grid.center(j) * q[j] * hx;
  }
  if (mo.mass <= 0.0) return mo;
  mo.mean = first / mo.mass;
  double second = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double d = grid.center(j) - mo.mean;
    second += d * d * q[j] * hx;
  }
  mo.variance = second / mo.mass;
  return mo;
}

/// Mass of q*_m and the mean/variance of the conditional rho*_m = q*_m / mu^m.
inline Moments grid_moments(const GridDensity& density, std::size_t m) {
  require(m < density.n_modes, "mode index out of range");
  return density_moments(density.grid, density.mode(m));
}

/// Moments of the marginal p* = sum_m q*_m.
inline Moments grid_moments(const GridDensity& density) {
  std::vector<double> p(density.grid.n_cells, 0.0);
  for (std::size_t m = 0; m < density.n_modes; ++m) {
    const auto q = density.mode(m);
    for (std::size_t j = 0; j < p.size(); ++j) p[j] += q[j];
  }
  return density_moments(density.grid, p);
}

inline std::vector<double> mode_masses(const GridDensity& density) {
  std::vector<double> mu(density.n_modes);
  for (std::size_t m = 0; m < density.n_modes; ++m) mu[m] = grid_moments(density, m).mass;
  return mu;
}

/// Gaussian sampled at cell centres, rescaled to unit discrete mass.
inline std::vector<double> gaussian_on_grid(const Grid1D& grid, double mean, double std) {
  require(std > 0.0, "gaussian std must be positive");
  std::vector<double> v(grid.n_cells);
  double mass = 0.0;
  for (std::size_t j = 0; j < grid.n_cells; ++j) {
    const double z = (grid.center(j) - mean) / std;
    v[j] = std::exp(-0.5 * z * z);
    mass += v[j] * grid.spacing();
  }
  for (double& x : v) x /= mass;
  return v;
}

/// q*_m(x, 0) = mu0^m N(x; mean, std^2).
inline GridDensity initial_grid_density(const Grid1D& grid, std::span<const double> mu0, double mean,
                                        double std) {
  grid.validate();
  GridDensity d{grid, mu0.size(), std::vector<double>(grid.n_cells * mu0.size())};
  const auto g = gaussian_on_grid(grid, mean, std);
  for (std::size_t m = 0; m < mu0.size(); ++m) {
    auto q = d.mode(m);
    for (std::size_t j = 0; j < g.size(); ++j) q[j] = mu0[m] * g[j];
  }
  return d;
}

/// Gaussian kernel density estimate on the grid, rescaled to unit mass.
inline std::vector<double> kde_on_grid(const Grid1D& grid, std::span<const double> samples,
                                       double bandwidth) {
  require(bandwidth > 0.0, "bandwidth must be positive");
  require(!samples.empty(), "kde needs samples");
  const double hx = grid.spacing();
  std::vector<double> v(grid.n_cells, 0.0);
  const double reach = 9.0 * bandwidth;
  for (double s : samples) {
    const auto lo = static_cast<long long>(std::floor((s - reach - grid.x_min) / hx));
    const auto hi = static_cast<long long>(std::ceil((s + reach - grid.x_min) / hx));
    const auto first = static_cast<std::size_t>(std::max(0LL, lo));
    const auto last = static_cast<std::size_t>(
        std::clamp(hi, 0LL, static_cast<long long>(grid.n_cells)));
    for (std::size_t j = first; j < last; ++j) {
      const double z = (grid.center(j) - s) / bandwidth;
      v[j] += std::exp(-0.5 * z * z);
    }
  }
  double mass = 0.0;
  for (double x : v) mass += x * hx;
  require(mass > 0.0, "kde support lies outside the grid");
  for (double& x : v) x /= mass;
  return v;
}

/// Largest stable step for the explicit scheme on this grid/model.
inline double max_stable_dt(const GridDensity& density, const HybridModel& model) {
  const double hx = density.grid.spacing();
  double sigma_max = 0.0;
  double drift_max = 0.0;
  for (const auto& mode : model.modes) {
    sigma_max = std::max(sigma_max, mode.diffusion);
    for (std::size_t j = 0; j <= density.grid.n_cells; ++j)
      drift_max = std::max(drift_max, std::abs(mode.drift(density.grid.face(j))));
  }
  double limit = std::numeric_limits<double>::infinity();
  if (sigma_max > 0.0) limit = std::min(limit, 0.4 * hx * hx / (sigma_max * sigma_max));
  if (drift_max > 0.0) limit = std::min(limit, 0.9 * hx / drift_max);
  return limit;
}

enum class GridCorrection { euler, exponential };

/// One explicit Euler step of
///   dq* = L^dagger q* dt + Q^T q* dt + (H - h I)(dZ - h dt) q*
/// in unit observation noise. Advection is upwinded, diffusion uses the
/// central second difference, both with zero-flux walls. Negative values
/// are clipped and the total mass renormalized to one.
///
/// With `substeps` > 1 the transport and generator terms are advanced in that
/// many explicit sub-steps of dt / substeps (the stability limit applies to
/// the sub-step) while the observation term is still formed once from the
/// pre-step density with the full increment, which keeps the Ito form of the
/// correction intact. substeps == 1 is the plain explicit Euler step.
///
/// GridCorrection::exponential replaces the factor 1 + d I (d = h - h_hat,
/// I the innovation) by exp(d I - d^2 dt / 2), the exact likelihood ratio of
/// the increment. Both agree to first order; the exponential form stays
/// positive for large d I.
inline GridDensity kushner_grid_step(const GridDensity& density, const HybridModel& model, double dz,
                                     double dt, std::size_t substeps = 1,
                                     GridCorrection form = GridCorrection::euler) {
  const Grid1D& grid = density.grid;
  const std::size_t n = grid.n_cells;
  const std::size_t M = density.n_modes;
  require(M == model.n_modes(), "mode count mismatch");
  require(substeps >= 1, "substeps must be positive");
  const double hx = grid.spacing();
  const double sub_dt = dt / static_cast<double>(substeps);
  if (sub_dt > max_stable_dt(density, model) * (1.0 + 1e-12))
    fail(ErrorCode::stability_violation,
         "dt " + text::format_double(sub_dt) + " exceeds the explicit stability limit " +
             text::format_double(max_stable_dt(density, model)));

  const double inv_sigma = 1.0 / model.obs_noise;
  const double dz_scaled = dz * inv_sigma;

  std::vector<double> correction(M * n);
  double h_hat = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    const auto q = density.mode(m);
    for (std::size_t j = 0; j < n; ++j) {
      correction[m * n + j] = model.modes[m].observation(grid.center(j)) * inv_sigma;
      h_hat += correction[m * n + j] * q[j] * hx;
    }
  }
  const double innovation = dz_scaled - h_hat * dt;
  for (std::size_t m = 0; m < M; ++m) {
    const auto q = density.mode(m);
    for (std::size_t j = 0; j < n; ++j) {
      const double d = correction[m * n + j] - h_hat;
      correction[m * n + j] = form == GridCorrection::euler
                                  ? d * innovation * q[j]
                                  : std::expm1(d * innovation - 0.5 * d * d * dt) * q[j];
    }
  }

  std::vector<double> drift_at_face(M * (n + 1));
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t f = 0; f <= n; ++f)
      drift_at_face[m * (n + 1) + f] = model.modes[m].drift(grid.face(f));

  GridDensity current = density;
  GridDensity next = density;
  std::vector<double> flux(n + 1);
  for (std::size_t s = 0; s < substeps; ++s) {
    for (std::size_t m = 0; m < M; ++m) {
      const auto q = current.mode(m);
      const double half_var = 0.5 * model.modes[m].diffusion * model.modes[m].diffusion;
      flux[0] = 0.0;
      flux[n] = 0.0;
      for (std::size_t f = 1; f < n; ++f) {
        const double a = drift_at_face[m * (n + 1) + f];
        const double advective = a > 0.0 ? a * q[f - 1] : a * q[f];
        flux[f] = advective - half_var * (q[f] - q[f - 1]) / hx;
      }
      auto out = next.mode(m);
      for (std::size_t j = 0; j < n; ++j) {
        double coupling = 0.0;
        for (std::size_t l = 0; l < M; ++l) coupling += model.generator(l, m) * current.mode(l)[j];
        out[j] = q[j] + (-(flux[j + 1] - flux[j]) / hx + coupling) * sub_dt;
      }
    }
    std::swap(current, next);
  }
  next = std::move(current);
  for (std::size_t i = 0; i < next.values.size(); ++i) next.values[i] += correction[i];

  double mass = 0.0;
  double edge_mass = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    auto q = next.mode(m);
    for (double& v : q) {
      v = std::max(v, 0.0);
      mass += v * hx;
    }
    edge_mass += (q.front() + q.back()) * hx;
  }
  require(mass > 0.0 && std::isfinite(mass), "grid density lost all mass");
  if (edge_mass > 0.01 * mass)
    fail(ErrorCode::mass_escape, "more than 1% of the mass sits in the boundary cells");
  for (double& v : next.values) v /= mass;
  return next;
}

struct KalmanBucyPath {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Euler integration of the Kalman-Bucy filter for dX = alpha X dt + sigma dB,
/// dZ = X dt + obs_noise dW.
inline KalmanBucyPath kalman_bucy(double alpha, double sigma, const ObservationPath& obs,
                                  double x0_mean, double x0_var, double obs_noise = 1.0) {
  require(x0_var >= 0.0, "initial variance must be nonnegative");
  require(obs_noise > 0.0, "obs_noise must be positive");
  const double dt = obs.dt;
  const double r = obs_noise * obs_noise;
  KalmanBucyPath path;
  path.mean.resize(obs.increments.size() + 1);
  path.variance.resize(obs.increments.size() + 1);
  double m = x0_mean;
  double p = x0_var;
  path.mean[0] = m;
  path.variance[0] = p;
  for (std::size_t k = 0; k < obs.increments.size(); ++k) {
    const double dz = obs.increments[k];
    const double m_next = m + alpha * m * dt + (p / r) * (dz - m * dt);
    const double p_next = p + (2.0 * alpha * p + sigma * sigma - p * p / r) * dt;
    m = m_next;
    p = p_next;
    path.mean[k + 1] = m;
    path.variance[k + 1] = p;
  }
  return path;
}

/// A function sampled at cell centres plus the discrete boundary residual
/// of the cumulative integral it was built from.
struct GridFunction {
  std::vector<double> values;
  double boundary_residual = 0.0;
};

namespace detail {

/// Solves d(rho f)/dx = source with rho f -> 0 at the left wall by cumulative
/// summation; the right-wall residual is the total integral of the source.
inline GridFunction cumulative_solve(const Grid1D& grid, std::span<const double> rho,
                                     std::span<const double> source) {
  const double hx = grid.spacing();
  GridFunction out;
  out.values.resize(rho.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < rho.size(); ++j) {
    acc += source[j] * hx;
    out.values[j] = acc / std::max(rho[j], 1e-300);
  }
  out.boundary_residual = acc;
  if (std::abs(acc) > 1e-8)
    fail(ErrorCode::boundary_residual_large,
         "boundary residual " + text::format_double(acc) + " exceeds 1e-8");
  return out;
}

}  // namespace detail

/// Exact gain for d(rho K)/dx = -(h - h_hat) rho, where h_hat is the
/// rho-mean of h on the grid.
inline GridFunction grid_gain_exact(const Grid1D& grid, std::span<const double> rho,
                                    std::span<const double> h_values) {
  require(rho.size() == grid.n_cells && h_values.size() == grid.n_cells, "grid size mismatch");
  double mass = 0.0;
  double h_hat = 0.0;
  for (std::size_t j = 0; j < rho.size(); ++j) {
    mass += rho[j];
    h_hat += h_values[j] * rho[j];
  }
  h_hat /= mass;
  std::vector<double> source(rho.size());
  for (std::size_t j = 0; j < rho.size(); ++j) source[j] = -(h_values[j] - h_hat) * rho[j];
  return detail::cumulative_solve(grid, rho, source);
}

/// Exact interaction control for d(rho_m u)/dx = sum_l c_lm (rho_m - rho_l),
/// c_lm = q_lm mu^l / mu^m.
inline GridFunction grid_control_exact(const Grid1D& grid,
                                       const std::vector<std::vector<double>>& rhos,
                                       std::span<const double> mu, const GeneratorMatrix& gen,
                                       std::size_t m) {
  const std::size_t M = rhos.size();
  require(mu.size() == M && gen.size() == M && m < M, "mode count mismatch");
  require(mu[m] > 0.0, "mode probability must be positive");
  std::vector<double> source(grid.n_cells, 0.0);
  for (std::size_t l = 0; l < M; ++l) {
    if (l == m) continue;
    require(rhos[l].size() == grid.n_cells, "grid size mismatch");
    const double c = gen(l, m) * mu[l] / mu[m];
    if (c == 0.0) continue;
    for (std::size_t j = 0; j < grid.n_cells; ++j) source[j] += c * (rhos[m][j] - rhos[l][j]);
  }
  return detail::cumulative_solve(grid, rhos[m], source);
}

/// E_rho[f] = sum_j f_j rho_j h_x.
inline double grid_expectation(const Grid1D& grid, std::span<const double> rho,
                               std::span<const double> f) {
  double s = 0.0;
  for (std::size_t j = 0; j < rho.size(); ++j) s += f[j] * rho[j];
  return s * grid.spacing();
}

/// Snapshot as `x,q_1,...,q_M`.
inline void write_density_csv(std::ostream& os, const GridDensity& density) {
  os << 'x';
  for (std::size_t m = 0; m < density.n_modes; ++m) os << ",q_" << m + 1;
  os << '\n';
  for (std::size_t j = 0; j < density.grid.n_cells; ++j) {
    os << text::format_double(density.grid.center(j));
    for (std::size_t m = 0; m < density.n_modes; ++m)
      os << ',' << text::format_double(density.mode(m)[j]);
    os << '\n';
  }
}

}  // namespace immfpf
