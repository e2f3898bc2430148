#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "immfpf/oracles.hpp"
#include "immfpf/particle_bank.hpp"
#include "immfpf/random.hpp"
#include "immfpf/scalar_function.hpp"

namespace immfpf {

struct GainCheckRow {
  std::size_t n_particles = 0;
  double bandwidth = 0.0;
  double constant_gain = 0.0;
  double exact_mean_gain = 0.0;  // E_rho[K] with rho the kernel density of the particles
  double abs_error = 0.0;
  double tolerance = 0.0;        // 3 |E[K]| / sqrt(N)
  bool within_tolerance = false;
};

/// Compares the constant gain of N(0,1) particles against the mean of the
/// exact gain solved on a grid for their kernel density (bandwidth N^-1/5).
inline GainCheckRow gain_check(const ScalarFunction& h, std::size_t n_particles, std::uint64_t seed,
                               const Grid1D& grid) {
  require(n_particles >= 2, "gain check needs at least two particles");
  grid.validate();
  std::vector<double> xs(n_particles);
  auto eng = rng::engine(seed, rng::Stream::particle_init);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : xs) x = normal(eng);

  HybridModel model;
  model.modes = {{ScalarFunction::constant(0.0), 0.0, h}};
  model.generator = validate_generator({{0.0}});
  model.obs_noise = 1.0;
  model.initial_mode_dist = {1.0};
  const auto bank = ParticleBank::from_modes({xs});

  GainCheckRow row;
  row.n_particles = n_particles;
  row.bandwidth = std::pow(static_cast<double>(n_particles), -0.2);
  row.constant_gain = constant_gain(bank, model, 0, mode_h_hat(bank, model, 0));

  const auto rho = kde_on_grid(grid, xs, row.bandwidth);
  std::vector<double> hv(grid.n_cells);
  for (std::size_t j = 0; j < grid.n_cells; ++j) hv[j] = h(grid.center(j));
  const auto gain = grid_gain_exact(grid, rho, hv);
  row.exact_mean_gain = grid_expectation(grid, rho, gain.values);
  row.abs_error = std::abs(row.constant_gain - row.exact_mean_gain);
  row.tolerance = 3.0 * std::abs(row.exact_mean_gain) / std::sqrt(static_cast<double>(n_particles));
  row.within_tolerance = row.abs_error <= row.tolerance;
  return row;
}

/// Default grid for the check: wide enough for N(0,1) samples plus kernels.
inline Grid1D gain_check_grid() { return Grid1D{-10.0, 10.0, 20000}; }

}  // namespace immfpf
