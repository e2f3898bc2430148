#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace immfpf;

namespace {

HybridModel two_mode_linear(double rate, double obs_noise = 1.0) {
  HybridModel model;
  model.modes = {{ScalarFunction::constant(0.0), 0.0, ScalarFunction::affine(0.0, 1.0)},
                 {ScalarFunction::constant(0.0), 0.0, ScalarFunction::affine(0.0, 1.0)}};
  model.generator = validate_generator({{-rate, rate}, {rate, -rate}});
  model.obs_noise = obs_noise;
  model.initial_mode_dist = {0.5, 0.5};
  return model;
}

}  // namespace

TEST(NormalizeClamp, Examples) {
  EXPECT_EQ(normalize_clamp(std::vector{0.5, 0.5}, 1e-9), ModeProbabilities({0.5, 0.5}));
  const auto p = normalize_clamp(std::vector{-0.01, 1.01}, 1e-9);
  EXPECT_NEAR(p[0], 1e-9 / (1.01 + 1e-9), 1e-20);
  EXPECT_NEAR(p[1], 1.0, 1e-8);
  EXPECT_TRUE(p.on_simplex());
  const auto q = normalize_clamp(std::vector{0.2, 0.2, 0.2}, 1e-9);
  for (std::size_t m = 0; m < 3; ++m) EXPECT_NEAR(q[m], 1.0 / 3.0, 1e-15);
}

TEST(NormalizeClamp, RejectsNonFinite) {
  EXPECT_THROW(normalize_clamp(std::vector{std::nan(""), 1.0}, 1e-9), Error);
}

TEST(ModeProbabilities, ArgmaxTiesResolveLow) {
  EXPECT_EQ(ModeProbabilities::uniform(3).argmax(), 0u);
  EXPECT_EQ(ModeProbabilities({0.2, 0.4, 0.4}).argmax(), 1u);
}

TEST(MuEuler, NoInformationNoSwitching) {
  const auto gen = validate_generator({{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}});
  const std::vector<double> mu{0.2, 0.3, 0.5};
  const std::vector<double> h{1.5, 1.5, 1.5};
  const auto next = mu_step_euler(mu, h, 1.5, gen, 0.7, 0.01, 1e-9);
  for (std::size_t m = 0; m < 3; ++m) EXPECT_NEAR(next[m], mu[m], 1e-15);
}

TEST(MuEuler, PositiveIncrementsFavourPositiveMode) {
  const auto gen = validate_generator({{0.0, 0.0}, {0.0, 0.0}});
  std::vector<double> mu{0.5, 0.5};
  const std::vector<double> h{1.0, -1.0};
  const double dt = 0.01;
  for (int k = 0; k < 200; ++k) {
    const double h_global = global_h_hat(h, mu);
    const auto next = mu_step_euler(mu, h, h_global, gen, 1.0 * dt, dt, 1e-9);
    EXPECT_GT(next[0], mu[0]);
    mu.assign(next.values().begin(), next.values().end());
  }
  EXPECT_GT(mu[0], 0.8);
}

TEST(MuEuler, GeneratorTransferMatchesFormula) {
  const auto gen = validate_generator({{-2.0, 2.0}, {1.0, -1.0}});
  const std::vector<double> mu{0.6, 0.4};
  const std::vector<double> h{0.0, 0.0};
  const auto next = mu_step_euler(mu, h, 0.0, gen, 0.3, 0.01, 1e-9);
  EXPECT_NEAR(next[0], 0.6 + (-2.0 * 0.6 + 1.0 * 0.4) * 0.01, 1e-15);
  EXPECT_NEAR(next[1], 0.4 + (2.0 * 0.6 - 1.0 * 0.4) * 0.01, 1e-15);
}

TEST(MuEuler, StaysOnSimplexUnderLargeIncrements) {
  const auto gen = validate_generator({{-0.1, 0.1}, {0.1, -0.1}});
  const auto next = mu_step_euler(std::vector{0.5, 0.5}, std::vector{100.0, -100.0}, 0.0, gen, -5.0, 0.02, 1e-9);
  EXPECT_TRUE(next.on_simplex(1e-12));
  EXPECT_GT(next[0], 0.0);
  EXPECT_LT(next[0], 1e-9);
}

TEST(MuBayes, EqualLikelihoodsKeepPrediction) {
  const auto model = two_mode_linear(0.5);
  const auto bank = ParticleBank::from_modes({{0.1, 0.4, -0.2}, {0.1, 0.4, -0.2}});
  const std::vector<double> mu{0.3, 0.7};
  const double dt = 0.01;
  const auto next = mu_step_bayes(mu, bank, model, model.generator, 0.05, dt, 1e-9);
  const auto prior = predict_mode_probabilities(mu, model.generator, dt);
  EXPECT_NEAR(next[0], prior[0], 1e-15);
  EXPECT_NEAR(next[1], prior[1], 1e-15);
}

TEST(MuBayes, GaussianLikelihoodRatio) {
  // Concentrated particles at rescaled h-values 0 and 10, increment dz = 0.
  // L1 / L2 = exp(-(0 - 0)^2 / (2 dt)) / exp(-(10 dt)^2 / (2 dt)) = exp(50 dt).
  const auto model = two_mode_linear(0.0);
  const auto bank = ParticleBank::from_modes({{0.0, 0.0}, {10.0, 10.0}});
  const double dt = 0.01;
  const std::vector<double> mu{0.5, 0.5};
  const auto next = mu_step_bayes(mu, bank, model, model.generator, 0.0, dt, 1e-12);
  EXPECT_NEAR(next[0] / next[1], std::exp(50.0 * dt), 1e-12);
}

TEST(MuBayes, UnderflowFallsBackToPrediction) {
  const auto model = two_mode_linear(0.2, 1e-160);
  const auto bank = ParticleBank::from_modes({{1.0, 2.0}, {3.0, 4.0}});
  const std::vector<double> mu{0.4, 0.6};
  const auto next = mu_step_bayes(mu, bank, model, model.generator, 1e300, 0.01, 1e-9);
  EXPECT_TRUE(next.on_simplex());
}

TEST(MuBayes, AgreesWithEulerToFirstOrder) {
  // Frozen smooth driving path: as dt halves, the one-step gap halves.
  HybridModel model = two_mode_linear(0.3);
  model.modes[1].observation = ScalarFunction::affine(1.0, 0.5);
  const auto bank = ParticleBank::from_modes({{0.1, 0.3, 0.8}, {-0.4, 0.2, 0.6}});
  const std::vector<double> mu{0.4, 0.6};
  auto gap = [&](double dt) {
    const double dz = 0.8 * dt;
    const auto stats = compute_mode_statistics(bank, mu, model, FilterConfig{dt});
    const auto e = mu_step_euler(mu, stats.h_hat_mode, stats.h_hat_global, model.generator, dz, dt, 1e-9);
    const auto b = mu_step_bayes(mu, bank, model, model.generator, dz, dt, 1e-9);
    return std::max(std::abs(e[0] - b[0]), std::abs(e[1] - b[1]));
  };
  const double r1 = gap(0.02) / gap(0.01);
  const double r2 = gap(0.01) / gap(0.005);
  EXPECT_GT(r1, 1.7);
  EXPECT_LT(r1, 2.3);
  EXPECT_GT(r2, 1.7);
  EXPECT_LT(r2, 2.3);
}
