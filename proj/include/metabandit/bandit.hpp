#pragma once

#include "metabandit/rng.hpp"

namespace metabandit::bandit {

/// Arm indices are fixed across the codebase: 0 pays exactly 0, 1 is Gaussian.
enum class Arm : int { kDeterministic = 0, kStochastic = 1 };

inline constexpr int kNumArms = 2;

/// Ensemble of two-arm bandits: mu ~ N(prior_mean, sigma_p^2), r ~ N(mu, sigma_l^2).
struct BanditConfig {
  double sigma_p = 1.0;
  double sigma_l = 1.0;
  int lifetime = 100;
  double prior_mean = -1.0;

  /// Throws ConfigError unless sigma_p >= 0, sigma_l > 0, lifetime >= 1.
  void validate() const;
};

/// One sampled bandit. mu stays fixed for the whole episode.
struct BanditTask {
  double mu = 0.0;
  BanditConfig config;
};

BanditTask sample_task(const BanditConfig& config, Rng& rng);

/// Deterministic arm returns exactly 0; the stochastic arm draws from N(mu, sigma_l^2).
double pull(const BanditTask& task, Arm arm, Rng& rng);

}  // namespace metabandit::bandit
