#pragma once

#include <cstdint>
#include <vector>

#include "metabandit/bandit.hpp"

namespace metabandit::oracle {

using bandit::BanditConfig;

/// Monte-Carlo mean with std_error = sample_std / sqrt(episodes).
struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long long episodes = 0;
};

/// Episodes per shard. Shard s draws from Rng(derive_seed(seed, kOracle, s)),
/// so estimates do not depend on the number of worker threads.
inline constexpr long long kShardEpisodes = 1 << 16;

/// Literal simulation of explore-n-then-commit: n stochastic pulls, a MAP
/// estimate, then T-n pulls of the arm the estimate favours. Shares no
/// numerics with the theory module.
McEstimate simulate_policy(const BanditConfig& config, int n, long long episodes, std::uint64_t seed);

struct BruteForceResult {
  int n_star = 0;
  double value = 0.0;
  std::vector<McEstimate> curve;  ///< indexed by n = 0..T
};

/// Evaluates every n in 0..T on the same (mu, reward-noise) draws per episode
/// (common random numbers) and returns the smallest empirical argmax.
BruteForceResult brute_force_nstar(const BanditConfig& config, long long episodes_per_n,
                                   std::uint64_t seed);

}  // namespace metabandit::oracle
