#include "metabandit/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metabandit/errors.hpp"
#include "metabandit/parallel.hpp"
#include "metabandit/rng.hpp"

namespace metabandit::oracle {
namespace {

// Welford accumulator; merged across shards in shard order.
struct Moments {
  long long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / count;
    m2 += delta * (x - mean);
  }

  void merge(const Moments& other) {
    if (other.count == 0) return;
    const long long total = count + other.count;
    const double delta = other.mean - mean;
    mean += delta * other.count / total;
    m2 += other.m2 + delta * delta * (static_cast<double>(count) * other.count / total);
    count = total;
  }

  McEstimate estimate() const {
    McEstimate e;
    e.episodes = count;
    e.mean = mean;
    e.std_error = count > 1 ? std::sqrt(m2 / (count - 1) / count) : 0.0;
    return e;
  }
};

// Posterior mode after `pulls` observations summing to `reward_sum`.
double posterior_mode(const BanditConfig& c, int pulls, double reward_sum) {
  if (pulls == 0 || c.sigma_p == 0.0) return c.prior_mean;
  const double prior_weight = 1.0 / (c.sigma_p * c.sigma_p);
  const double obs_weight = 1.0 / (c.sigma_l * c.sigma_l);
  return (prior_weight * c.prior_mean + obs_weight * reward_sum) / (prior_weight + pulls * obs_weight);
}

long long shard_count(long long episodes) { return (episodes + kShardEpisodes - 1) / kShardEpisodes; }

long long shard_size(long long episodes, long long shard) {
  return std::min(kShardEpisodes, episodes - shard * kShardEpisodes);
}

void check_inputs(const BanditConfig& config, int n, long long episodes) {
  config.validate();
  if (n < 0 || n > config.lifetime)
    throw DomainError("exploration count " + std::to_string(n) + " outside [0, " +
                      std::to_string(config.lifetime) + "]");
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
}

}  // namespace

McEstimate simulate_policy(const BanditConfig& config, int n, long long episodes, std::uint64_t seed) {
  check_inputs(config, n, episodes);
  const long long shards = shard_count(episodes);
  std::vector<Moments> partial(shards);

  parallel_for(shards, [&](std::size_t s) {
    Rng rng(derive_seed(seed, streams::kOracle, s));
    Moments& acc = partial[s];
    const long long count = shard_size(episodes, static_cast<long long>(s));
    for (long long e = 0; e < count; ++e) {
      const bandit::BanditTask task = bandit::sample_task(config, rng);
      double total = 0.0;
      for (int t = 0; t < n; ++t) total += bandit::pull(task, bandit::Arm::kStochastic, rng);
      const double estimate = posterior_mode(config, n, total);
      const auto arm = estimate > 0.0 ? bandit::Arm::kStochastic : bandit::Arm::kDeterministic;
      for (int t = n; t < config.lifetime; ++t) total += bandit::pull(task, arm, rng);
      acc.add(total);
    }
  });

  Moments all;
  for (const auto& m : partial) all.merge(m);
  return all.estimate();
}

BruteForceResult brute_force_nstar(const BanditConfig& config, long long episodes_per_n,
                                   std::uint64_t seed) {
  check_inputs(config, 0, episodes_per_n);
  const int lifetime = config.lifetime;
  const long long shards = shard_count(episodes_per_n);
  std::vector<std::vector<Moments>> partial(shards, std::vector<Moments>(lifetime + 1));

  parallel_for(shards, [&](std::size_t s) {
    Rng rng(derive_seed(seed, streams::kOracle, s));
    auto& acc = partial[s];
    // prefix[t] = sum of the first t stochastic-arm rewards of this episode.
    std::vector<double> prefix(lifetime + 1, 0.0);
    const long long count = shard_size(episodes_per_n, static_cast<long long>(s));
    for (long long e = 0; e < count; ++e) {
      const bandit::BanditTask task = bandit::sample_task(config, rng);
      for (int t = 0; t < lifetime; ++t)
        prefix[t + 1] = prefix[t] + bandit::pull(task, bandit::Arm::kStochastic, rng);
      for (int n = 0; n <= lifetime; ++n) {
        const bool exploit = posterior_mode(config, n, prefix[n]) > 0.0;
        acc[n].add(exploit ? prefix[lifetime] : prefix[n]);
      }
    }
  });

  BruteForceResult result;
  result.curve.resize(lifetime + 1);
  for (int n = 0; n <= lifetime; ++n) {
    Moments all;
    for (const auto& shard : partial) all.merge(shard[n]);
    result.curve[n] = all.estimate();
  }
  const auto best = std::max_element(result.curve.begin(), result.curve.end(),
                                     [](const McEstimate& a, const McEstimate& b) { return a.mean < b.mean; });
  result.n_star = static_cast<int>(best - result.curve.begin());
  result.value = best->mean;
  return result;
}

}  // namespace metabandit::oracle
