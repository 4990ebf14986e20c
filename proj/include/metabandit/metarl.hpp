#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metabandit/environment.hpp"
#include "metabandit/metarl_encoding.hpp"
#include "metabandit/nn.hpp"

namespace metabandit::metarl {

/// [one-hot(a_prev) | phi(t) | r_prev]; a_prev < 0 (episode start) gives a zero block.
Eigen::VectorXd encode_input(int a_prev, int t, double r_prev, int lifetime, int action_dim);

/// R_t = sum_{i=0}^{T-t-1} gamma^i r_{t+i}; no bootstrap past the last step.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

enum class ScheduleShape { kLinear, kExponential };

/// Coefficient annealed from `start` to `end` over `anneal_episodes`, then held.
/// Exponential schedules interpolate 1 - value geometrically (used for gamma).
struct Schedule {
  double start = 0.0;
  double end = 0.0;
  long long anneal_episodes = 0;
  ScheduleShape shape = ScheduleShape::kLinear;

  static Schedule constant(double v) { return {v, v, 0, ScheduleShape::kLinear}; }
};

double anneal(const Schedule& schedule, long long episode);

/// One lifetime of interaction with everything needed for the loss and analysis.
struct EpisodeTrace {
  nn::ForwardTrace forward;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> entropies;
  std::vector<int> positions;  ///< grid cell before each step (-1 for bandits)
  std::vector<int> goals;      ///< goal reached by each step, -1 if none
  std::vector<int> goal_cells; ///< grid layout (small, medium, high cell indices)
  double task_mean = 0.0;      ///< bandit mu
  double episode_return = 0.0;

  int length() const { return static_cast<int>(actions.size()); }
};

struct RolloutOptions {
  bool greedy = false;  ///< argmax instead of sampling from the policy
};

/// Plays one freshly sampled task from `spec`, starting at the learned (h0, c0).
/// Task sampling, action sampling and reward noise all draw from `rng`.
EpisodeTrace rollout_episode(const nn::NetParams& params, const EnvSpec& spec, Rng& rng,
                             const RolloutOptions& options = {});

struct A2cLoss {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  Eigen::MatrixXd dlogits;  ///< A x T
  Eigen::VectorXd dvalues;  ///< T
};

/// L = L_pi + beta_v L_v - beta_e L_e with per-step means; the advantage
/// R_t - V_t is a constant inside L_pi.
A2cLoss a2c_loss(const EpisodeTrace& trace, double gamma, double beta_v, double beta_e);

struct TrainConfig {
  EnvSpec env = bandit::BanditConfig{};
  long long episodes_total = 20000;
  int workers = 2;  ///< episodes per synchronous update; gradients are summed
  int hidden_dim = 48;
  nn::AdamConfig optimizer{1e-3, 0.9, 0.999, 1e-8, 3e-6, 10.0};
  double beta_v = 0.05;
  Schedule entropy{1.0, 0.005, 30000, ScheduleShape::kLinear};
  Schedule discount{0.4, 0.999, 27000, ScheduleShape::kExponential};
  std::uint64_t seed = 0;
  long long checkpoint_every = 0;  ///< in episodes; 0 disables periodic checkpoints
  std::filesystem::path run_dir;   ///< empty: keep everything in memory

  /// Full-scale bandit hyperparameters: 30k episodes, T = 100, 2 workers.
  static TrainConfig bandit_full(double sigma_l, double sigma_p, int lifetime = 100);
  /// Desk-scale bandit run: T = 30, 20k episodes, annealing compressed to match.
  static TrainConfig bandit_desk(double sigma_l, double sigma_p, int lifetime = 30);
  /// Desk-scale gridworld run: 50k episodes, 64 hidden units.
  static TrainConfig grid_desk(int lifetime);

  void validate() const;
};

struct MetricsRow {
  long long update = 0;
  long long episodes_seen = 0;
  double mean_return = 0.0;
  double loss_pi = 0.0;
  double loss_v = 0.0;
  double loss_e = 0.0;
  double beta_e = 0.0;
  double gamma = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  nn::NetParams params;
  nn::OptimizerState optimizer;
  std::vector<MetricsRow> metrics;
  long long episodes_seen = 0;
  long long updates = 0;
  std::vector<std::filesystem::path> checkpoints;
};

/// Where a resumed run picks up.
struct ResumeState {
  nn::NetParams params;
  nn::OptimizerState optimizer;
  long long episodes_seen = 0;
  long long updates = 0;
};

/// Called after every update with the row just appended.
using ProgressFn = std::function<void(const MetricsRow&)>;

/// Synchronous A2C meta-training. Episode k of the run draws from
/// Rng(derive_seed(seed, kTrainEpisode, k)); initial weights from
/// Rng(derive_seed(seed, kInit, 0)). On a non-finite loss the last good state
/// is checkpointed (when run_dir is set) and TrainingError is rethrown.
TrainResult train(const TrainConfig& config, const std::optional<ResumeState>& resume = std::nullopt,
                  const ProgressFn& progress = {});

nn::NetParams initial_params(const TrainConfig& config);

struct EvalStats {
  double mean_return = 0.0;
  double return_se = 0.0;
  double mean_pulls = 0.0;  ///< stochastic-arm pulls per episode (bandits)
  double pulls_se = 0.0;
  long long episodes = 0;
};

/// Episode e uses Rng(derive_seed(seed, kEval, e)).
EvalStats evaluate(const nn::NetParams& params, const EnvSpec& spec, long long episodes, std::uint64_t seed,
                   const RolloutOptions& options = {});

/// Hold-out bandits with sigma_p = 0: every stochastic pull is exploration.
EvalStats eval_exploration(const nn::NetParams& params, double sigma_l, int lifetime, long long episodes,
                           std::uint64_t seed, const RolloutOptions& options = {});

struct NormalizedReturn {
  double value = 0.0;  ///< mean return / T_test
  double se = 0.0;
};

/// Evaluates on the training distribution with the lifetime (and the timestamp
/// normalisation) replaced by `test_lifetime`.
NormalizedReturn lifetime_generalization(const nn::NetParams& params, const EnvSpec& train_spec,
                                         int test_lifetime, long long episodes, std::uint64_t seed);

/// Seed s of the study trains with seed derive_seed(base.seed, kBimodalitySeed, s).
std::uint64_t bimodality_seed(std::uint64_t base_seed, int index);

/// Trains `seeds` independent networks on a bandit config and returns each
/// network's mean hold-out exploration count.
std::vector<double> bimodality_study(const TrainConfig& base, int seeds, long long eval_episodes,
                                     std::uint64_t eval_seed);

}  // namespace metabandit::metarl
