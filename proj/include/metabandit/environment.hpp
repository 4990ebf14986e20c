#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>
#include <variant>

#include "metabandit/bandit.hpp"
#include "metabandit/gridworld.hpp"
#include "metabandit/rng.hpp"

namespace metabandit::metarl {

/// Task distribution an agent is meta-trained on.
using EnvSpec = std::variant<bandit::BanditConfig, gridworld::GridConfig>;

int lifetime(const EnvSpec& spec);
EnvSpec with_lifetime(EnvSpec spec, int lifetime);
int action_dim(const EnvSpec& spec);
int input_dim(const EnvSpec& spec);
bool is_bandit(const EnvSpec& spec);

/// One sampled task being played for a single lifetime.
class Episode {
 public:
  virtual ~Episode() = default;

  /// Network input for step t given the previous action (-1 at t = 0) and reward.
  virtual void observe(int t, int a_prev, double r_prev, Eigen::Ref<Eigen::VectorXd> out) const = 0;
  virtual double step(int action, Rng& rng) = 0;

  /// Grid: agent cell index before the latest observe(); -1 for bandits.
  virtual int position() const { return -1; }
  /// Grid: goal reached by the latest step(), -1 otherwise.
  virtual int last_goal() const { return -1; }
  /// Bandit: mean of the stochastic arm; NaN for grids.
  virtual double task_mean() const;
  /// Grid: cell indices of the small, medium and high goals; empty for bandits.
  virtual std::vector<int> goal_cells() const { return {}; }
};

/// Samples a task from `spec` with `rng` and returns the playable episode.
std::unique_ptr<Episode> make_episode(const EnvSpec& spec, Rng& rng);

}  // namespace metabandit::metarl
