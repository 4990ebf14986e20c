#include "metabandit/environment.hpp"

#include <limits>
#include <string>

#include "metabandit/errors.hpp"
#include "metabandit/metarl.hpp"

namespace metabandit::metarl {
namespace {

class BanditEpisode final : public Episode {
 public:
  explicit BanditEpisode(bandit::BanditTask task) : task_(std::move(task)) {}

  void observe(int t, int a_prev, double r_prev, Eigen::Ref<Eigen::VectorXd> out) const override {
    out = encode_input(a_prev, t, r_prev, task_.config.lifetime, bandit::kNumArms);
  }

  double step(int action, Rng& rng) override {
    if (action < 0 || action >= bandit::kNumArms) throw ContractError("bandit action out of range");
    return bandit::pull(task_, static_cast<bandit::Arm>(action), rng);
  }

  double task_mean() const override { return task_.mu; }

 private:
  bandit::BanditTask task_;
};

class GridEpisode final : public Episode {
 public:
  explicit GridEpisode(gridworld::GridTask task) : task_(std::move(task)), state_(gridworld::initial_state(task_)) {}

  void observe(int t, int a_prev, double r_prev, Eigen::Ref<Eigen::VectorXd> out) const override {
    gridworld::observe(task_.config, state_, t, a_prev, r_prev, task_.config.lifetime, out.data());
  }

  double step(int action, Rng&) override {
    if (action < 0 || action >= gridworld::kNumActions) throw ContractError("grid action out of range");
    const auto r = gridworld::step(task_, state_, static_cast<gridworld::Action>(action));
    state_ = r.state;
    last_goal_ = r.reached ? static_cast<int>(*r.reached) : -1;
    return r.reward;
  }

  int position() const override { return task_.config.index(state_.cell); }
  int last_goal() const override { return last_goal_; }
  std::vector<int> goal_cells() const override {
    const auto& c = task_.config;
    return {c.index(c.small_goal), c.index(task_.medium_goal), c.index(task_.high_goal)};
  }

 private:
  gridworld::GridTask task_;
  gridworld::GridState state_;
  int last_goal_ = -1;
};

}  // namespace

double Episode::task_mean() const { return std::numeric_limits<double>::quiet_NaN(); }

int lifetime(const EnvSpec& spec) {
  return std::visit([](const auto& c) { return c.lifetime; }, spec);
}

EnvSpec with_lifetime(EnvSpec spec, int lifetime) {
  std::visit([&](auto& c) { c.lifetime = lifetime; }, spec);
  return spec;
}

bool is_bandit(const EnvSpec& spec) { return std::holds_alternative<bandit::BanditConfig>(spec); }

int action_dim(const EnvSpec& spec) {
  return is_bandit(spec) ? bandit::kNumArms : gridworld::kNumActions;
}

int input_dim(const EnvSpec& spec) {
  if (is_bandit(spec)) return bandit::kNumArms + 2;
  return gridworld::observation_size(std::get<gridworld::GridConfig>(spec));
}

std::unique_ptr<Episode> make_episode(const EnvSpec& spec, Rng& rng) {
  if (const auto* b = std::get_if<bandit::BanditConfig>(&spec))
    return std::make_unique<BanditEpisode>(bandit::sample_task(*b, rng));
  return std::make_unique<GridEpisode>(gridworld::sample_layout(std::get<gridworld::GridConfig>(spec), rng));
}

}  // namespace metabandit::metarl
