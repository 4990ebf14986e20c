#include "metabandit/gridworld.hpp"

#include <algorithm>
#include <string>

#include "metabandit/errors.hpp"
#include "metabandit/metarl_encoding.hpp"

namespace metabandit::gridworld {

GridConfig GridConfig::defaults() {
  GridConfig c;
  c.medium_support = {{2, 2}, {3, 2}, {4, 2}, {2, 3}, {2, 4}};
  for (int x = 0; x < c.width; ++x) c.high_support.push_back({x, c.height - 1});
  for (int y = 0; y < c.height - 1; ++y) c.high_support.push_back({c.width - 1, y});
  return c;
}

double GridConfig::reward(Goal g) const {
  switch (g) {
    case Goal::kSmall: return reward_small;
    case Goal::kMedium: return reward_medium;
    case Goal::kHigh: return reward_high;
  }
  return 0.0;
}

void GridConfig::validate() const {
  if (width < 1 || height < 1) throw ConfigError("grid dimensions must be positive");
  if (lifetime < 1) throw ConfigError("grid lifetime must be >= 1");
  if (!(reward_high > reward_medium && reward_medium > reward_small && reward_small > 0.0))
    throw ConfigError("goal rewards must satisfy high > medium > small > 0");
  if (medium_support.empty() || high_support.empty()) throw ConfigError("goal supports must be non-empty");
  auto in_bounds = [&](Cell c) { return contains(c); };
  if (!contains(start) || !contains(small_goal) || !std::all_of(medium_support.begin(), medium_support.end(), in_bounds) ||
      !std::all_of(high_support.begin(), high_support.end(), in_bounds))
    throw ConfigError("grid cells must lie inside the maze");
  if (start == small_goal) throw ConfigError("start and small goal coincide");
  for (Cell c : medium_support)
    if (c == start || c == small_goal) throw ConfigError("medium support overlaps start or small goal");
  for (Cell c : high_support)
    if (c == start || c == small_goal) throw ConfigError("high support overlaps start or small goal");
  // Overlap between the two supports is allowed; sampling redraws the high goal.
  if (high_support.size() == 1 && medium_support.size() == 1 && high_support[0] == medium_support[0])
    throw ConfigError("medium and high supports admit no distinct placement");
}

std::optional<Goal> GridTask::goal_at(Cell c) const {
  if (c == config.small_goal) return Goal::kSmall;
  if (c == medium_goal) return Goal::kMedium;
  if (c == high_goal) return Goal::kHigh;
  return std::nullopt;
}

Cell GridTask::goal_cell(Goal g) const {
  switch (g) {
    case Goal::kSmall: return config.small_goal;
    case Goal::kMedium: return medium_goal;
    case Goal::kHigh: return high_goal;
  }
  return config.small_goal;
}

GridTask sample_layout(const GridConfig& config, Rng& rng) {
  config.validate();
  GridTask task;
  task.config = config;
  task.medium_goal = config.medium_support[rng.below(config.medium_support.size())];
  do {
    task.high_goal = config.high_support[rng.below(config.high_support.size())];
  } while (task.high_goal == task.medium_goal);
  return task;
}

GridState initial_state(const GridTask& task) { return {task.config.start, 0}; }

StepResult step(const GridTask& task, const GridState& state, Action action) {
  const GridConfig& cfg = task.config;
  Cell next = state.cell;
  switch (action) {
    case Action::kUp: ++next.y; break;
    case Action::kDown: --next.y; break;
    case Action::kLeft: --next.x; break;
    case Action::kRight: ++next.x; break;
  }
  if (!cfg.contains(next)) next = state.cell;

  StepResult r;
  r.state.t = state.t + 1;
  r.state.cell = next;
  if (next == state.cell) return r;  // wall bump
  if (auto goal = task.goal_at(next)) {
    r.reached = goal;
    r.reward = cfg.reward(*goal);
    r.state.cell = cfg.start;
  }
  return r;
}

int observation_size(const GridConfig& config) { return config.cell_count() + kNumActions + 2; }

void observe(const GridConfig& config, const GridState& state, int t, int a_prev, double r_prev,
             int lifetime, double* out) {
  const int n = observation_size(config);
  std::fill(out, out + n, 0.0);
  out[config.index(state.cell)] = 1.0;
  if (a_prev >= 0) out[config.cell_count() + a_prev] = 1.0;
  out[n - 2] = r_prev;
  out[n - 1] = metarl::normalized_time(t, lifetime);
}

std::vector<double> observe(const GridConfig& config, const GridState& state, int t, int a_prev,
                            double r_prev, int lifetime) {
  std::vector<double> out(observation_size(config));
  observe(config, state, t, a_prev, r_prev, lifetime, out.data());
  return out;
}

}  // namespace metabandit::gridworld
