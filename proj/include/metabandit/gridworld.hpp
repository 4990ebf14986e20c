#pragma once

#include <array>
#include <optional>
#include <vector>

#include "metabandit/rng.hpp"

namespace metabandit::gridworld {

/// Grid cell; origin (0, 0) is the bottom-left corner, y grows upwards.
struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

enum class Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr int kNumActions = 4;

enum class Goal : int { kSmall = 0, kMedium = 1, kHigh = 2 };
inline constexpr int kNumGoals = 3;

/// Maze ensemble with three goal types. Defaults describe the 6x6 maze:
///   start        (0, 0)
///   small goal   (1, 0), fixed across episodes
///   medium goal  one of (2,2) (3,2) (4,2) (2,3) (2,4)
///   high goal    one of the top row or the rightmost column (11 cells)
struct GridConfig {
  int width = 6;
  int height = 6;
  double reward_small = 1.0;
  double reward_medium = 5.0;
  double reward_high = 10.0;
  Cell start{0, 0};
  Cell small_goal{1, 0};
  std::vector<Cell> medium_support;
  std::vector<Cell> high_support;
  int lifetime = 100;

  static GridConfig defaults();

  int cell_count() const { return width * height; }
  int index(Cell c) const { return c.y * width + c.x; }
  Cell cell(int index) const { return {index % width, index / width}; }
  bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  double reward(Goal g) const;

  /// Throws ConfigError on ordering, bounds or overlap violations.
  void validate() const;
};

/// Goal placement for one episode; fixed for the whole lifetime.
struct GridTask {
  GridConfig config;
  Cell medium_goal;
  Cell high_goal;

  std::optional<Goal> goal_at(Cell c) const;
  Cell goal_cell(Goal g) const;
};

struct GridState {
  Cell cell;
  int t = 0;
};

/// Uniform over each support. If a custom configuration lets the two sampled
/// goals coincide, the high goal is redrawn until they differ.
GridTask sample_layout(const GridConfig& config, Rng& rng);

GridState initial_state(const GridTask& task);

struct StepResult {
  GridState state;
  double reward = 0.0;
  std::optional<Goal> reached;
};

/// Moves are clipped at walls. Entering a goal pays its reward and puts the
/// agent back on the start cell within the same transition.
StepResult step(const GridTask& task, const GridState& state, Action action);

/// Observation length: one-hot cell, one-hot previous action, previous reward, time.
int observation_size(const GridConfig& config);

/// [one-hot cell | one-hot a_prev (zeros if none) | r_prev | phi(t)].
/// Goal positions never appear. a_prev < 0 means "no previous action".
void observe(const GridConfig& config, const GridState& state, int t, int a_prev, double r_prev,
             int lifetime, double* out);
std::vector<double> observe(const GridConfig& config, const GridState& state, int t, int a_prev,
                            double r_prev, int lifetime);

}  // namespace metabandit::gridworld
