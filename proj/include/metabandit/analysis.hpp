#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "metabandit/metarl.hpp"

namespace metabandit::analysis {

/// Rows are time steps (possibly pooled over episodes), columns hidden units.
/// episode_ids has one entry per row and is carried along for plotting.
struct HiddenMatrix {
  Eigen::MatrixXd values;
  std::vector<int> episode_ids;
  std::vector<int> steps;
};

/// Concatenates h_t (after each step) of every trace row-wise.
HiddenMatrix pool_hidden(std::span<const metarl::EpisodeTrace> traces);

struct PcaResult {
  Eigen::MatrixXd components;       ///< cols x k, one principal axis per column
  Eigen::VectorXd explained_ratio;  ///< all cols components, descending, sums to 1
  Eigen::VectorXd eigenvalues;      ///< covariance eigenvalues, descending
  Eigen::MatrixXd projected;        ///< rows x k
  Eigen::VectorXd mean;
  bool degenerate = false;          ///< zero total variance; ratios are all 0
};

/// Mean-centred PCA from the eigendecomposition of the (n-1)-normalised
/// covariance. Each component's largest-magnitude entry is made positive.
PcaResult pca(const Eigen::Ref<const Eigen::MatrixXd>& data, int k);

struct ParticipationRatio {
  double value = 0.0;
  bool degenerate = false;
};

/// (sum lambda)^2 / sum lambda^2 over covariance eigenvalues.
ParticipationRatio participation_ratio(const Eigen::Ref<const Eigen::MatrixXd>& data);
ParticipationRatio participation_ratio_from_eigenvalues(const Eigen::Ref<const Eigen::VectorXd>& eigenvalues);

struct OccupancyMap {
  int width = 0;
  int height = 0;
  std::vector<double> counts;  ///< index y * width + x
  bool normalized = false;

  double at(int x, int y) const { return counts[static_cast<std::size_t>(y) * width + x]; }
  /// Cells whose normalised mass exceeds `threshold`.
  int support(double threshold) const;
};

/// Visit counts of the agent's cell at every step of every grid trace.
OccupancyMap occupancy(std::span<const metarl::EpisodeTrace> traces, int width, int height,
                       bool normalize = false);

/// Share of goal touches per goal type (small, medium, high) over all traces.
std::vector<double> goal_visit_shares(std::span<const metarl::EpisodeTrace> traces);

/// Per-step softmax entropy in nats recomputed from the stored logits.
std::vector<double> entropy_trace(const metarl::EpisodeTrace& trace);

struct Histogram {
  std::vector<double> edges;
  std::vector<long long> counts;  ///< bin k is [edges[k], edges[k+1]); the last bin also holds edges.back()
  double min = 0.0;
  double max = 0.0;
  double fraction_below = 0.0;  ///< share of values < low threshold
  double fraction_above = 0.0;  ///< share of values > high threshold
};

Histogram histogram(std::span<const double> values, std::span<const double> edges, double low_threshold,
                    double high_threshold);

}  // namespace metabandit::analysis
