#pragma once

#include <vector>

#include "metabandit/bandit.hpp"

namespace metabandit::theory {

using bandit::BanditConfig;

/// Prior, likelihood and combined precision after n exploration pulls.
/// sigma_p == 0 is carried as `degenerate` instead of an infinite precision.
struct Precisions {
  double prior = 0.0;
  double likelihood = 0.0;
  double total = 0.0;
  int n = 0;
  bool degenerate = false;
};

Precisions precisions(int n, const BanditConfig& config);

/// Spread of the MAP estimate around its mu-conditional mean.
enum class VarianceModel {
  /// Exact sampling law of the estimate given mu: sqrt(n P_l) / P_tot.
  kSampling,
  /// Posterior-variance expression 1 / sqrt(P_tot), kept for comparison.
  kPosterior,
};

/// How the outer expectation over the prior on mu is evaluated.
enum class Integration {
  /// Bivariate-normal identity E[mu Phi(a + b mu)]; exact up to Phi.
  kClosedForm,
  /// Gauss-Hermite rule with `quad_nodes` nodes over the prior.
  kGaussHermite,
};

inline constexpr int kDefaultQuadNodes = 129;

struct TheoryOptions {
  int quad_nodes = kDefaultQuadNodes;
  Integration integration = Integration::kClosedForm;
  VarianceModel variance = VarianceModel::kSampling;
};

/// Posterior mode of mu after n pulls with sample mean r_bar. n must be >= 1.
double map_estimate(int n, double r_bar, const BanditConfig& config);

/// Standard normal CDF. NaN input throws DomainError.
double std_normal_cdf(double x);
double std_normal_pdf(double x);

/// P(MAP estimate > 0 | mu) after n exploration pulls.
double prob_exploit(int n, double mu, const BanditConfig& config,
                    VarianceModel variance = VarianceModel::kSampling);

/// Expected lifetime return of the explore-n-then-commit policy, 0 <= n <= T.
double expected_return(int n, const BanditConfig& config, const TheoryOptions& options = {});

struct TheoryResult {
  BanditConfig config;
  std::vector<double> values;  ///< indexed by n = 0..T
  int n_star = 0;              ///< smallest maximiser
  double v_star = 0.0;
};

TheoryResult optimal_exploration(const BanditConfig& config, const TheoryOptions& options = {});

struct PhaseDiagram {
  std::vector<double> sigma_l_grid;
  std::vector<double> sigma_p_grid;
  int lifetime = 0;
  double prior_mean = -1.0;
  /// Row-major, rows follow sigma_l, columns follow sigma_p.
  std::vector<int> n_star;
  std::vector<double> v_star;

  int rows() const { return static_cast<int>(sigma_l_grid.size()); }
  int cols() const { return static_cast<int>(sigma_p_grid.size()); }
  int n_star_at(int i, int j) const { return n_star[static_cast<std::size_t>(i) * cols() + j]; }
  double v_star_at(int i, int j) const { return v_star[static_cast<std::size_t>(i) * cols() + j]; }
};

/// Cells are independent and evaluated on the shared worker pool.
PhaseDiagram phase_diagram(const std::vector<double>& sigma_l_grid,
                           const std::vector<double>& sigma_p_grid, int lifetime,
                           const TheoryOptions& options = {}, double prior_mean = -1.0);

}  // namespace metabandit::theory
