#include "metabandit/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metabandit/errors.hpp"
#include "metabandit/parallel.hpp"
#include "metabandit/quadrature.hpp"

namespace metabandit::theory {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Phi(m(mu) / s) with m(mu) = (mu0 P_p + n P_l mu) / P_tot, written as Phi(a + b mu).
struct ExploitProbit {
  double a = 0.0;
  double b = 0.0;
};

ExploitProbit exploit_probit(const Precisions& prec, double prior_mean, VarianceModel variance) {
  const double spread = variance == VarianceModel::kSampling
                            ? std::sqrt(prec.n * prec.likelihood) / prec.total
                            : 1.0 / std::sqrt(prec.total);
  return {prior_mean * prec.prior / (prec.total * spread),
          prec.n * prec.likelihood / (prec.total * spread)};
}

// E[mu Phi(a + b mu)] for mu ~ N(m, s^2), by Stein's identity.
double mean_times_probit(double m, double s, ExploitProbit p) {
  const double scale = std::sqrt(1.0 + p.b * p.b * s * s);
  const double kappa = (p.a + p.b * m) / scale;
  return m * std_normal_cdf(kappa) + s * s * p.b * std_normal_pdf(kappa) / scale;
}

}  // namespace

Precisions precisions(int n, const BanditConfig& config) {
  config.validate();
  if (n < 0) throw DomainError("exploration count must be >= 0");
  Precisions p;
  p.n = n;
  p.likelihood = 1.0 / (config.sigma_l * config.sigma_l);
  if (config.sigma_p == 0.0) {
    p.degenerate = true;
    return p;
  }
  p.prior = 1.0 / (config.sigma_p * config.sigma_p);
  p.total = p.prior + n * p.likelihood;
  return p;
}

double map_estimate(int n, double r_bar, const BanditConfig& config) {
  if (n < 1) throw DomainError("map_estimate needs n >= 1; use the prior mean for n = 0");
  const Precisions p = precisions(n, config);
  if (p.degenerate) return config.prior_mean;
  return (config.prior_mean * p.prior + n * p.likelihood * r_bar) / p.total;
}

double std_normal_cdf(double x) {
  if (std::isnan(x)) throw DomainError("std_normal_cdf of NaN");
  if (x > 8.0) return 1.0;
  if (x < -8.0) return 0.0;
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double prob_exploit(int n, double mu, const BanditConfig& config, VarianceModel variance) {
  if (n < 1) throw DomainError("prob_exploit needs n >= 1");
  const Precisions p = precisions(n, config);
  if (p.degenerate) return config.prior_mean > 0.0 ? 1.0 : 0.0;
  const ExploitProbit probit = exploit_probit(p, config.prior_mean, variance);
  return std_normal_cdf(probit.a + probit.b * mu);
}

double expected_return(int n, const BanditConfig& config, const TheoryOptions& options) {
  config.validate();
  const int lifetime = config.lifetime;
  if (n < 0 || n > lifetime)
    throw DomainError("exploration count " + std::to_string(n) + " outside [0, " +
                      std::to_string(lifetime) + "]");
  // Never exploring: the prior mode is the prior mean and only the
  // deterministic arm is pulled when it is below zero.
  if (n == 0) return config.prior_mean > 0.0 ? lifetime * config.prior_mean : 0.0;

  const double explore = n * config.prior_mean;
  const int remaining = lifetime - n;
  if (remaining == 0) return explore;

  const Precisions p = precisions(n, config);
  if (p.degenerate)
    return explore + (config.prior_mean > 0.0 ? remaining * config.prior_mean : 0.0);

  const ExploitProbit probit = exploit_probit(p, config.prior_mean, options.variance);
  double exploit = 0.0;
  if (options.integration == Integration::kClosedForm) {
    exploit = mean_times_probit(config.prior_mean, config.sigma_p, probit);
  } else {
    exploit = gaussian_expectation(
        [&](double mu) { return mu * std_normal_cdf(probit.a + probit.b * mu); },
        config.prior_mean, config.sigma_p, options.quad_nodes);
  }
  return explore + remaining * exploit;
}

TheoryResult optimal_exploration(const BanditConfig& config, const TheoryOptions& options) {
  config.validate();
  TheoryResult result;
  result.config = config;
  result.values.resize(static_cast<std::size_t>(config.lifetime) + 1);
  for (int n = 0; n <= config.lifetime; ++n) result.values[n] = expected_return(n, config, options);
  // max_element returns the first maximiser, i.e. the smallest n.
  const auto best = std::max_element(result.values.begin(), result.values.end());
  result.n_star = static_cast<int>(best - result.values.begin());
  result.v_star = *best;
  return result;
}

PhaseDiagram phase_diagram(const std::vector<double>& sigma_l_grid,
                           const std::vector<double>& sigma_p_grid, int lifetime,
                           const TheoryOptions& options, double prior_mean) {
  if (sigma_l_grid.empty() || sigma_p_grid.empty()) throw ConfigError("phase diagram grids must be non-empty");
  if (!std::is_sorted(sigma_l_grid.begin(), sigma_l_grid.end()) ||
      !std::is_sorted(sigma_p_grid.begin(), sigma_p_grid.end()))
    throw ConfigError("phase diagram grids must be ascending");

  PhaseDiagram diagram;
  diagram.sigma_l_grid = sigma_l_grid;
  diagram.sigma_p_grid = sigma_p_grid;
  diagram.lifetime = lifetime;
  diagram.prior_mean = prior_mean;
  const std::size_t cells = sigma_l_grid.size() * sigma_p_grid.size();
  diagram.n_star.assign(cells, 0);
  diagram.v_star.assign(cells, 0.0);

  parallel_for(cells, [&](std::size_t k) {
    BanditConfig config;
    config.sigma_l = sigma_l_grid[k / sigma_p_grid.size()];
    config.sigma_p = sigma_p_grid[k % sigma_p_grid.size()];
    config.lifetime = lifetime;
    config.prior_mean = prior_mean;
    const TheoryResult r = optimal_exploration(config, options);
    diagram.n_star[k] = r.n_star;
    diagram.v_star[k] = r.v_star;
  });
  return diagram;
}

}  // namespace metabandit::theory
