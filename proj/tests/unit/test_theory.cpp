#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "metabandit/errors.hpp"
#include "metabandit/oracle.hpp"
#include "metabandit/rng.hpp"
#include "metabandit/theory.hpp"

using namespace metabandit;
using bandit::BanditConfig;

namespace {

// Phi(x) = 1/2 + pdf(x) * sum_k x^(2k+1) / (2k+1)!!, summed in long double.
double reference_cdf(double xd) {
  const long double x = xd;
  long double term = x, sum = x;
  for (int k = 1; k < 2000; ++k) {
    term *= x * x / (2 * k + 1);
    sum += term;
    if (std::fabs(term) < 1e-30L * std::fabs(sum)) break;
  }
  const long double pdf = std::exp(-x * x / 2) / std::sqrt(2 * 3.14159265358979323846264338327950288L);
  return static_cast<double>(0.5L + pdf * sum);
}

std::vector<double> log_grid(double lo, double hi, int count) {
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i) g[i] = lo * std::pow(hi / lo, i / double(count - 1));
  return g;
}

}  // namespace

TEST_CASE("map estimate examples") {
  CHECK(theory::map_estimate(1, 3.0, BanditConfig{1.0, 1.0, 10, -1.0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(theory::map_estimate(1000000, 0.7, BanditConfig{1.0, 1.0, 10, -1.0}) - 0.7) < 1e-5);
  // Precisions 4 (prior) and 0.25 (likelihood): (-4 + 4 * 0.25 * 0.5) / 5.
  CHECK(theory::map_estimate(4, 0.5, BanditConfig{0.5, 2.0, 10, -1.0}) == doctest::Approx(-0.7).epsilon(1e-14));
  CHECK_THROWS_AS(theory::map_estimate(0, 0.5, BanditConfig{}), DomainError);
  CHECK(theory::map_estimate(3, 9.0, BanditConfig{0.0, 1.0, 10, -1.0}) == -1.0);
}

TEST_CASE("precisions") {
  auto p = theory::precisions(7, BanditConfig{0.5, 2.0, 10, -1.0});
  CHECK(p.prior == 4.0);
  CHECK(p.likelihood == 0.25);
  CHECK(p.total == p.prior + 7 * p.likelihood);
  CHECK_FALSE(p.degenerate);
  CHECK(theory::precisions(7, BanditConfig{0.0, 2.0, 10, -1.0}).degenerate);
}

TEST_CASE("normal cdf accuracy") {
  CHECK(theory::std_normal_cdf(0.0) == 0.5);
  CHECK(std::abs(theory::std_normal_cdf(1.959963985) - 0.975) < 1e-9);
  for (double x : {0.5, 1.0, 3.0})
    CHECK(std::abs(theory::std_normal_cdf(-x) - (1.0 - theory::std_normal_cdf(x))) < 1e-15);
  double worst = 0.0;
  for (int i = -1600; i <= 1600; ++i) {
    const double x = i / 200.0;
    worst = std::max(worst, std::abs(theory::std_normal_cdf(x) - reference_cdf(x)));
  }
  CHECK(worst <= 1e-12);
  CHECK(theory::std_normal_cdf(9.0) == 1.0);
  CHECK(theory::std_normal_cdf(-9.0) == 0.0);
  CHECK_THROWS_AS(theory::std_normal_cdf(std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST_CASE("prob_exploit limits") {
  BanditConfig c{1.0, 2.0, 100, -1.0};
  const int n = 6;
  const double mu = (1.0 / (c.sigma_p * c.sigma_p)) / (n / (c.sigma_l * c.sigma_l));
  CHECK(theory::prob_exploit(n, mu, c) == doctest::Approx(0.5).epsilon(1e-14));

  BanditConfig flat{1e6, 1.5, 100, -1.0};
  for (double m : {-0.4, 0.1, 0.8})
    CHECK(std::abs(theory::prob_exploit(5, m, flat) - reference_cdf(m * std::sqrt(5.0) / 1.5)) < 1e-6);
}

TEST_CASE("prob_exploit matches simulated estimates") {
  BanditConfig c{1.0, 1.0, 100, -1.0};
  const int n = 10;
  const double mu = 0.5;
  Rng rng(2024);
  const int draws = 1000000;
  int hits = 0;
  for (int i = 0; i < draws; ++i) {
    const double r_bar = mu + rng.normal() / std::sqrt(double(n));
    const double est = (-1.0 + n * r_bar) / (1.0 + n);
    hits += est > 0.0;
  }
  const double p = theory::prob_exploit(n, mu, c);
  const double freq = hits / double(draws);
  CHECK(std::abs(freq - p) <= 3.0 * std::sqrt(p * (1 - p) / draws));
}

TEST_CASE("sampling law versus posterior-variance flag") {
  // One pull with unit precisions: the sampling spread is 1/2, the posterior
  // expression gives 1/sqrt(2). Simulation sides with the sampling law.
  BanditConfig c{1.0, 1.0, 100, -1.0};
  const double mu = 1.6;
  Rng rng(77);
  const int draws = 1000000;
  int hits = 0;
  for (int i = 0; i < draws; ++i) hits += (-1.0 + (mu + rng.normal())) / 2.0 > 0.0;
  const double freq = hits / double(draws);
  const double sampling = theory::prob_exploit(1, mu, c, theory::VarianceModel::kSampling);
  const double posterior = theory::prob_exploit(1, mu, c, theory::VarianceModel::kPosterior);
  const double se = std::sqrt(sampling * (1 - sampling) / draws);
  CHECK(std::abs(freq - sampling) <= 3.0 * se);
  CHECK(std::abs(freq - posterior) > 10.0 * se);
  CHECK(posterior == doctest::Approx(reference_cdf(0.3 * std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("expected return boundaries") {
  BanditConfig c{2.0, 1.0, 100, -1.0};
  CHECK(theory::expected_return(0, c) == 0.0);
  CHECK(theory::expected_return(100, c) == doctest::Approx(-100.0).epsilon(1e-14));
  CHECK_THROWS_AS(theory::expected_return(101, c), DomainError);
  CHECK_THROWS_AS(theory::expected_return(-1, c), DomainError);
}

TEST_CASE("expected return agrees with the Monte-Carlo oracle") {
  struct Point {
    double sigma_l, sigma_p;
    int lifetime, n;
  };
  for (Point p : {Point{1.0, 2.0, 100, 10}, Point{0.1, 2.0, 30, 1}, Point{3.0, 0.5, 30, 4}}) {
    BanditConfig c{p.sigma_p, p.sigma_l, p.lifetime, -1.0};
    const auto mc = oracle::simulate_policy(c, p.n, 1000000, 17);
    const double th = theory::expected_return(p.n, c);
    INFO("sigma_l=" << p.sigma_l << " sigma_p=" << p.sigma_p << " n=" << p.n << " theory=" << th
                    << " mc=" << mc.mean << " se=" << mc.std_error);
    CHECK(std::abs(th - mc.mean) <= 3.0 * mc.std_error);
  }
}

TEST_CASE("Gauss-Hermite integration converges to the closed form") {
  theory::TheoryOptions gh;
  gh.integration = theory::Integration::kGaussHermite;
  gh.quad_nodes = 1000;
  for (auto c : {BanditConfig{2.0, 1.0, 100, -1.0}, BanditConfig{1.0, 3.0, 100, -1.0}, BanditConfig{0.5, 0.5, 50, -1.0}})
    for (int n : {1, 5, 20})
      CHECK(theory::expected_return(n, c, gh) == doctest::Approx(theory::expected_return(n, c)).epsilon(1e-8));
}

TEST_CASE("default integration is insensitive to doubling quad_nodes") {
  const auto grid = log_grid(0.1, 10.0, 20);
  theory::TheoryOptions base, doubled;
  doubled.quad_nodes = 2 * base.quad_nodes;
  double worst = 0.0;
  for (double sl : grid)
    for (double sp : grid) {
      BanditConfig c{sp, sl, 100, -1.0};
      for (int n : {1, 3, 10, 30, 99})
        worst = std::max(worst, std::abs(theory::expected_return(n, c, base) - theory::expected_return(n, c, doubled)));
    }
  CHECK(worst < 1e-8);
}

TEST_CASE("optimal exploration result shape") {
  BanditConfig c{1.0, 1.0, 40, -1.0};
  auto r = theory::optimal_exploration(c);
  REQUIRE(r.values.size() == 41);
  CHECK(r.values[0] == 0.0);
  const auto it = std::max_element(r.values.begin(), r.values.end());
  CHECK(r.v_star == *it);
  CHECK(r.n_star == it - r.values.begin());
  for (int n = 0; n < r.n_star; ++n) CHECK(r.values[n] < r.v_star);
}

TEST_CASE("degenerate prior never explores") {
  auto r = theory::optimal_exploration(BanditConfig{0.0, 1.0, 100, -1.0});
  CHECK(r.n_star == 0);
  CHECK(r.v_star == 0.0);
}

TEST_CASE("learning and non-learning regimes agree with brute force") {
  BanditConfig learn{2.0, 0.1, 100, -1.0};
  auto th = theory::optimal_exploration(learn);
  CHECK(th.n_star >= 1);
  auto bf = oracle::brute_force_nstar(learn, 100000, 5);
  CHECK(bf.n_star >= 1);
  CHECK(std::abs(bf.n_star - th.n_star) <= 2);
  CHECK(std::abs(bf.curve[th.n_star].mean - th.v_star) <= 3.0 * bf.curve[th.n_star].std_error);

  BanditConfig hard{0.2, 10.0, 10, -1.0};
  CHECK(theory::optimal_exploration(hard).n_star == 0);
  CHECK(oracle::brute_force_nstar(hard, 100000, 6).n_star == 0);
}

TEST_CASE("rescaling reward units rescales values and keeps n*") {
  for (double c : {0.5, 3.0}) {
    BanditConfig a{1.3, 0.7, 60, -1.0};
    BanditConfig b{1.3 * c, 0.7 * c, 60, -1.0 * c};
    auto ra = theory::optimal_exploration(a);
    auto rb = theory::optimal_exploration(b);
    CHECK(ra.n_star == rb.n_star);
    for (int n = 0; n <= 60; ++n) CHECK(rb.values[n] == doctest::Approx(c * ra.values[n]).epsilon(1e-10));
  }
}

TEST_CASE("phase diagram examples") {
  auto one = theory::phase_diagram({2.0}, {0.0}, 100);
  REQUIRE(one.n_star.size() == 1);
  CHECK(one.n_star[0] == 0);

  const auto grid = log_grid(0.1, 10.0, 20);
  auto d100 = theory::phase_diagram(grid, grid, 100);
  auto d200 = theory::phase_diagram(grid, grid, 200);
  auto d10 = theory::phase_diagram(grid, grid, 10);
  REQUIRE(d100.n_star.size() == 400);
  const auto learners = std::count_if(d100.n_star.begin(), d100.n_star.end(), [](int n) { return n > 0; });
  CHECK(learners > 0);
  CHECK(learners < 400);
  for (std::size_t k = 0; k < 400; ++k) {
    if (d10.n_star[k] > 0) CHECK(d100.n_star[k] > 0);
    if (d100.n_star[k] > 0) CHECK(d200.n_star[k] > 0);
    CHECK(d100.v_star[k] >= 0.0);
  }
  for (int i = 0; i < 20; i += 7)
    for (int j = 0; j < 20; j += 5)
      CHECK(d100.n_star_at(i, j) == theory::optimal_exploration(BanditConfig{grid[j], grid[i], 100, -1.0}).n_star);
}

TEST_CASE("phase diagram rejects bad grids") {
  CHECK_THROWS_AS(theory::phase_diagram({}, {1.0}, 10), ConfigError);
  CHECK_THROWS_AS(theory::phase_diagram({2.0, 1.0}, {1.0}, 10), ConfigError);
}
