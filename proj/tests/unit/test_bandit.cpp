#include <cmath>

#include "doctest.h"
#include "metabandit/bandit.hpp"
#include "metabandit/errors.hpp"
#include "metabandit/rng.hpp"

using namespace metabandit;
using bandit::Arm;
using bandit::BanditConfig;

TEST_CASE("degenerate prior gives the prior mean exactly") {
  BanditConfig c{0.0, 1.0, 10, -1.0};
  Rng rng(3);
  for (int i = 0; i < 10; ++i) CHECK(bandit::sample_task(c, rng).mu == -1.0);
}

TEST_CASE("task means follow the prior") {
  BanditConfig c{2.0, 1.0, 10, -1.0};
  Rng rng(11);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double mu = bandit::sample_task(c, rng).mu;
    sum += mu;
    sq += mu * mu;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean + 1.0) < 3.0 * 2.0 / std::sqrt(n));
  const double var = sq / n - mean * mean;
  CHECK(std::abs(var - 4.0) < 0.1);
}

TEST_CASE("same seed, same task") {
  BanditConfig c{2.0, 1.0, 10, -1.0};
  Rng a(42), b(42);
  CHECK(bandit::sample_task(c, a).mu == bandit::sample_task(c, b).mu);
}

TEST_CASE("invalid configurations are rejected") {
  Rng rng(1);
  CHECK_THROWS_AS(bandit::sample_task(BanditConfig{1.0, 0.0, 10, -1.0}, rng), ConfigError);
  CHECK_THROWS_AS(bandit::sample_task(BanditConfig{1.0, -1.0, 10, -1.0}, rng), ConfigError);
  CHECK_THROWS_AS(bandit::sample_task(BanditConfig{-1.0, 1.0, 10, -1.0}, rng), ConfigError);
  CHECK_THROWS_AS(BanditConfig({1.0, 1.0, 0, -1.0}).validate(), ConfigError);
}

TEST_CASE("deterministic arm pays zero") {
  Rng rng(5);
  bandit::BanditTask task{2.5, BanditConfig{}};
  for (int i = 0; i < 100; ++i) CHECK(bandit::pull(task, Arm::kDeterministic, rng) == 0.0);
}

TEST_CASE("near-noiseless stochastic arm") {
  Rng rng(6);
  bandit::BanditTask task{1.0, BanditConfig{1.0, 1e-4, 100, -1.0}};
  for (int i = 0; i < 100; ++i) CHECK(std::abs(bandit::pull(task, Arm::kStochastic, rng) - 1.0) < 1e-3);
}

TEST_CASE("stochastic arm moments") {
  Rng rng(7);
  bandit::BanditTask task{-1.0, BanditConfig{1.0, 1.0, 100, -1.0}};
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = bandit::pull(task, Arm::kStochastic, rng);
    sum += r;
    sq += r * r;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean + 1.0) < 3.0 / std::sqrt(n));
  // Var of the sample variance of a normal: 2 sigma^4 / n.
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("reward sequences are reproducible") {
  BanditConfig c{1.0, 0.5, 20, -1.0};
  Rng a(99), b(99);
  auto ta = bandit::sample_task(c, a);
  auto tb = bandit::sample_task(c, b);
  REQUIRE(ta.mu == tb.mu);
  for (int i = 0; i < 50; ++i) CHECK(bandit::pull(ta, Arm::kStochastic, a) == bandit::pull(tb, Arm::kStochastic, b));
}
