#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "metabandit/errors.hpp"
#include "metabandit/oracle.hpp"

using namespace metabandit;
using bandit::BanditConfig;

TEST_CASE("never exploring returns exactly zero") {
  auto e = oracle::simulate_policy(BanditConfig{2.0, 1.0, 50, -1.0}, 0, 1000, 1);
  CHECK(e.mean == 0.0);
  CHECK(e.std_error == 0.0);
  CHECK(e.episodes == 1000);
}

TEST_CASE("exploring the whole lifetime costs the prior mean per pull") {
  auto e = oracle::simulate_policy(BanditConfig{1.0, 1.0, 100, -1.0}, 100, 100000, 2);
  CHECK(std::abs(e.mean + 100.0) <= 3.0 * e.std_error);
}

TEST_CASE("out of range exploration counts throw") {
  CHECK_THROWS_AS(oracle::simulate_policy(BanditConfig{1.0, 1.0, 10, -1.0}, 11, 10, 1), DomainError);
  CHECK_THROWS_AS(oracle::simulate_policy(BanditConfig{1.0, 1.0, 10, -1.0}, -1, 10, 1), DomainError);
}

TEST_CASE("standard error halves when episodes quadruple") {
  BanditConfig c{2.0, 1.0, 100, -1.0};
  const auto a = oracle::simulate_policy(c, 10, 50000, 3);
  const auto b = oracle::simulate_policy(c, 10, 200000, 4);
  CHECK(std::abs(a.std_error / b.std_error - 2.0) < 0.4);
}

TEST_CASE("estimates do not depend on the thread count") {
  BanditConfig c{2.0, 1.0, 30, -1.0};
  const char* old = std::getenv("METABANDIT_THREADS");
  const std::string saved = old ? old : "";
  setenv("METABANDIT_THREADS", "1", 1);
  const auto one = oracle::simulate_policy(c, 5, 200000, 9);
  setenv("METABANDIT_THREADS", "4", 1);
  const auto four = oracle::simulate_policy(c, 5, 200000, 9);
  if (old) setenv("METABANDIT_THREADS", saved.c_str(), 1); else unsetenv("METABANDIT_THREADS");
  CHECK(one.mean == four.mean);
  CHECK(one.std_error == four.std_error);
}

TEST_CASE("brute force on a certain prior picks zero") {
  auto r = oracle::brute_force_nstar(BanditConfig{0.0, 1.0, 20, -1.0}, 1000, 3);
  CHECK(r.n_star == 0);
  REQUIRE(r.curve.size() == 21);
  CHECK(r.curve[0].mean == 0.0);
}

TEST_CASE("brute force curve matches direct simulation in expectation") {
  BanditConfig c{1.5, 1.0, 40, -1.0};
  auto r = oracle::brute_force_nstar(c, 100000, 8);
  for (int n : {1, 5, 20}) {
    const auto direct = oracle::simulate_policy(c, n, 100000, 100 + n);
    const double se = std::hypot(direct.std_error, r.curve[n].std_error);
    CHECK(std::abs(direct.mean - r.curve[n].mean) <= 4.0 * se);
  }
  CHECK(r.value == r.curve[r.n_star].mean);
}
