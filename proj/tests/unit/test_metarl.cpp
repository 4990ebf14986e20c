#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "metabandit/checkpoint.hpp"
#include "metabandit/errors.hpp"
#include "metabandit/io.hpp"
#include "metabandit/metarl.hpp"

using namespace metabandit;
using namespace metabandit::metarl;
namespace fs = std::filesystem;

namespace {

nn::NetParams fixed_policy(int arm, int hidden = 4) {
  nn::NetParams p(nn::NetDims{4, hidden, 2});
  p.b_policy()[arm] = 50.0;
  p.b_policy()[1 - arm] = -50.0;
  return p;
}

nn::NetParams random_params(const nn::NetDims& d, Rng& rng, double scale) {
  nn::NetParams p(d);
  for (Eigen::Index i = 0; i < p.flat().size(); ++i) p.flat()[i] = scale * rng.normal();
  return p;
}

// Recomputes the A2C objective for fixed inputs and actions, with the policy
// term's advantage frozen at `frozen_adv`.
double reference_loss(const nn::NetParams& p, const EpisodeTrace& tr, const std::vector<double>& returns,
                      const std::vector<double>& frozen_adv, double beta_v, double beta_e) {
  const int T = tr.length();
  nn::NetState s = nn::initial_state(p);
  double lp = 0, lv = 0, le = 0;
  for (int t = 0; t < T; ++t) {
    const auto out = nn::forward_step(p, s, tr.forward.inputs.col(t));
    s = out.state;
    double zmax = out.logits.maxCoeff(), norm = 0;
    for (int a = 0; a < out.logits.size(); ++a) norm += std::exp(out.logits[a] - zmax);
    double h = 0;
    for (int a = 0; a < out.logits.size(); ++a) {
      const double logp = out.logits[a] - zmax - std::log(norm);
      h -= std::exp(logp) * logp;
    }
    const double logp_a = out.logits[tr.actions[t]] - zmax - std::log(norm);
    lp += -logp_a * frozen_adv[t];
    lv += (returns[t] - out.value) * (returns[t] - out.value);
    le += h;
  }
  return lp / T + beta_v * lv / T - beta_e * le / T;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("metabandit_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("input encoding") {
  const auto x0 = encode_input(-1, 0, 5.0, 10, 2);
  REQUIRE(x0.size() == 4);
  CHECK(x0[0] == 0.0);
  CHECK(x0[1] == 0.0);
  CHECK(x0[2] == -1.0);
  CHECK(x0[3] == 0.0);
  CHECK(encode_input(1, 9, 0.3, 10, 2)[2] == 1.0);
  CHECK(encode_input(1, 4, 0.3, 9, 2)[2] == 0.0);
  CHECK(encode_input(0, 0, 0.0, 1, 2)[2] == -1.0);
  const auto x = encode_input(1, 3, -0.25, 10, 2);
  CHECK(x[1] == 1.0);
  CHECK(x[3] == -0.25);
  CHECK_THROWS_AS(encode_input(0, 10, 0.0, 10, 2), ContractError);
}

TEST_CASE("discounted returns") {
  std::vector<double> r{1.0, 2.0, 4.0};
  CHECK(discounted_returns(r, 0.0) == r);
  CHECK(discounted_returns(std::vector<double>(5, 1.0), 1.0) == std::vector<double>{5, 4, 3, 2, 1});
  CHECK(discounted_returns(r, 0.5) == std::vector<double>{3, 4, 4});
  CHECK_THROWS_AS(discounted_returns(r, 1.5), DomainError);
}

TEST_CASE("annealing schedules") {
  const auto cfg = TrainConfig::bandit_full(1.0, 1.0);
  CHECK(anneal(cfg.entropy, 0) == 1.0);
  CHECK(anneal(cfg.entropy, 30000) == 0.005);
  CHECK(anneal(cfg.entropy, 90000) == 0.005);
  CHECK(anneal(cfg.entropy, 15000) == doctest::Approx(0.5025).epsilon(1e-15));
  CHECK(anneal(cfg.discount, 0) == 0.4);
  CHECK(anneal(cfg.discount, 27000) == 0.999);
  CHECK(anneal(cfg.discount, 40000) == 0.999);
  // Halfway the gap 1 - gamma is the geometric mean of the endpoint gaps.
  CHECK(1.0 - anneal(cfg.discount, 13500) == doctest::Approx(std::sqrt(0.6 * 0.001)).epsilon(1e-12));
  double prev = 0.0;
  for (long long e = 0; e <= 27000; e += 1000) {
    const double g = anneal(cfg.discount, e);
    CHECK(g >= prev);
    prev = g;
  }
  CHECK(anneal(Schedule::constant(0.3), 123) == 0.3);
}

TEST_CASE("a2c loss with a perfect critic") {
  Rng rng(1);
  auto p = random_params({4, 3, 2}, rng, 0.3);
  const bandit::BanditConfig env{1.0, 1.0, 6, -1.0};
  auto tr = rollout_episode(p, env, rng);
  const auto returns = discounted_returns(tr.rewards, 0.9);
  for (int t = 0; t < tr.length(); ++t) tr.forward.values[t] = returns[t];
  const auto loss = a2c_loss(tr, 0.9, 0.05, 0.0);
  CHECK(loss.value == 0.0);
  CHECK(loss.dlogits.cwiseAbs().maxCoeff() == 0.0);
  CHECK(loss.dvalues.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("uniform policy has entropy ln 2") {
  nn::NetParams p(nn::NetDims{4, 3, 2});
  Rng rng(2);
  const auto tr = rollout_episode(p, bandit::BanditConfig{1.0, 1.0, 8, -1.0}, rng);
  CHECK(a2c_loss(tr, 0.9, 0.05, 0.1).entropy == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("full pipeline gradient matches finite differences") {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(900 + seed);
    const int H = 1 + seed % 8;
    const int T = 1 + seed % 10;
    auto p = random_params({4, H, 2}, rng, 0.5);
    const auto tr = rollout_episode(p, bandit::BanditConfig{1.0, 1.0, T, -1.0}, rng);
    const double gamma = 0.8, beta_v = 0.3, beta_e = 0.2;
    const auto loss = a2c_loss(tr, gamma, beta_v, beta_e);
    const auto g = nn::backward(p, tr.forward, loss.dlogits, loss.dvalues);
    const auto returns = discounted_returns(tr.rewards, gamma);
    std::vector<double> adv(T);
    for (int t = 0; t < T; ++t) adv[t] = returns[t] - tr.forward.values[t];
    CHECK(reference_loss(p, tr, returns, adv, beta_v, beta_e) == doctest::Approx(loss.total).epsilon(1e-12));

    double worst = 0.0;
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < p.flat().size(); ++i) {
      const double keep = p.flat()[i];
      p.flat()[i] = keep + h;
      const double up = reference_loss(p, tr, returns, adv, beta_v, beta_e);
      p.flat()[i] = keep - h;
      const double down = reference_loss(p, tr, returns, adv, beta_v, beta_e);
      p.flat()[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - g.flat()[i]) / std::max(1e-2, std::abs(fd) + std::abs(g.flat()[i])));
    }
    INFO("seed " << seed);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("uniform network flips fair coins") {
  nn::NetParams p(nn::NetDims{4, 3, 2});
  Rng rng(3);
  const auto tr = rollout_episode(p, bandit::BanditConfig{1.0, 1.0, 10000, -1.0}, rng);
  int ones = 0;
  for (int a : tr.actions) ones += a;
  CHECK(std::abs(ones / 10000.0 - 0.5) <= 3.0 * std::sqrt(0.25 / 10000));
}

TEST_CASE("rollouts are reproducible") {
  Rng init(4);
  const auto p = random_params({4, 5, 2}, init, 0.3);
  Rng a(10), b(10);
  const auto ta = rollout_episode(p, bandit::BanditConfig{1.0, 1.0, 20, -1.0}, a);
  const auto tb = rollout_episode(p, bandit::BanditConfig{1.0, 1.0, 20, -1.0}, b);
  CHECK(ta.actions == tb.actions);
  CHECK(ta.rewards == tb.rewards);
  CHECK(ta.forward.hidden == tb.forward.hidden);
}

TEST_CASE("hold-out exploration of fixed policies") {
  for (int T : {1, 7, 30}) {
    CHECK(eval_exploration(fixed_policy(0), 1.0, T, 50, 1).mean_pulls == 0.0);
    CHECK(eval_exploration(fixed_policy(1), 1.0, T, 50, 1).mean_pulls == T);
  }
  const auto s = eval_exploration(nn::NetParams(nn::NetDims{4, 3, 2}), 1.0, 30, 1000, 2);
  CHECK(std::abs(s.mean_pulls - 15.0) <= 3.0 * s.pulls_se);
}

TEST_CASE("lifetime generalization") {
  const bandit::BanditConfig train_env{1.0, 1.0, 10, -1.0};
  for (int T : {10, 30, 100}) CHECK(lifetime_generalization(fixed_policy(0), train_env, T, 20, 3).value == 0.0);
  Rng rng(5);
  const auto p = random_params({4, 4, 2}, rng, 0.3);
  const auto g = lifetime_generalization(p, train_env, 10, 200, 9);
  const auto e = evaluate(p, train_env, 200, 9);
  CHECK(g.value == e.mean_return / 10);
  CHECK(g.se == e.return_se / 10);
}

TEST_CASE("training zero episodes returns the initial network") {
  auto cfg = TrainConfig::bandit_desk(1.0, 1.0, 5);
  cfg.episodes_total = 0;
  cfg.seed = 11;
  const auto r = train(cfg);
  CHECK(r.params.flat() == initial_params(cfg).flat());
  CHECK(r.updates == 0);
  CHECK(r.metrics.empty());
}

TEST_CASE("training is deterministic and thread-count independent") {
  auto cfg = TrainConfig::bandit_desk(1.0, 1.0, 8);
  cfg.episodes_total = 60;
  cfg.hidden_dim = 6;
  cfg.seed = 21;
  cfg.workers = 1;
  const auto a = train(cfg);
  const auto b = train(cfg);
  CHECK(a.params.flat() == b.params.flat());
  REQUIRE(a.metrics.size() == 60);
  for (std::size_t i = 0; i < a.metrics.size(); ++i) CHECK(a.metrics[i].mean_return == b.metrics[i].mean_return);

  cfg.workers = 3;
  setenv("METABANDIT_THREADS", "1", 1);
  const auto c = train(cfg);
  setenv("METABANDIT_THREADS", "3", 1);
  const auto d = train(cfg);
  unsetenv("METABANDIT_THREADS");
  CHECK(c.params.flat() == d.params.flat());
  CHECK(c.updates == 20);
}

TEST_CASE("training writes metrics and checkpoints, and resumes exactly") {
  auto cfg = TrainConfig::bandit_desk(1.0, 1.0, 6);
  cfg.episodes_total = 40;
  cfg.hidden_dim = 5;
  cfg.seed = 8;
  cfg.checkpoint_every = 10;
  cfg.run_dir = scratch_dir("resume_full");
  const auto full = train(cfg);
  CHECK(fs::exists(cfg.run_dir / "checkpoints" / "ep_000000000" / "manifest.json"));
  CHECK(fs::exists(cfg.run_dir / "checkpoints" / "ep_000000020"));
  CHECK(fs::exists(cfg.run_dir / "checkpoints" / "final"));
  const auto rows = io::read_metrics(cfg.run_dir / "metrics.csv");
  REQUIRE(rows.size() == 20);
  CHECK(rows.back().episodes_seen == 40);

  // Interrupt after 20 episodes, then resume from that checkpoint.
  auto part = cfg;
  part.run_dir = scratch_dir("resume_part");
  part.episodes_total = 20;
  train(part);
  const auto ck = checkpoint::load(part.run_dir / "checkpoints" / "ep_000000020");
  part.episodes_total = 40;
  const auto resumed = train(part, ResumeState{ck.params, *ck.optimizer, ck.episodes_seen, ck.updates});
  CHECK(resumed.params.flat() == full.params.flat());
  CHECK(io::read_text(part.run_dir / "metrics.csv") == io::read_text(cfg.run_dir / "metrics.csv"));
  fs::remove_all(cfg.run_dir);
  fs::remove_all(part.run_dir);
}

TEST_CASE("bimodality study with one seed") {
  auto cfg = TrainConfig::bandit_desk(1.0, 1.0, 5);
  cfg.episodes_total = 10;
  cfg.hidden_dim = 4;
  const auto pulls = bimodality_study(cfg, 1, 20, 3);
  REQUIRE(pulls.size() == 1);
  CHECK(pulls[0] >= 0.0);
  CHECK(pulls[0] <= 5.0);
}

TEST_CASE("invalid training configs") {
  auto cfg = TrainConfig::bandit_desk(1.0, 1.0);
  cfg.workers = 0;
  CHECK_THROWS_AS(train(cfg), ConfigError);
  cfg = TrainConfig::bandit_desk(1.0, 1.0);
  cfg.discount.end = 1.2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
