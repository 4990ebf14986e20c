#include "metabandit/metarl.hpp"

#include <cmath>
#include <string>

#include "metabandit/checkpoint.hpp"
#include "metabandit/config.hpp"
#include "metabandit/errors.hpp"
#include "metabandit/io.hpp"
#include "metabandit/parallel.hpp"

namespace metabandit::metarl {
namespace fs = std::filesystem;

double normalized_time(int t, int lifetime) {
  if (t < 0 || t >= lifetime)
    throw ContractError("step " + std::to_string(t) + " outside lifetime " + std::to_string(lifetime));
  if (lifetime == 1) return -1.0;
  return 2.0 * t / (lifetime - 1) - 1.0;
}

Eigen::VectorXd encode_input(int a_prev, int t, double r_prev, int lifetime, int action_dim) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(action_dim + 2);
  if (a_prev >= action_dim) throw ContractError("previous action out of range");
  if (a_prev >= 0) x[a_prev] = 1.0;
  x[action_dim] = normalized_time(t, lifetime);
  x[action_dim + 1] = t == 0 ? 0.0 : r_prev;
  return x;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("discount must lie in [0, 1]");
  std::vector<double> out(rewards.size());
  double running = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    running = rewards[k] + gamma * running;
    out[k] = running;
  }
  return out;
}

double anneal(const Schedule& s, long long episode) {
  if (episode < 0) throw DomainError("episode index must be >= 0");
  if (s.anneal_episodes <= 0 || episode >= s.anneal_episodes) return s.end;
  if (episode == 0) return s.start;
  const double frac = static_cast<double>(episode) / static_cast<double>(s.anneal_episodes);
  if (s.shape == ScheduleShape::kLinear) return s.start + (s.end - s.start) * frac;
  const double gap0 = 1.0 - s.start;
  const double gap1 = 1.0 - s.end;
  if (gap0 == 0.0) return s.start;
  return 1.0 - gap0 * std::pow(gap1 / gap0, frac);
}

EpisodeTrace rollout_episode(const nn::NetParams& params, const EnvSpec& spec, Rng& rng,
                             const RolloutOptions& options) {
  const int T = lifetime(spec);
  const int A = action_dim(spec);
  if (params.dims().input_dim != input_dim(spec) || params.dims().action_dim != A)
    throw ContractError("network dims do not match the environment");

  auto episode = make_episode(spec, rng);
  EpisodeTrace trace;
  trace.forward = nn::ForwardTrace(params.dims(), T);
  trace.forward.reset(params);
  trace.actions.reserve(T);
  trace.rewards.reserve(T);
  trace.entropies.reserve(T);
  trace.positions.reserve(T);
  trace.goals.reserve(T);
  trace.task_mean = episode->task_mean();
  trace.goal_cells = episode->goal_cells();

  Eigen::VectorXd x(params.dims().input_dim);
  int a_prev = -1;
  double r_prev = 0.0;
  for (int t = 0; t < T; ++t) {
    episode->observe(t, a_prev, r_prev, x);
    trace.forward.push(params, x);
    const auto pe = nn::softmax_entropy(trace.forward.logits.col(t));

    int action = 0;
    if (options.greedy) {
      pe.probs.maxCoeff(&action);
    } else {
      const double u = rng.uniform();
      double cum = 0.0;
      action = A - 1;
      for (int k = 0; k < A; ++k) {
        cum += pe.probs[k];
        if (u < cum) {
          action = k;
          break;
        }
      }
    }

    trace.positions.push_back(episode->position());
    const double reward = episode->step(action, rng);
    trace.goals.push_back(episode->last_goal());
    trace.actions.push_back(action);
    trace.rewards.push_back(reward);
    trace.entropies.push_back(pe.entropy);
    trace.episode_return += reward;
    a_prev = action;
    r_prev = reward;
  }
  return trace;
}

A2cLoss a2c_loss(const EpisodeTrace& trace, double gamma, double beta_v, double beta_e) {
  const int T = trace.length();
  const auto& fwd = trace.forward;
  const int A = static_cast<int>(fwd.logits.rows());
  A2cLoss loss;
  loss.dlogits = Eigen::MatrixXd::Zero(A, T);
  loss.dvalues = Eigen::VectorXd::Zero(T);
  if (T == 0) return loss;

  const auto returns = discounted_returns(trace.rewards, gamma);
  const double inv_t = 1.0 / T;
  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd z = fwd.logits.col(t);
    const double zmax = z.maxCoeff();
    const Eigen::ArrayXd shifted = z.array() - zmax;
    const double log_norm = std::log(shifted.exp().sum());
    const Eigen::ArrayXd log_p = shifted - log_norm;
    const Eigen::ArrayXd p = log_p.exp();
    const double entropy = -(p * log_p).sum();
    const double advantage = returns[t] - fwd.values[t];
    const int a = trace.actions[t];

    loss.policy -= log_p[a] * advantage * inv_t;
    loss.value += advantage * advantage * inv_t;
    loss.entropy += entropy * inv_t;

    // d(-log p_a)/dz = p - e_a;  dH/dz = -p (log p + H).
    Eigen::ArrayXd g = advantage * p;
    g[a] -= advantage;
    g += beta_e * p * (log_p + entropy);
    loss.dlogits.col(t) = (g * inv_t).matrix();
    loss.dvalues[t] = -2.0 * beta_v * advantage * inv_t;
  }
  loss.total = loss.policy + beta_v * loss.value - beta_e * loss.entropy;
  return loss;
}

TrainConfig TrainConfig::bandit_full(double sigma_l, double sigma_p, int lifetime) {
  TrainConfig c;
  c.env = bandit::BanditConfig{sigma_p, sigma_l, lifetime, -1.0};
  c.episodes_total = 30000;
  c.workers = 2;
  c.hidden_dim = 48;
  c.optimizer = {1e-3, 0.9, 0.999, 1e-8, 3e-6, 10.0};
  c.beta_v = 0.05;
  c.entropy = {1.0, 0.005, 30000, ScheduleShape::kLinear};
  c.discount = {0.4, 0.999, 27000, ScheduleShape::kExponential};
  return c;
}

TrainConfig TrainConfig::bandit_desk(double sigma_l, double sigma_p, int lifetime) {
  TrainConfig c = bandit_full(sigma_l, sigma_p, lifetime);
  c.episodes_total = 20000;
  c.entropy.anneal_episodes = 20000;
  c.discount.anneal_episodes = 18000;
  return c;
}

TrainConfig TrainConfig::grid_desk(int lifetime) {
  TrainConfig c;
  gridworld::GridConfig g = gridworld::GridConfig::defaults();
  g.lifetime = lifetime;
  c.env = g;
  c.episodes_total = 50000;
  c.workers = 7;
  c.hidden_dim = 64;
  c.optimizer = {1e-3, 0.9, 0.999, 1e-8, 0.0, 10.0};
  c.beta_v = 0.1;
  c.entropy = {0.5, 0.01, 35000, ScheduleShape::kLinear};
  c.discount = {0.8, 0.99, 40000, ScheduleShape::kExponential};
  return c;
}

void TrainConfig::validate() const {
  std::visit([](const auto& env) { env.validate(); }, env);
  if (episodes_total < 0) throw ConfigError("episodes must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (hidden_dim < 1) throw ConfigError("hidden units must be >= 1");
  if (!(optimizer.lr > 0.0)) throw ConfigError("learning rate must be > 0");
  for (const Schedule* s : {&entropy, &discount})
    if (s->anneal_episodes < 0) throw ConfigError("anneal time must be >= 0");
  for (double g : {discount.start, discount.end})
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("discount endpoints must lie in [0, 1]");
}

nn::NetParams initial_params(const TrainConfig& config) {
  Rng rng(derive_seed(config.seed, streams::kInit, 0));
  return nn::init_params({input_dim(config.env), config.hidden_dim, action_dim(config.env)}, rng);
}

namespace {

void save_state(const TrainConfig& config, const fs::path& dir, const nn::NetParams& params,
                const nn::OptimizerState& opt, long long episodes_seen, long long updates) {
  checkpoint::Checkpoint ckpt;
  ckpt.params = params;
  ckpt.optimizer = opt;
  ckpt.episodes_seen = episodes_seen;
  ckpt.updates = updates;
  ckpt.beta_e = anneal(config.entropy, episodes_seen);
  ckpt.gamma = anneal(config.discount, episodes_seen);
  ckpt.config = config::to_key_values(config);
  checkpoint::save(dir, ckpt);
}

std::string checkpoint_name(long long episodes) {
  std::string digits = std::to_string(episodes);
  if (digits.size() < 9) digits.insert(0, 9 - digits.size(), '0');
  return "ep_" + digits;
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::optional<ResumeState>& resume, const ProgressFn& progress) {
  config.validate();
  TrainResult result;
  if (resume) {
    result.params = resume->params;
    result.optimizer = resume->optimizer;
    result.episodes_seen = resume->episodes_seen;
    result.updates = resume->updates;
  } else {
    result.params = initial_params(config);
    result.optimizer = nn::OptimizerState(config.optimizer, result.params.flat().size());
  }
  const nn::NetDims dims = result.params.dims();
  if (dims.input_dim != input_dim(config.env) || dims.action_dim != action_dim(config.env))
    throw ContractError("resumed network does not match the environment");

  const bool persist = !config.run_dir.empty();
  const fs::path ckpt_root = config.run_dir / "checkpoints";
  std::unique_ptr<io::MetricsWriter> metrics_out;
  if (persist) {
    fs::create_directories(ckpt_root);
    metrics_out = std::make_unique<io::MetricsWriter>(config.run_dir / "metrics.csv", resume.has_value(),
                                                      result.updates);
    if (!resume) {
      const fs::path dir = ckpt_root / checkpoint_name(0);
      save_state(config, dir, result.params, result.optimizer, 0, 0);
      result.checkpoints.push_back(dir);
    }
  }

  const Eigen::VectorXd decay_mask = result.params.decay_mask();

  while (result.episodes_seen < config.episodes_total) {
    const long long first = result.episodes_seen;
    const int batch = static_cast<int>(std::min<long long>(config.workers, config.episodes_total - first));
    const double beta_e = anneal(config.entropy, first);
    const double gamma = anneal(config.discount, first);

    std::vector<nn::Gradients> grads(batch);
    std::vector<A2cLoss> losses(batch);
    std::vector<double> returns(batch);
    try {
      parallel_for(batch, [&](std::size_t w) {
        Rng rng(derive_seed(config.seed, streams::kTrainEpisode, static_cast<std::uint64_t>(first + w)));
        const EpisodeTrace trace = rollout_episode(result.params, config.env, rng);
        losses[w] = a2c_loss(trace, gamma, config.beta_v, beta_e);
        if (!std::isfinite(losses[w].total))
          throw TrainingError("non-finite loss in episode " + std::to_string(first + w));
        grads[w] = nn::backward(result.params, trace.forward, losses[w].dlogits, losses[w].dvalues);
        returns[w] = trace.episode_return;
      });

      nn::Gradients total = std::move(grads[0]);
      for (int w = 1; w < batch; ++w) total.flat() += grads[w].flat();
      const nn::StepInfo info = nn::adam_update(result.params.flat(), total.flat(), decay_mask, result.optimizer);

      MetricsRow row;
      row.update = result.updates;
      row.episodes_seen = first + batch;
      for (int w = 0; w < batch; ++w) {
        row.mean_return += returns[w] / batch;
        row.loss_pi += losses[w].policy / batch;
        row.loss_v += losses[w].value / batch;
        row.loss_e += losses[w].entropy / batch;
      }
      row.beta_e = beta_e;
      row.gamma = gamma;
      row.grad_norm = info.grad_norm;
      result.metrics.push_back(row);
      if (metrics_out) metrics_out->append(row);
      if (progress) progress(row);
    } catch (const TrainingError&) {
      if (persist) {
        const fs::path dir = ckpt_root / "last_good";
        save_state(config, dir, result.params, result.optimizer, result.episodes_seen, result.updates);
        result.checkpoints.push_back(dir);
      }
      throw;
    }

    result.episodes_seen = first + batch;
    ++result.updates;
    if (persist && config.checkpoint_every > 0 &&
        result.episodes_seen / config.checkpoint_every != first / config.checkpoint_every) {
      const fs::path dir = ckpt_root / checkpoint_name(result.episodes_seen);
      save_state(config, dir, result.params, result.optimizer, result.episodes_seen, result.updates);
      result.checkpoints.push_back(dir);
    }
  }

  if (persist) {
    const fs::path dir = ckpt_root / "final";
    save_state(config, dir, result.params, result.optimizer, result.episodes_seen, result.updates);
    result.checkpoints.push_back(dir);
  }
  return result;
}

namespace {

struct Mean {
  double sum = 0.0;
  double sum_sq = 0.0;
  long long n = 0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++n;
  }
  double mean() const { return n ? sum / n : 0.0; }
  double se() const {
    if (n < 2) return 0.0;
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1));
    return std::sqrt(var / n);
  }
};

}  // namespace

EvalStats evaluate(const nn::NetParams& params, const EnvSpec& spec, long long episodes, std::uint64_t seed,
                   const RolloutOptions& options) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  std::vector<double> returns(episodes), pulls(episodes);
  parallel_for(episodes, [&](std::size_t e) {
    Rng rng(derive_seed(seed, streams::kEval, e));
    const EpisodeTrace trace = rollout_episode(params, spec, rng, options);
    returns[e] = trace.episode_return;
    int stochastic = 0;
    for (int a : trace.actions) stochastic += a == static_cast<int>(bandit::Arm::kStochastic);
    pulls[e] = stochastic;
  });
  Mean r, p;
  for (long long e = 0; e < episodes; ++e) {
    r.add(returns[e]);
    p.add(pulls[e]);
  }
  EvalStats s;
  s.episodes = episodes;
  s.mean_return = r.mean();
  s.return_se = r.se();
  if (is_bandit(spec)) {
    s.mean_pulls = p.mean();
    s.pulls_se = p.se();
  }
  return s;
}

EvalStats eval_exploration(const nn::NetParams& params, double sigma_l, int lifetime, long long episodes,
                           std::uint64_t seed, const RolloutOptions& options) {
  bandit::BanditConfig holdout{0.0, sigma_l, lifetime, -1.0};
  return evaluate(params, holdout, episodes, seed, options);
}

NormalizedReturn lifetime_generalization(const nn::NetParams& params, const EnvSpec& train_spec,
                                         int test_lifetime, long long episodes, std::uint64_t seed) {
  if (test_lifetime < 1) throw ConfigError("test lifetime must be >= 1");
  const EvalStats s = evaluate(params, with_lifetime(train_spec, test_lifetime), episodes, seed);
  return {s.mean_return / test_lifetime, s.return_se / test_lifetime};
}

std::uint64_t bimodality_seed(std::uint64_t base_seed, int index) {
  return derive_seed(base_seed, streams::kBimodalitySeed, static_cast<std::uint64_t>(index));
}

std::vector<double> bimodality_study(const TrainConfig& base, int seeds, long long eval_episodes,
                                     std::uint64_t eval_seed) {
  if (!is_bandit(base.env)) throw ConfigError("bimodality study needs a bandit environment");
  if (seeds < 1) throw ConfigError("bimodality study needs at least one seed");
  const auto& env = std::get<bandit::BanditConfig>(base.env);
  std::vector<double> pulls(seeds);
  parallel_for(seeds, [&](std::size_t s) {
    TrainConfig cfg = base;
    cfg.seed = bimodality_seed(base.seed, static_cast<int>(s));
    cfg.run_dir.clear();
    const TrainResult trained = train(cfg);
    pulls[s] = eval_exploration(trained.params, env.sigma_l, env.lifetime, eval_episodes, eval_seed).mean_pulls;
  });
  return pulls;
}

}  // namespace metabandit::metarl
