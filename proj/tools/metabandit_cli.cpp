// metabandit command-line tool.
//
// Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "metabandit/analysis.hpp"
#include "metabandit/checkpoint.hpp"
#include "metabandit/config.hpp"
#include "metabandit/errors.hpp"
#include "metabandit/io.hpp"
#include "metabandit/metarl.hpp"
#include "metabandit/oracle.hpp"
#include "metabandit/parallel.hpp"
#include "metabandit/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace metabandit;

namespace {

constexpr int kManifestVersion = 1;
constexpr const char* kDefaultGrid = "0.1:10:20:log";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// One manifest.json per run directory: enough to rerun the command.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  double wall_clock_seconds = 0.0;

  void write(const fs::path& dir) const {
    json j;
    j["format"] = "metabandit-run";
    j["format_version"] = kManifestVersion;
    j["command"] = command;
    j["args"] = args;
    j["config"] = config;
    j["seed"] = seed;
    j["artifacts"] = artifacts;
    j["wall_clock_seconds"] = wall_clock_seconds;
    io::write_text(dir / "manifest.json", j.dump(2) + "\n");
  }
};

json kv_json(const config::KeyValues& kv) {
  json j = json::object();
  for (const auto& [k, v] : kv) j[k] = v;
  return j;
}

config::KeyValues json_kv(const json& j) {
  config::KeyValues kv;
  for (const auto& [k, v] : j.items()) kv[k] = v.is_string() ? v.get<std::string>() : v.dump();
  return kv;
}

std::vector<double> grid_arg(const std::string& spec, const char* flag) {
  try {
    return config::parse_grid_spec(spec);
  } catch (const ConfigError& e) {
    throw UsageError(std::string(flag) + ": " + e.what());
  }
}

std::string fmt(double v) { return io::format_double(v); }

// ---------------------------------------------------------------- theory

struct TheoryArgs {
  std::string sigma_l_grid = kDefaultGrid;
  std::string sigma_p_grid = kDefaultGrid;
  int lifetime = 100;
  int quad_nodes = theory::kDefaultQuadNodes;
  std::string integration = "closed";
  std::string variance = "sampling";
  double prior_mean = -1.0;
  std::string out;
};

theory::TheoryOptions theory_options(const std::string& integration, const std::string& variance, int nodes) {
  theory::TheoryOptions o;
  o.quad_nodes = nodes;
  if (integration == "closed") o.integration = theory::Integration::kClosedForm;
  else if (integration == "gh") o.integration = theory::Integration::kGaussHermite;
  else throw UsageError("--integration must be closed or gh");
  if (variance == "sampling") o.variance = theory::VarianceModel::kSampling;
  else if (variance == "posterior") o.variance = theory::VarianceModel::kPosterior;
  else throw UsageError("--variance must be sampling or posterior");
  if (nodes < 1) throw UsageError("--quad-nodes must be >= 1");
  return o;
}

int cmd_theory(const TheoryArgs& a, const std::vector<std::string>& argv) {
  Stopwatch clock;
  const auto sl = grid_arg(a.sigma_l_grid, "--sigma-l-grid");
  const auto sp = grid_arg(a.sigma_p_grid, "--sigma-p-grid");
  if (a.lifetime < 1) throw UsageError("--lifetime must be >= 1");
  if (sl.front() <= 0.0) throw UsageError("--sigma-l-grid values must be > 0");
  const auto opts = theory_options(a.integration, a.variance, a.quad_nodes);
  const auto diagram = theory::phase_diagram(sl, sp, a.lifetime, opts, a.prior_mean);

  const fs::path out(a.out);
  fs::create_directories(out);
  io::write_phase_csv(out / "phase.csv", diagram);
  io::write_text(out / "phase.json", io::phase_json(diagram) + "\n");

  RunManifest m;
  m.command = "theory";
  m.args = argv;
  m.config = {{"sigma_l_grid", a.sigma_l_grid}, {"sigma_p_grid", a.sigma_p_grid}, {"lifetime", a.lifetime},
              {"quad_nodes", a.quad_nodes},     {"integration", a.integration},   {"variance", a.variance},
              {"prior_mean", a.prior_mean}};
  m.artifacts = {"phase.csv", "phase.json"};
  m.wall_clock_seconds = clock.seconds();
  m.write(out);

  const auto learners = std::count_if(diagram.n_star.begin(), diagram.n_star.end(), [](int n) { return n > 0; });
  std::cout << "cells " << diagram.n_star.size() << ", learning " << learners << ", non-learning "
            << diagram.n_star.size() - learners << "\n";
  return 0;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::string points;
  long long episodes = 1000000;
  std::uint64_t seed = 0;
  std::string out;
  double corrupt = 0.0;
};

int cmd_verify(const VerifyArgs& a) {
  if (a.episodes < 1) throw UsageError("--episodes must be >= 1");
  const io::CsvTable table = io::read_csv(a.points);
  const std::size_t cl = table.column("sigma_l"), cp = table.column("sigma_p"), ct = table.column("lifetime"),
                    cn = table.column("n");
  std::optional<std::size_t> cm;
  if (std::find(table.header.begin(), table.header.end(), "prior_mean") != table.header.end())
    cm = table.column("prior_mean");

  json points = json::array();
  bool pass = true;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    bandit::BanditConfig c{io::parse_double(row[cp]), io::parse_double(row[cl]), std::stoi(row[ct]),
                           cm ? io::parse_double(row[*cm]) : -1.0};
    c.validate();
    const int n = std::stoi(row[cn]);
    const double th = theory::expected_return(n, c) + a.corrupt;
    const auto mc = oracle::simulate_policy(c, n, a.episodes, derive_seed(a.seed, streams::kOracle, r));
    const double diff = th - mc.mean;
    double z = 0.0;
    if (diff != 0.0) z = mc.std_error > 0.0 ? diff / mc.std_error : std::copysign(INFINITY, diff);
    const bool ok = std::abs(z) <= 3.0;
    pass = pass && ok;
    points.push_back({{"sigma_l", c.sigma_l},
                      {"sigma_p", c.sigma_p},
                      {"lifetime", c.lifetime},
                      {"prior_mean", c.prior_mean},
                      {"n", n},
                      {"theory", th},
                      {"mc_mean", mc.mean},
                      {"se", mc.std_error},
                      {"episodes", mc.episodes},
                      {"z", std::isfinite(z) ? json(z) : json(z > 0 ? "inf" : "-inf")},
                      {"pass", ok}});
  }
  json report{{"episodes", a.episodes}, {"seed", a.seed}, {"points", points}, {"pass", pass}};
  if (a.out.empty()) std::cout << report.dump(2) << "\n";
  else io::write_text(a.out, report.dump(2) + "\n");
  std::cerr << (pass ? "verify: pass" : "verify: FAIL") << " (" << points.size() << " points)\n";
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config_file;
  std::string manifest;
  std::vector<std::string> sets;
  std::optional<std::string> profile, sigma_l, sigma_p, lifetime, episodes, seed, workers, hidden, checkpoint_every;
  std::string out;
  bool resume = false;
  bool quiet = false;
};

config::KeyValues resolve_train_kv(const TrainArgs& a, bool grid) {
  config::KeyValues kv;
  if (grid) kv["env"] = "grid";
  if (!a.manifest.empty()) {
    const json m = json::parse(io::read_text(a.manifest));
    for (const auto& [k, v] : json_kv(m.at("config"))) kv[k] = v;
  }
  if (!a.config_file.empty())
    for (const auto& [k, v] : config::read_key_values(a.config_file)) kv[k] = v;
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  auto put = [&](const char* key, const std::optional<std::string>& v) {
    if (v) kv[key] = *v;
  };
  put("profile", a.profile);
  put("sigma_l", a.sigma_l);
  put("sigma_p", a.sigma_p);
  put("lifetime", a.lifetime);
  put("episodes", a.episodes);
  put("seed", a.seed);
  put("workers", a.workers);
  put("hidden", a.hidden);
  put("checkpoint_every", a.checkpoint_every);
  return kv;
}

// Latest resumable checkpoint in a run directory (most episodes seen).
std::optional<fs::path> latest_checkpoint(const fs::path& run_dir) {
  const fs::path root = run_dir / "checkpoints";
  if (!fs::exists(root)) return std::nullopt;
  std::optional<fs::path> best;
  long long best_episodes = -1;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!fs::exists(entry.path() / checkpoint::kManifestName)) continue;
    const json m = json::parse(io::read_text(entry.path() / checkpoint::kManifestName));
    const long long ep = m.value("episodes_seen", -1LL);
    if (ep > best_episodes) {
      best_episodes = ep;
      best = entry.path();
    }
  }
  return best;
}

metarl::ProgressFn progress_printer(const metarl::TrainConfig& cfg, bool quiet) {
  if (quiet) return {};
  const long long step = std::max<long long>(1, cfg.episodes_total / 10);
  auto next = std::make_shared<long long>(step);
  return [step, next](const metarl::MetricsRow& row) {
    if (row.episodes_seen < *next) return;
    while (*next <= row.episodes_seen) *next += step;
    std::cerr << "episodes " << row.episodes_seen << "  return " << row.mean_return << "  beta_e " << row.beta_e
              << "  gamma " << row.gamma << "\n";
  };
}

int cmd_train(const TrainArgs& a, bool grid, const std::vector<std::string>& argv) {
  Stopwatch clock;
  const fs::path out(a.out);
  metarl::TrainConfig cfg;
  std::optional<metarl::ResumeState> resume;
  config::KeyValues kv;

  if (a.resume) {
    if (!fs::exists(out / "config.txt")) throw FormatError("nothing to resume in " + out.string());
    kv = config::read_key_values(out / "config.txt");
    if (a.episodes) kv["episodes"] = *a.episodes;
    cfg = config::train_config_from(kv);
    if (const auto ck = latest_checkpoint(out)) {
      auto loaded = checkpoint::load(*ck);
      if (!loaded.optimizer) throw FormatError(ck->string() + " has no optimizer state");
      resume = metarl::ResumeState{std::move(loaded.params), std::move(*loaded.optimizer), loaded.episodes_seen,
                                   loaded.updates};
      std::cerr << "resuming from " << ck->string() << " at episode " << resume->episodes_seen << "\n";
    }
  } else {
    kv = resolve_train_kv(a, grid);
    cfg = config::train_config_from(kv);
  }
  cfg.run_dir = out;
  cfg.validate();
  fs::create_directories(out);
  const auto resolved = config::to_key_values(cfg);
  io::write_text(out / "config.txt", config::format_key_values(resolved));

  const auto result = metarl::train(cfg, resume, progress_printer(cfg, a.quiet));

  RunManifest m;
  m.command = grid ? "grid-train" : "train";
  m.args = argv;
  m.config = kv_json(resolved);
  m.seed = cfg.seed;
  m.artifacts = {"config.txt", "metrics.csv"};
  for (const auto& p : result.checkpoints) m.artifacts.push_back(fs::relative(p, out).generic_string());
  m.wall_clock_seconds = clock.seconds();
  m.write(out);

  double tail = 0.0;
  const std::size_t k = std::min<std::size_t>(result.metrics.size(), 250);
  for (std::size_t i = result.metrics.size() - k; i < result.metrics.size(); ++i) tail += result.metrics[i].mean_return;
  std::cout << "trained " << result.episodes_seen << " episodes (" << result.updates << " updates)";
  if (k) std::cout << ", recent mean return " << tail / k;
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  long long episodes = 1000;
  std::uint64_t seed = 1;
  bool holdout = false;
  bool greedy = false;
  int test_lifetime = 0;
  std::string out;
};

metarl::TrainConfig checkpoint_config(const checkpoint::Checkpoint& ck) {
  if (ck.config.empty()) throw FormatError("checkpoint has no run configuration");
  return config::train_config_from(ck.config);
}

int cmd_eval(const EvalArgs& a) {
  const auto ck = checkpoint::load(a.checkpoint);
  const auto cfg = checkpoint_config(ck);
  metarl::EnvSpec env = cfg.env;
  if (a.test_lifetime > 0) env = metarl::with_lifetime(env, a.test_lifetime);
  else if (a.test_lifetime < 0) throw UsageError("--test-lifetime must be >= 1");
  metarl::RolloutOptions opts;
  opts.greedy = a.greedy;

  json report{{"checkpoint", a.checkpoint}, {"episodes_seen", ck.episodes_seen}, {"episodes", a.episodes},
              {"seed", a.seed},             {"greedy", a.greedy},               {"lifetime", metarl::lifetime(env)}};
  metarl::EvalStats s;
  if (a.holdout) {
    if (!metarl::is_bandit(env)) throw UsageError("--holdout applies to bandit checkpoints only");
    const auto& b = std::get<bandit::BanditConfig>(env);
    s = metarl::eval_exploration(ck.params, b.sigma_l, b.lifetime, a.episodes, a.seed, opts);
    report["holdout"] = true;
  } else {
    s = metarl::evaluate(ck.params, env, a.episodes, a.seed, opts);
    report["holdout"] = false;
  }
  report["mean_return"] = s.mean_return;
  report["return_se"] = s.return_se;
  report["normalized_return"] = s.mean_return / metarl::lifetime(env);
  report["normalized_se"] = s.return_se / metarl::lifetime(env);
  if (metarl::is_bandit(env)) {
    report["mean_pulls"] = s.mean_pulls;
    report["pulls_se"] = s.pulls_se;
  }
  if (a.out.empty()) std::cout << report.dump(2) << "\n";
  else io::write_text(a.out, report.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string sigma_l_grid = "0.1:10:3:log";
  std::string sigma_p_grid = "0.1:10:3:log";
  int lifetime = 30;
  std::string profile = "desk";
  std::optional<long long> episodes;
  int seeds = 1;
  long long eval_episodes = 1000;
  std::uint64_t seed = 0;
  std::vector<std::string> sets;
  std::string out;
};

int cmd_sweep(const SweepArgs& a, const std::vector<std::string>& argv) {
  Stopwatch clock;
  const auto sl = grid_arg(a.sigma_l_grid, "--sigma-l-grid");
  const auto sp = grid_arg(a.sigma_p_grid, "--sigma-p-grid");
  if (a.seeds < 1) throw UsageError("--seeds must be >= 1");
  if (sl.front() <= 0.0) throw UsageError("--sigma-l-grid values must be > 0");
  const fs::path out(a.out);
  fs::create_directories(out);

  config::KeyValues base{{"profile", a.profile}, {"lifetime", std::to_string(a.lifetime)}};
  if (a.episodes) base["episodes"] = std::to_string(*a.episodes);
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    base[s.substr(0, eq)] = s.substr(eq + 1);
  }
  config::train_config_from(base);  // reject bad keys before any training

  const auto diagram = theory::phase_diagram(sl, sp, a.lifetime);
  io::write_phase_csv(out / "theory.csv", diagram);

  const std::size_t cells = sl.size() * sp.size();
  const std::size_t jobs = cells * a.seeds;
  std::vector<metarl::EvalStats> holdout(jobs), onpolicy(jobs);
  parallel_for(jobs, [&](std::size_t job) {
    const std::size_t cell = job / a.seeds;
    const int s = static_cast<int>(job % a.seeds);
    const std::size_t i = cell / sp.size(), j = cell % sp.size();
    config::KeyValues kv = base;
    kv["sigma_l"] = fmt(sl[i]);
    kv["sigma_p"] = fmt(sp[j]);
    kv["seed"] = std::to_string(derive_seed(a.seed, streams::kSweepCell, job));
    auto cfg = config::train_config_from(kv);
    cfg.run_dir = out / "cells" / (std::to_string(i) + "_" + std::to_string(j) + "_s" + std::to_string(s));
    fs::create_directories(cfg.run_dir);
    io::write_text(cfg.run_dir / "config.txt", config::format_key_values(config::to_key_values(cfg)));
    Stopwatch cell_clock;
    const auto trained = metarl::train(cfg);
    const std::uint64_t eval_seed = derive_seed(a.seed, streams::kEval, job);
    holdout[job] = metarl::eval_exploration(trained.params, sl[i], a.lifetime, a.eval_episodes, eval_seed);
    onpolicy[job] = metarl::evaluate(trained.params, cfg.env, a.eval_episodes, eval_seed);
    RunManifest m;
    m.command = "train";
    m.config = kv_json(config::to_key_values(cfg));
    m.seed = cfg.seed;
    m.artifacts = {"config.txt", "metrics.csv", "checkpoints/final"};
    m.wall_clock_seconds = cell_clock.seconds();
    m.write(cfg.run_dir);
  });

  io::CsvTable merged{{"sigma_l", "sigma_p", "lifetime", "n_star", "v_star", "seeds", "mean_pulls", "pulls_se",
                       "mean_return", "return_se"},
                      {}};
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const std::size_t i = cell / sp.size(), j = cell % sp.size();
    // Mean over seeds; SE combines the per-seed errors with the seed spread.
    double pulls = 0, ret = 0, pulls_var = 0, ret_var = 0;
    for (int s = 0; s < a.seeds; ++s) {
      pulls += holdout[cell * a.seeds + s].mean_pulls / a.seeds;
      ret += onpolicy[cell * a.seeds + s].mean_return / a.seeds;
    }
    for (int s = 0; s < a.seeds; ++s) {
      const auto& h = holdout[cell * a.seeds + s];
      const auto& o = onpolicy[cell * a.seeds + s];
      pulls_var += (a.seeds > 1 ? std::pow(h.mean_pulls - pulls, 2) / (a.seeds - 1) : h.pulls_se * h.pulls_se);
      ret_var += (a.seeds > 1 ? std::pow(o.mean_return - ret, 2) / (a.seeds - 1) : o.return_se * o.return_se);
    }
    const double pulls_se = a.seeds > 1 ? std::sqrt(pulls_var / a.seeds) : std::sqrt(pulls_var);
    const double ret_se = a.seeds > 1 ? std::sqrt(ret_var / a.seeds) : std::sqrt(ret_var);
    merged.rows.push_back({fmt(sl[i]), fmt(sp[j]), std::to_string(a.lifetime), std::to_string(diagram.n_star_at(i, j)),
                           fmt(diagram.v_star_at(i, j)), std::to_string(a.seeds), fmt(pulls), fmt(pulls_se), fmt(ret),
                           fmt(ret_se)});
  }
  io::write_csv(out / "sweep.csv", merged);

  RunManifest m;
  m.command = "sweep";
  m.args = argv;
  m.config = kv_json(base);
  m.config["sigma_l_grid"] = a.sigma_l_grid;
  m.config["sigma_p_grid"] = a.sigma_p_grid;
  m.config["seeds"] = a.seeds;
  m.config["eval_episodes"] = a.eval_episodes;
  m.seed = a.seed;
  m.artifacts = {"theory.csv", "sweep.csv", "cells"};
  m.wall_clock_seconds = clock.seconds();
  m.write(out);
  std::cout << "sweep: " << cells << " cells x " << a.seeds << " seeds written to " << (out / "sweep.csv").string()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------- bimodality

struct BimodalityArgs {
  double sigma_l = 1.0;
  double sigma_p = 1.0;
  int lifetime = 30;
  std::string profile = "desk";
  std::optional<long long> episodes;
  int seeds = 32;
  long long eval_episodes = 1000;
  std::uint64_t seed = 0;
  std::string bins = "0:30:31:lin";
  double low = 0.5;
  double high = 2.0;
  std::vector<std::string> sets;
  std::string out;
};

int cmd_bimodality(const BimodalityArgs& a, const std::vector<std::string>& argv) {
  Stopwatch clock;
  const auto edges = grid_arg(a.bins, "--bins");
  if (edges.size() < 2) throw UsageError("--bins needs at least two edges");
  config::KeyValues kv{{"profile", a.profile},
                       {"lifetime", std::to_string(a.lifetime)},
                       {"sigma_l", fmt(a.sigma_l)},
                       {"sigma_p", fmt(a.sigma_p)},
                       {"seed", std::to_string(a.seed)}};
  if (a.episodes) kv["episodes"] = std::to_string(*a.episodes);
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  const auto cfg = config::train_config_from(kv);
  const fs::path out(a.out);
  fs::create_directories(out);

  const std::uint64_t eval_seed = derive_seed(a.seed, streams::kEval, 0);
  const auto pulls = metarl::bimodality_study(cfg, a.seeds, a.eval_episodes, eval_seed);

  io::CsvTable per_seed{{"index", "seed", "mean_pulls"}, {}};
  for (int s = 0; s < a.seeds; ++s)
    per_seed.rows.push_back({std::to_string(s), std::to_string(metarl::bimodality_seed(a.seed, s)), fmt(pulls[s])});
  io::write_csv(out / "pulls.csv", per_seed);

  const auto h = analysis::histogram(pulls, edges, a.low, a.high);
  io::CsvTable hist{{"bin_low", "bin_high", "count"}, {}};
  for (std::size_t k = 0; k < h.counts.size(); ++k)
    hist.rows.push_back({fmt(h.edges[k]), fmt(h.edges[k + 1]), std::to_string(h.counts[k])});
  io::write_csv(out / "histogram.csv", hist);

  const auto below = std::count_if(pulls.begin(), pulls.end(), [&](double p) { return p < a.low; });
  const auto above = std::count_if(pulls.begin(), pulls.end(), [&](double p) { return p > a.high; });
  const auto th = theory::optimal_exploration(std::get<bandit::BanditConfig>(cfg.env));
  json summary{{"seeds", a.seeds},
               {"min", h.min},
               {"max", h.max},
               {"low_threshold", a.low},
               {"high_threshold", a.high},
               {"fraction_below", h.fraction_below},
               {"fraction_above", h.fraction_above},
               {"count_below", below},
               {"count_above", above},
               {"both_classes", below >= 3 && above >= 3},
               {"theory_n_star", th.n_star},
               {"theory_v_star", th.v_star}};
  io::write_text(out / "summary.json", summary.dump(2) + "\n");

  RunManifest m;
  m.command = "bimodality";
  m.args = argv;
  m.config = kv_json(config::to_key_values(cfg));
  m.config["seeds"] = a.seeds;
  m.config["eval_episodes"] = a.eval_episodes;
  m.config["bins"] = a.bins;
  m.seed = a.seed;
  m.artifacts = {"pulls.csv", "histogram.csv", "summary.json"};
  m.wall_clock_seconds = clock.seconds();
  m.write(out);
  std::cout << "seeds below " << a.low << ": " << below << ", above " << a.high << ": " << above << "\n";
  return 0;
}

// ---------------------------------------------------------------- grid-eval / analyze

struct RolloutArgs {
  std::string checkpoint;
  long long episodes = 100;
  std::uint64_t seed = 1;
  int test_lifetime = 0;
  int components = 3;
  bool holdout = false;
  bool greedy = false;
  std::string out;
};

std::vector<metarl::EpisodeTrace> collect(const nn::NetParams& params, const metarl::EnvSpec& env, long long episodes,
                                          std::uint64_t seed, bool greedy) {
  if (episodes < 1) throw UsageError("--episodes must be >= 1");
  std::vector<metarl::EpisodeTrace> traces(episodes);
  metarl::RolloutOptions opts;
  opts.greedy = greedy;
  parallel_for(traces.size(), [&](std::size_t e) {
    Rng rng(derive_seed(seed, streams::kEval, e));
    traces[e] = metarl::rollout_episode(params, env, rng, opts);
  });
  return traces;
}

json episode_stats(const std::vector<metarl::EpisodeTrace>& traces) {
  double sum = 0, sq = 0;
  for (const auto& t : traces) {
    sum += t.episode_return;
    sq += t.episode_return * t.episode_return;
  }
  const double n = static_cast<double>(traces.size());
  const double mean = sum / n;
  const double se = n > 1 ? std::sqrt(std::max(0.0, (sq - sum * sum / n) / (n - 1)) / n) : 0.0;
  return {{"mean_return", mean}, {"return_se", se}};
}

int cmd_grid_eval(const RolloutArgs& a, const std::vector<std::string>& argv) {
  Stopwatch clock;
  const auto ck = checkpoint::load(a.checkpoint);
  const auto cfg = checkpoint_config(ck);
  if (metarl::is_bandit(cfg.env)) throw UsageError("grid-eval needs a gridworld checkpoint");
  metarl::EnvSpec env = cfg.env;
  if (a.test_lifetime > 0) env = metarl::with_lifetime(env, a.test_lifetime);
  const auto& grid = std::get<gridworld::GridConfig>(env);
  const auto traces = collect(ck.params, env, a.episodes, a.seed, a.greedy);

  const fs::path out(a.out);
  fs::create_directories(out);
  const auto occ = analysis::occupancy(traces, grid.width, grid.height, true);
  io::write_occupancy_csv(out / "occupancy.csv", occ);
  io::write_text(out / "trajectories.json", io::trajectories_json(grid, traces) + "\n");
  const auto shares = analysis::goal_visit_shares(traces);
  const auto pooled = analysis::pool_hidden(traces);
  const auto pr = analysis::participation_ratio(pooled.values);

  json summary = episode_stats(traces);
  summary["episodes"] = a.episodes;
  summary["lifetime"] = grid.lifetime;
  summary["goal_shares"] = {{"small", shares[0]}, {"medium", shares[1]}, {"high", shares[2]}};
  summary["occupancy_support_1pct"] = occ.support(0.01);
  summary["participation_ratio"] = pr.value;
  summary["participation_degenerate"] = pr.degenerate;
  io::write_text(out / "summary.json", summary.dump(2) + "\n");

  RunManifest m;
  m.command = "grid-eval";
  m.args = argv;
  m.config = {{"checkpoint", a.checkpoint}, {"episodes", a.episodes}, {"test_lifetime", grid.lifetime},
              {"greedy", a.greedy}};
  m.seed = a.seed;
  m.artifacts = {"occupancy.csv", "trajectories.json", "summary.json"};
  m.wall_clock_seconds = clock.seconds();
  m.write(out);
  std::cout << "goal shares small " << shares[0] << " medium " << shares[1] << " high " << shares[2] << ", PR "
            << pr.value << "\n";
  return 0;
}

int cmd_analyze(const RolloutArgs& a, const std::vector<std::string>& argv) {
  Stopwatch clock;
  const auto ck = checkpoint::load(a.checkpoint);
  const auto cfg = checkpoint_config(ck);
  metarl::EnvSpec env = cfg.env;
  if (a.test_lifetime > 0) env = metarl::with_lifetime(env, a.test_lifetime);
  if (a.holdout) {
    if (!metarl::is_bandit(env)) throw UsageError("--holdout applies to bandit checkpoints only");
    std::get<bandit::BanditConfig>(env).sigma_p = 0.0;
  }
  const int hidden = ck.params.dims().hidden_dim;
  if (a.components < 1 || a.components > hidden)
    throw UsageError("--components must lie in [1, " + std::to_string(hidden) + "]");
  const auto traces = collect(ck.params, env, a.episodes, a.seed, a.greedy);
  const auto pooled = analysis::pool_hidden(traces);
  if (pooled.values.rows() < 2) throw UsageError("need at least two pooled time steps for PCA");
  const auto pca = analysis::pca(pooled.values, a.components);
  const auto pr = analysis::participation_ratio_from_eigenvalues(pca.eigenvalues);

  const fs::path out(a.out);
  fs::create_directories(out);
  io::write_projection_csv(out / "pca_projection.csv", pooled, pca);
  io::CsvTable ratios{{"component", "explained_ratio", "eigenvalue"}, {}};
  for (Eigen::Index k = 0; k < pca.explained_ratio.size(); ++k)
    ratios.rows.push_back({std::to_string(k + 1), fmt(pca.explained_ratio[k]), fmt(pca.eigenvalues[k])});
  io::write_csv(out / "pca_ratios.csv", ratios);

  io::CsvTable entropy{{"episode", "t", "entropy"}, {}};
  double late_sum = 0.0;
  long long late_n = 0;
  for (std::size_t e = 0; e < traces.size(); ++e) {
    const auto h = analysis::entropy_trace(traces[e]);
    for (std::size_t t = 0; t < h.size(); ++t) {
      entropy.rows.push_back({std::to_string(e), std::to_string(t), fmt(h[t])});
      if (t >= 5) {
        late_sum += h[t];
        ++late_n;
      }
    }
  }
  io::write_csv(out / "entropy.csv", entropy);

  json summary = episode_stats(traces);
  summary["episodes"] = a.episodes;
  summary["lifetime"] = metarl::lifetime(env);
  summary["participation_ratio"] = pr.value;
  summary["participation_degenerate"] = pr.degenerate;
  summary["pca_degenerate"] = pca.degenerate;
  summary["explained_ratio"] = std::vector<double>(pca.explained_ratio.data(), pca.explained_ratio.data() + pca.explained_ratio.size());
  summary["mean_entropy_after_step_5"] = late_n ? json(late_sum / late_n) : json(nullptr);
  std::vector<std::string> artifacts{"pca_projection.csv", "pca_ratios.csv", "entropy.csv", "summary.json"};
  if (!metarl::is_bandit(env)) {
    const auto& grid = std::get<gridworld::GridConfig>(env);
    io::write_occupancy_csv(out / "occupancy.csv", analysis::occupancy(traces, grid.width, grid.height, true));
    artifacts.push_back("occupancy.csv");
  }
  io::write_text(out / "summary.json", summary.dump(2) + "\n");

  RunManifest m;
  m.command = "analyze";
  m.args = argv;
  m.config = {{"checkpoint", a.checkpoint}, {"episodes", a.episodes},  {"test_lifetime", metarl::lifetime(env)},
              {"components", a.components}, {"holdout", a.holdout},   {"greedy", a.greedy}};
  m.seed = a.seed;
  m.artifacts = artifacts;
  m.wall_clock_seconds = clock.seconds();
  m.write(out);
  std::cout << "participation ratio " << pr.value << ", first component " << pca.explained_ratio[0] << "\n";
  return 0;
}

void add_train_options(CLI::App* sub, TrainArgs& a) {
  sub->add_option("--config", a.config_file, "Key-value config file")->check(CLI::ExistingFile);
  sub->add_option("--manifest", a.manifest, "Reuse the configuration of a previous run's manifest.json")
      ->check(CLI::ExistingFile);
  sub->add_option("--set", a.sets, "Override one key (key=value); repeatable");
  sub->add_option("--profile", a.profile, "desk | full | grid-desk");
  sub->add_option("--lifetime", a.lifetime, "Steps per episode");
  sub->add_option("--episodes", a.episodes, "Total training episodes");
  sub->add_option("--seed", a.seed, "Master seed");
  sub->add_option("--workers", a.workers, "Episodes per update");
  sub->add_option("--hidden", a.hidden, "LSTM hidden units");
  sub->add_option("--checkpoint-every", a.checkpoint_every, "Checkpoint cadence in episodes (0 = off)");
  sub->add_option("--out", a.out, "Run directory")->required();
  sub->add_flag("--resume", a.resume, "Continue the run in --out from its latest checkpoint");
  sub->add_flag("--quiet", a.quiet, "No progress lines");
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Bayes-optimal exploration theory and meta-RL experiments on Gaussian bandits and gridworlds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "metabandit 0.1.0");

  TheoryArgs theory_args;
  auto* theory_cmd = app.add_subcommand("theory", "Optimal exploration phase diagram");
  theory_cmd->add_option("--sigma-l-grid", theory_args.sigma_l_grid, "start:stop:count:lin|log")->capture_default_str();
  theory_cmd->add_option("--sigma-p-grid", theory_args.sigma_p_grid, "start:stop:count:lin|log")->capture_default_str();
  theory_cmd->add_option("--lifetime", theory_args.lifetime)->capture_default_str();
  theory_cmd->add_option("--quad-nodes", theory_args.quad_nodes, "Gauss-Hermite nodes (with --integration gh)")
      ->capture_default_str();
  theory_cmd->add_option("--integration", theory_args.integration, "closed | gh")->capture_default_str();
  theory_cmd->add_option("--variance", theory_args.variance, "sampling | posterior")->capture_default_str();
  theory_cmd->add_option("--prior-mean", theory_args.prior_mean)->capture_default_str();
  theory_cmd->add_option("--out", theory_args.out, "Output directory")->required();

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "Theory versus Monte-Carlo oracle");
  verify_cmd->add_option("--points", verify_args.points, "CSV with sigma_l,sigma_p,lifetime,n[,prior_mean]")
      ->required();
  verify_cmd->add_option("--episodes", verify_args.episodes)->capture_default_str();
  verify_cmd->add_option("--seed", verify_args.seed)->capture_default_str();
  verify_cmd->add_option("--out", verify_args.out, "Report file (default: stdout)");
  verify_cmd->add_option("--corrupt-theory", verify_args.corrupt, "Test hook: add this offset to every theory value")
      ->group("");

  TrainArgs train_args, grid_train_args;
  auto* train_cmd = app.add_subcommand("train", "Meta-train an agent on a bandit distribution");
  add_train_options(train_cmd, train_args);
  train_cmd->add_option("--sigma-l", train_args.sigma_l, "Reward noise std");
  train_cmd->add_option("--sigma-p", train_args.sigma_p, "Prior std of the stochastic arm's mean");
  auto* grid_train_cmd = app.add_subcommand("grid-train", "Meta-train an agent on the gridworld");
  add_train_options(grid_train_cmd, grid_train_args);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval_cmd->add_option("--episodes", eval_args.episodes)->capture_default_str();
  eval_cmd->add_option("--seed", eval_args.seed)->capture_default_str();
  eval_cmd->add_flag("--holdout", eval_args.holdout, "Bandits with sigma_p = 0; counts explorative pulls");
  eval_cmd->add_flag("--greedy", eval_args.greedy, "Argmax actions instead of sampling");
  eval_cmd->add_option("--test-lifetime", eval_args.test_lifetime, "Evaluate at another lifetime");
  eval_cmd->add_option("--out", eval_args.out, "Report file (default: stdout)");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate over a (sigma_l, sigma_p) grid");
  sweep_cmd->add_option("--sigma-l-grid", sweep_args.sigma_l_grid)->capture_default_str();
  sweep_cmd->add_option("--sigma-p-grid", sweep_args.sigma_p_grid)->capture_default_str();
  sweep_cmd->add_option("--lifetime", sweep_args.lifetime)->capture_default_str();
  sweep_cmd->add_option("--profile", sweep_args.profile)->capture_default_str();
  sweep_cmd->add_option("--episodes", sweep_args.episodes, "Training episodes per cell");
  sweep_cmd->add_option("--seeds", sweep_args.seeds, "Training seeds per cell")->capture_default_str();
  sweep_cmd->add_option("--eval-episodes", sweep_args.eval_episodes)->capture_default_str();
  sweep_cmd->add_option("--seed", sweep_args.seed)->capture_default_str();
  sweep_cmd->add_option("--set", sweep_args.sets, "Override one training key (key=value)");
  sweep_cmd->add_option("--out", sweep_args.out)->required();

  BimodalityArgs bimodality_args;
  auto* bimodality_cmd = app.add_subcommand("bimodality", "Many seeds at one config; histogram of exploration");
  bimodality_cmd->add_option("--sigma-l", bimodality_args.sigma_l)->capture_default_str();
  bimodality_cmd->add_option("--sigma-p", bimodality_args.sigma_p)->capture_default_str();
  bimodality_cmd->add_option("--lifetime", bimodality_args.lifetime)->capture_default_str();
  bimodality_cmd->add_option("--profile", bimodality_args.profile)->capture_default_str();
  bimodality_cmd->add_option("--episodes", bimodality_args.episodes, "Training episodes per seed");
  bimodality_cmd->add_option("--seeds", bimodality_args.seeds)->capture_default_str();
  bimodality_cmd->add_option("--eval-episodes", bimodality_args.eval_episodes)->capture_default_str();
  bimodality_cmd->add_option("--seed", bimodality_args.seed)->capture_default_str();
  bimodality_cmd->add_option("--bins", bimodality_args.bins, "Histogram edges as a grid spec")->capture_default_str();
  bimodality_cmd->add_option("--low", bimodality_args.low, "Non-learning threshold on mean pulls")->capture_default_str();
  bimodality_cmd->add_option("--high", bimodality_args.high, "Learning threshold on mean pulls")->capture_default_str();
  bimodality_cmd->add_option("--set", bimodality_args.sets, "Override one training key (key=value)");
  bimodality_cmd->add_option("--out", bimodality_args.out)->required();

  RolloutArgs grid_eval_args, analyze_args;
  auto* grid_eval_cmd = app.add_subcommand("grid-eval", "Occupancy, goal shares and trajectories of a grid agent");
  auto* analyze_cmd = app.add_subcommand("analyze", "PCA, participation ratio and entropy of hidden dynamics");
  for (auto [sub, a] : {std::pair{grid_eval_cmd, &grid_eval_args}, std::pair{analyze_cmd, &analyze_args}}) {
    sub->add_option("--checkpoint", a->checkpoint)->required();
    sub->add_option("--episodes", a->episodes)->capture_default_str();
    sub->add_option("--seed", a->seed)->capture_default_str();
    sub->add_option("--test-lifetime", a->test_lifetime, "Roll out at another lifetime");
    sub->add_flag("--greedy", a->greedy, "Argmax actions instead of sampling");
    sub->add_option("--out", a->out)->required();
  }
  analyze_cmd->add_option("--components", analyze_args.components)->capture_default_str();
  analyze_cmd->add_flag("--holdout", analyze_args.holdout, "Bandit rollouts with sigma_p = 0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*theory_cmd) return cmd_theory(theory_args, args);
    if (*verify_cmd) return cmd_verify(verify_args);
    if (*train_cmd) return cmd_train(train_args, false, args);
    if (*grid_train_cmd) return cmd_train(grid_train_args, true, args);
    if (*eval_cmd) return cmd_eval(eval_args);
    if (*sweep_cmd) return cmd_sweep(sweep_args, args);
    if (*bimodality_cmd) return cmd_bimodality(bimodality_args, args);
    if (*grid_eval_cmd) return cmd_grid_eval(grid_eval_args, args);
    if (*analyze_cmd) return cmd_analyze(analyze_args, args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
