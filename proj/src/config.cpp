#include "metabandit/config.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "metabandit/errors.hpp"
#include "metabandit/io.hpp"

namespace metabandit::config {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double as_double(const std::string& key, const std::string& v) {
  try {
    return io::parse_double(v);
  } catch (const FormatError&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  }
}

long long as_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

std::uint64_t as_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("key '" + key + "' expects an unsigned 64-bit integer, got '" + v + "'");
  return out;
}

metarl::ScheduleShape as_shape(const std::string& key, const std::string& v) {
  if (v == "linear") return metarl::ScheduleShape::kLinear;
  if (v == "exponential") return metarl::ScheduleShape::kExponential;
  throw ConfigError("key '" + key + "' expects linear or exponential, got '" + v + "'");
}

const char* shape_name(metarl::ScheduleShape s) {
  return s == metarl::ScheduleShape::kLinear ? "linear" : "exponential";
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& file) { return parse_key_values(io::read_text(file)); }

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

metarl::TrainConfig train_config_from(const KeyValues& kv) {
  static const std::set<std::string> known = {
      "env", "profile", "seed", "episodes", "workers", "hidden", "lr", "weight_decay", "grad_clip", "beta_v",
      "beta_e_start", "beta_e_end", "beta_e_anneal", "beta_e_shape", "gamma_start", "gamma_end", "gamma_anneal",
      "gamma_shape", "checkpoint_every", "lifetime", "sigma_l", "sigma_p", "prior_mean", "grid_width",
      "grid_height", "reward_small", "reward_medium", "reward_high"};
  for (const auto& [k, v] : kv)
    if (!known.count(k)) throw ConfigError("unknown configuration key '" + k + "'");

  auto get = [&](const std::string& k) -> const std::string* {
    const auto it = kv.find(k);
    return it == kv.end() ? nullptr : &it->second;
  };

  const std::string env = get("env") ? *get("env") : "bandit";
  if (env != "bandit" && env != "grid") throw ConfigError("env must be bandit or grid, got '" + env + "'");
  std::string profile = get("profile") ? *get("profile") : (env == "grid" ? "grid-desk" : "desk");

  metarl::TrainConfig c;
  if (env == "bandit") {
    if (profile == "desk") c = metarl::TrainConfig::bandit_desk(1.0, 1.0);
    else if (profile == "full") c = metarl::TrainConfig::bandit_full(1.0, 1.0);
    else throw ConfigError("bandit profile must be desk or full, got '" + profile + "'");
  } else {
    if (profile != "grid-desk") throw ConfigError("grid profile must be grid-desk, got '" + profile + "'");
    c = metarl::TrainConfig::grid_desk(100);
  }

  if (auto v = get("seed")) c.seed = as_u64("seed", *v);
  if (auto v = get("episodes")) c.episodes_total = as_int("episodes", *v);
  if (auto v = get("workers")) c.workers = static_cast<int>(as_int("workers", *v));
  if (auto v = get("hidden")) c.hidden_dim = static_cast<int>(as_int("hidden", *v));
  if (auto v = get("lr")) c.optimizer.lr = as_double("lr", *v);
  if (auto v = get("weight_decay")) c.optimizer.weight_decay = as_double("weight_decay", *v);
  if (auto v = get("grad_clip")) c.optimizer.grad_clip = as_double("grad_clip", *v);
  if (auto v = get("beta_v")) c.beta_v = as_double("beta_v", *v);
  if (auto v = get("beta_e_start")) c.entropy.start = as_double("beta_e_start", *v);
  if (auto v = get("beta_e_end")) c.entropy.end = as_double("beta_e_end", *v);
  if (auto v = get("beta_e_anneal")) c.entropy.anneal_episodes = as_int("beta_e_anneal", *v);
  if (auto v = get("beta_e_shape")) c.entropy.shape = as_shape("beta_e_shape", *v);
  if (auto v = get("gamma_start")) c.discount.start = as_double("gamma_start", *v);
  if (auto v = get("gamma_end")) c.discount.end = as_double("gamma_end", *v);
  if (auto v = get("gamma_anneal")) c.discount.anneal_episodes = as_int("gamma_anneal", *v);
  if (auto v = get("gamma_shape")) c.discount.shape = as_shape("gamma_shape", *v);
  if (auto v = get("checkpoint_every")) c.checkpoint_every = as_int("checkpoint_every", *v);

  if (env == "bandit") {
    auto& b = std::get<bandit::BanditConfig>(c.env);
    if (auto v = get("sigma_l")) b.sigma_l = as_double("sigma_l", *v);
    if (auto v = get("sigma_p")) b.sigma_p = as_double("sigma_p", *v);
    if (auto v = get("prior_mean")) b.prior_mean = as_double("prior_mean", *v);
    if (auto v = get("lifetime")) b.lifetime = static_cast<int>(as_int("lifetime", *v));
    for (const char* k : {"grid_width", "grid_height", "reward_small", "reward_medium", "reward_high"})
      if (get(k)) throw ConfigError(std::string("key '") + k + "' only applies to env = grid");
  } else {
    auto& g = std::get<gridworld::GridConfig>(c.env);
    if (auto v = get("reward_small")) g.reward_small = as_double("reward_small", *v);
    if (auto v = get("reward_medium")) g.reward_medium = as_double("reward_medium", *v);
    if (auto v = get("reward_high")) g.reward_high = as_double("reward_high", *v);
    if (auto v = get("lifetime")) g.lifetime = static_cast<int>(as_int("lifetime", *v));
    if (get("grid_width") || get("grid_height")) {
      const int w = get("grid_width") ? static_cast<int>(as_int("grid_width", *get("grid_width"))) : g.width;
      const int h = get("grid_height") ? static_cast<int>(as_int("grid_height", *get("grid_height"))) : g.height;
      if (w != 6 || h != 6) throw ConfigError("only the 6x6 maze layout is built in");
    }
    for (const char* k : {"sigma_l", "sigma_p", "prior_mean"})
      if (get(k)) throw ConfigError(std::string("key '") + k + "' only applies to env = bandit");
  }
  c.validate();
  return c;
}

KeyValues to_key_values(const metarl::TrainConfig& c) {
  using io::format_double;
  KeyValues kv;
  kv["seed"] = std::to_string(c.seed);
  kv["episodes"] = std::to_string(c.episodes_total);
  kv["workers"] = std::to_string(c.workers);
  kv["hidden"] = std::to_string(c.hidden_dim);
  kv["lr"] = format_double(c.optimizer.lr);
  kv["weight_decay"] = format_double(c.optimizer.weight_decay);
  kv["grad_clip"] = format_double(c.optimizer.grad_clip);
  kv["beta_v"] = format_double(c.beta_v);
  kv["beta_e_start"] = format_double(c.entropy.start);
  kv["beta_e_end"] = format_double(c.entropy.end);
  kv["beta_e_anneal"] = std::to_string(c.entropy.anneal_episodes);
  kv["beta_e_shape"] = shape_name(c.entropy.shape);
  kv["gamma_start"] = format_double(c.discount.start);
  kv["gamma_end"] = format_double(c.discount.end);
  kv["gamma_anneal"] = std::to_string(c.discount.anneal_episodes);
  kv["gamma_shape"] = shape_name(c.discount.shape);
  kv["checkpoint_every"] = std::to_string(c.checkpoint_every);
  if (const auto* b = std::get_if<bandit::BanditConfig>(&c.env)) {
    kv["env"] = "bandit";
    kv["profile"] = "desk";
    kv["sigma_l"] = format_double(b->sigma_l);
    kv["sigma_p"] = format_double(b->sigma_p);
    kv["prior_mean"] = format_double(b->prior_mean);
    kv["lifetime"] = std::to_string(b->lifetime);
  } else {
    const auto& g = std::get<gridworld::GridConfig>(c.env);
    kv["env"] = "grid";
    kv["profile"] = "grid-desk";
    kv["reward_small"] = format_double(g.reward_small);
    kv["reward_medium"] = format_double(g.reward_medium);
    kv["reward_high"] = format_double(g.reward_high);
    kv["lifetime"] = std::to_string(g.lifetime);
  }
  return kv;
}

std::vector<double> parse_grid_spec(const std::string& spec) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(spec);
  while (std::getline(in, part, ':')) parts.push_back(part);
  if (parts.size() != 4) throw ConfigError("grid spec '" + spec + "' must look like start:stop:count:lin|log");
  const double start = as_double("grid start", parts[0]);
  const double stop = as_double("grid stop", parts[1]);
  const long long count = as_int("grid count", parts[2]);
  const std::string& kind = parts[3];
  if (count < 1) throw ConfigError("grid spec '" + spec + "': count must be >= 1");
  if (kind != "lin" && kind != "log") throw ConfigError("grid spec '" + spec + "': spacing must be lin or log");
  if (stop < start) throw ConfigError("grid spec '" + spec + "': stop must be >= start");
  if (start < 0.0) throw ConfigError("grid spec '" + spec + "': values must be >= 0");
  if (kind == "log" && start <= 0.0) throw ConfigError("grid spec '" + spec + "': log spacing needs start > 0");

  std::vector<double> grid(count);
  for (long long k = 0; k < count; ++k) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
    grid[k] = kind == "lin" ? start + (stop - start) * frac
                            : std::exp(std::log(start) + (std::log(stop) - std::log(start)) * frac);
  }
  if (count > 1) {
    grid.front() = start;
    grid.back() = stop;
  }
  return grid;
}

}  // namespace metabandit::config
