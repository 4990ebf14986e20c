#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "metabandit/metarl.hpp"

namespace metabandit::config {

using KeyValues = std::map<std::string, std::string>;

/// Flat `key = value` text. '#' starts a comment; blank lines are ignored;
/// duplicate keys keep the last value.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& file);
std::string format_key_values(const KeyValues& kv);

/// Builds a TrainConfig from keys. `profile` (desk | full | grid-desk) and
/// `env` (bandit | grid) pick the base; every other key overrides one field.
/// Unknown keys throw ConfigError. Recognised keys:
///   env profile seed episodes workers hidden lr weight_decay grad_clip beta_v
///   beta_e_start beta_e_end beta_e_anneal beta_e_shape
///   gamma_start gamma_end gamma_anneal gamma_shape checkpoint_every lifetime
///   sigma_l sigma_p prior_mean                      (bandit)
///   grid_width grid_height reward_small reward_medium reward_high   (grid)
metarl::TrainConfig train_config_from(const KeyValues& kv);

/// Inverse of train_config_from for every key above; values round-trip exactly.
KeyValues to_key_values(const metarl::TrainConfig& config);

/// "start:stop:count:lin|log" -> ascending grid. count == 1 yields {start}.
/// Throws ConfigError on malformed input.
std::vector<double> parse_grid_spec(const std::string& spec);

}  // namespace metabandit::config
