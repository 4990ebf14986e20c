#include "metabandit/bandit.hpp"

#include <cmath>
#include <string>

#include "metabandit/errors.hpp"

namespace metabandit::bandit {

void BanditConfig::validate() const {
  if (!(sigma_p >= 0.0) || !std::isfinite(sigma_p))
    throw ConfigError("sigma_p must be finite and >= 0, got " + std::to_string(sigma_p));
  if (!(sigma_l > 0.0) || !std::isfinite(sigma_l))
    throw ConfigError("sigma_l must be finite and > 0, got " + std::to_string(sigma_l));
  if (lifetime < 1) throw ConfigError("lifetime must be >= 1, got " + std::to_string(lifetime));
  if (!std::isfinite(prior_mean)) throw ConfigError("prior_mean must be finite");
}

BanditTask sample_task(const BanditConfig& config, Rng& rng) {
  config.validate();
  if (config.sigma_p == 0.0) return {config.prior_mean, config};
  return {rng.normal(config.prior_mean, config.sigma_p), config};
}

double pull(const BanditTask& task, Arm arm, Rng& rng) {
  if (arm == Arm::kDeterministic) return 0.0;
  return rng.normal(task.mu, task.config.sigma_l);
}

}  // namespace metabandit::bandit
