#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace hed {

/// Invalid or unparsable configuration; the message names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class HighLevelMode { per_episode, fixed_interval };

std::string to_string(HighLevelMode mode);
HighLevelMode high_level_mode_from_string(const std::string& name);

/// Training hyper-parameters. Field names match the JSON keys (N is "N").
struct TrainConfig {
  std::string env = "pendulum";
  int max_episode_steps = 200;
  std::size_t n = 5;
  std::vector<std::size_t> hidden_dims{64, 64};
  std::string hidden_activation = "relu";
  double gamma = 0.99;
  double adam_lr = 5e-4;
  std::size_t batch_size = 100;
  std::size_t update_interval = 50;
  std::size_t buffer_capacity = 1'000'000;
  double rho0 = 1e-4;
  double h_highlevel = 5e-4;
  double tau = 0.995;
  double exploration_std = 0.1;
  double smoothing_std = 0.1;
  int max_episodes = 300;
  HighLevelMode high_level_mode = HighLevelMode::per_episode;
  /// Fraction of sampled steps used for high-level iterations; unset means 1 / update_interval.
  std::optional<double> high_level_fraction;
  bool single_step_ablation = false;
  std::size_t policy_delay = 2;
  bool exclude_self = false;
  bool shared_pair = false;
  std::uint64_t seed = 0;
  int eval_interval = 10;
  int eval_episodes = 10;
  int checkpoint_interval = 0;

  double effective_high_level_fraction() const {
    return high_level_fraction.value_or(1.0 / static_cast<double>(update_interval));
  }

  bool operator==(const TrainConfig&) const = default;
};

/// Throws ConfigError naming the first field that violates its invariant.
void validate(const TrainConfig& cfg);

/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const TrainConfig& cfg);

TrainConfig load_config(const std::string& path);
void save_config(const TrainConfig& cfg, const std::string& path);

}  // namespace hed
