#include "hed/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <type_traits>

#include "hed/envs.hpp"
#include "hed/mlp.hpp"

namespace hed {

std::string to_string(HighLevelMode mode) {
  return mode == HighLevelMode::per_episode ? "per_episode" : "fixed_interval";
}

HighLevelMode high_level_mode_from_string(const std::string& name) {
  if (name == "per_episode") return HighLevelMode::per_episode;
  if (name == "fixed_interval") return HighLevelMode::fixed_interval;
  throw ConfigError("high_level_mode: expected per_episode or fixed_interval, got '" + name + "'");
}

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

bool non_negative_integer(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

}  // namespace

void validate(const TrainConfig& c) {
  try {
    EnvSpec::from_name(c.env, c.max_episode_steps);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("env: ") + e.what());
  }
  require(c.max_episode_steps >= 1, "max_episode_steps", "must be >= 1");
  require(c.n >= 1, "N", "must be >= 1");
  require(!c.hidden_dims.empty(), "hidden_dims", "need at least one hidden layer");
  for (auto d : c.hidden_dims) require(d >= 1, "hidden_dims", "every layer width must be >= 1");
  try {
    const auto act = activation_from_string(c.hidden_activation);
    require(act != Activation::identity, "hidden_activation", "must be relu or tanh");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("hidden_activation: ") + e.what());
  }
  require(std::isfinite(c.gamma) && c.gamma >= 0.0 && c.gamma < 1.0, "gamma", "must lie in [0, 1)");
  require(finite_positive(c.adam_lr), "adam_lr", "must be > 0");
  require(c.batch_size >= 1, "batch_size", "must be >= 1");
  require(c.update_interval >= 1, "update_interval", "must be >= 1");
  require(c.buffer_capacity >= 1, "buffer_capacity", "must be >= 1");
  require(std::isfinite(c.rho0) && c.rho0 > 0.0 && c.rho0 < 0.5, "rho0",
          "must lie in (0, 1/2) for a zero-stable multi-step rule");
  require(finite_positive(c.h_highlevel), "h_highlevel", "must be > 0");
  require(std::isfinite(c.tau) && c.tau > 0.0 && c.tau < 1.0, "tau", "must lie in (0, 1)");
  require(std::isfinite(c.exploration_std) && c.exploration_std >= 0.0, "exploration_std", "must be >= 0");
  require(std::isfinite(c.smoothing_std) && c.smoothing_std >= 0.0, "smoothing_std", "must be >= 0");
  require(c.max_episodes >= 0, "max_episodes", "must be >= 0");
  if (c.high_level_fraction)
    require(std::isfinite(*c.high_level_fraction) && *c.high_level_fraction > 0.0 && *c.high_level_fraction <= 1.0,
            "high_level_fraction", "must lie in (0, 1]");
  require(c.policy_delay >= 1, "policy_delay", "must be >= 1");
  require(!c.exclude_self || c.n >= 2, "exclude_self", "needs N >= 2");
  require(c.eval_interval >= 0, "eval_interval", "must be >= 0");
  require(c.eval_episodes >= 1, "eval_episodes", "must be >= 1");
  require(c.checkpoint_interval >= 0, "checkpoint_interval", "must be >= 0");
}

TrainConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  static const std::set<std::string> known{
      "env", "max_episode_steps", "N", "hidden_dims", "hidden_activation", "gamma", "adam_lr", "batch_size",
      "update_interval", "buffer_capacity", "rho0", "h_highlevel", "tau", "exploration_std", "smoothing_std",
      "max_episodes", "high_level_mode", "high_level_fraction", "single_step_ablation", "policy_delay",
      "exclude_self", "shared_pair", "seed", "eval_interval", "eval_episodes", "checkpoint_interval"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError(key + ": unknown configuration field");

  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    using Field = std::decay_t<decltype(field)>;
    if constexpr (std::is_unsigned_v<Field> && !std::is_same_v<Field, bool>) {
      if (!non_negative_integer(j.at(key))) throw ConfigError(std::string(key) + ": expected a non-negative integer");
    }
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string(key) + ": " + e.what());
    }
  };
  get("env", c.env);
  get("max_episode_steps", c.max_episode_steps);
  get("N", c.n);
  if (j.contains("hidden_dims")) {
    const auto& dims = j.at("hidden_dims");
    if (!dims.is_array()) throw ConfigError("hidden_dims: expected an array");
    for (const auto& d : dims)
      if (!non_negative_integer(d)) throw ConfigError("hidden_dims: expected non-negative integers");
    get("hidden_dims", c.hidden_dims);
  }
  get("hidden_activation", c.hidden_activation);
  get("gamma", c.gamma);
  get("adam_lr", c.adam_lr);
  get("batch_size", c.batch_size);
  get("update_interval", c.update_interval);
  get("buffer_capacity", c.buffer_capacity);
  get("rho0", c.rho0);
  get("h_highlevel", c.h_highlevel);
  get("tau", c.tau);
  get("exploration_std", c.exploration_std);
  get("smoothing_std", c.smoothing_std);
  get("max_episodes", c.max_episodes);
  if (j.contains("high_level_mode")) {
    std::string mode;
    get("high_level_mode", mode);
    c.high_level_mode = high_level_mode_from_string(mode);
  }
  if (j.contains("high_level_fraction") && !j.at("high_level_fraction").is_null()) {
    double f = 0.0;
    get("high_level_fraction", f);
    c.high_level_fraction = f;
  }
  get("single_step_ablation", c.single_step_ablation);
  get("policy_delay", c.policy_delay);
  get("exclude_self", c.exclude_self);
  get("shared_pair", c.shared_pair);
  get("seed", c.seed);
  get("eval_interval", c.eval_interval);
  get("eval_episodes", c.eval_episodes);
  get("checkpoint_interval", c.checkpoint_interval);
  validate(c);
  return c;
}

nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["env"] = c.env;
  j["max_episode_steps"] = c.max_episode_steps;
  j["N"] = c.n;
  j["hidden_dims"] = c.hidden_dims;
  j["hidden_activation"] = c.hidden_activation;
  j["gamma"] = c.gamma;
  j["adam_lr"] = c.adam_lr;
  j["batch_size"] = c.batch_size;
  j["update_interval"] = c.update_interval;
  j["buffer_capacity"] = c.buffer_capacity;
  j["rho0"] = c.rho0;
  j["h_highlevel"] = c.h_highlevel;
  j["tau"] = c.tau;
  j["exploration_std"] = c.exploration_std;
  j["smoothing_std"] = c.smoothing_std;
  j["max_episodes"] = c.max_episodes;
  j["high_level_mode"] = to_string(c.high_level_mode);
  j["high_level_fraction"] = c.high_level_fraction ? nlohmann::json(*c.high_level_fraction) : nlohmann::json(nullptr);
  j["single_step_ablation"] = c.single_step_ablation;
  j["policy_delay"] = c.policy_delay;
  j["exclude_self"] = c.exclude_self;
  j["shared_pair"] = c.shared_pair;
  j["seed"] = c.seed;
  j["eval_interval"] = c.eval_interval;
  j["eval_episodes"] = c.eval_episodes;
  j["checkpoint_interval"] = c.checkpoint_interval;
  return j;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  return config_from_json(j);
}

void save_config(const TrainConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << config_to_json(cfg).dump(2) << '\n';
}

}  // namespace hed
