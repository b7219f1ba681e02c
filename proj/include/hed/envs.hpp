#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hed/rng.hpp"

namespace hed {

enum class EnvKind { pendulum, pointmass2d, double_integrator };

struct EnvSpec {
  EnvKind kind = EnvKind::pendulum;
  std::string name = "pendulum";
  std::size_t state_dim = 3;
  std::size_t action_dim = 1;
  std::vector<double> action_low{-2.0};
  std::vector<double> action_high{2.0};
  int max_episode_steps = 200;

  static EnvSpec make(EnvKind kind, int max_episode_steps = 200);
  static EnvSpec from_name(const std::string& name, int max_episode_steps = 200);
  void validate() const;
};

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
};

/// Maps an angle to (-pi, pi].
double wrap_angle(double theta);

std::vector<double> clip_action(const EnvSpec& spec, std::span<const double> action);

std::vector<double> env_reset(const EnvSpec& spec, Rng& rng);
std::vector<double> env_reset(const EnvSpec& spec, std::uint64_t seed);

/// Pure dynamics. step_index counts steps already taken in the episode and only
/// decides time-limit truncation. Throws on non-finite state or action.
StepResult env_step(const EnvSpec& spec, std::span<const double> state, std::span<const double> action,
                    int step_index = 0);

namespace pendulum {
inline constexpr double kGravity = 10.0;
inline constexpr double kMass = 1.0;
inline constexpr double kLength = 1.0;
inline constexpr double kDt = 0.05;
inline constexpr double kMaxSpeed = 8.0;
inline constexpr double kMaxTorque = 2.0;
}  // namespace pendulum

/// Episode-level interface used by evaluation; lets tests plug in stub dynamics.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<double> reset(Rng& rng) const = 0;
  virtual StepResult step(std::span<const double> state, std::span<const double> action, int step_index) const = 0;
};

class BuiltinEnvironment final : public Environment {
 public:
  explicit BuiltinEnvironment(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(Rng& rng) const override { return env_reset(spec_, rng); }
  StepResult step(std::span<const double> state, std::span<const double> action, int step_index) const override {
    return env_step(spec_, state, action, step_index);
  }

 private:
  EnvSpec spec_;
};

}  // namespace hed
