#include "hed/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hed {
namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string("env_step: non-finite ") + what);
}

StepResult step_pendulum(std::span<const double> state, std::span<const double> a) {
  using namespace pendulum;
  const double theta = std::atan2(state[1], state[0]);
  const double theta_dot = state[2];
  const double u = a[0];

  StepResult r;
  const double wrapped = wrap_angle(theta);
  r.reward = -(wrapped * wrapped + 0.1 * theta_dot * theta_dot + 0.001 * u * u);

  const double accel = 3.0 * kGravity / (2.0 * kLength) * std::sin(theta) + 3.0 / (kMass * kLength * kLength) * u;
  const double new_dot = std::clamp(theta_dot + accel * kDt, -kMaxSpeed, kMaxSpeed);
  const double new_theta = theta + new_dot * kDt;
  r.next_state = {std::cos(new_theta), std::sin(new_theta), new_dot};
  return r;
}

// Point mass in `dims` dimensions: state = (positions, velocities).
StepResult step_point_mass(std::span<const double> state, std::span<const double> a, std::size_t dims) {
  constexpr double kDt = 0.1;
  constexpr double kGoalRadius = 0.05;
  StepResult r;
  r.next_state.resize(2 * dims);
  double pos_sq = 0.0;
  double act_sq = 0.0;
  for (std::size_t d = 0; d < dims; ++d) {
    const double v = state[dims + d] + kDt * a[d];
    const double p = state[d] + kDt * v;
    r.next_state[d] = p;
    r.next_state[dims + d] = v;
    pos_sq += p * p;
    act_sq += a[d] * a[d];
  }
  r.reward = -pos_sq - 0.01 * act_sq;
  r.terminated = std::sqrt(pos_sq) < kGoalRadius;
  return r;
}

}  // namespace

EnvSpec EnvSpec::make(EnvKind kind, int max_episode_steps) {
  EnvSpec s;
  s.kind = kind;
  s.max_episode_steps = max_episode_steps;
  switch (kind) {
    case EnvKind::pendulum:
      s.name = "pendulum";
      s.state_dim = 3;
      s.action_dim = 1;
      s.action_low = {-pendulum::kMaxTorque};
      s.action_high = {pendulum::kMaxTorque};
      break;
    case EnvKind::pointmass2d:
      s.name = "pointmass2d";
      s.state_dim = 4;
      s.action_dim = 2;
      s.action_low = {-1.0, -1.0};
      s.action_high = {1.0, 1.0};
      break;
    case EnvKind::double_integrator:
      s.name = "double_integrator";
      s.state_dim = 2;
      s.action_dim = 1;
      s.action_low = {-1.0};
      s.action_high = {1.0};
      break;
  }
  s.validate();
  return s;
}

EnvSpec EnvSpec::from_name(const std::string& name, int max_episode_steps) {
  if (name == "pendulum") return make(EnvKind::pendulum, max_episode_steps);
  if (name == "pointmass2d") return make(EnvKind::pointmass2d, max_episode_steps);
  if (name == "double_integrator") return make(EnvKind::double_integrator, max_episode_steps);
  throw std::invalid_argument("unknown environment '" + name + "'");
}

void EnvSpec::validate() const {
  if (state_dim == 0 || action_dim == 0) throw std::invalid_argument("EnvSpec: dims must be >= 1");
  if (action_low.size() != action_dim || action_high.size() != action_dim)
    throw std::invalid_argument("EnvSpec: action bounds do not match action_dim");
  for (std::size_t k = 0; k < action_dim; ++k) {
    if (!std::isfinite(action_low[k]) || !std::isfinite(action_high[k]) || !(action_low[k] < action_high[k]))
      throw std::invalid_argument("EnvSpec: action bounds must be finite with low < high");
  }
  if (max_episode_steps < 1) throw std::invalid_argument("EnvSpec: max_episode_steps must be >= 1");
}

double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(theta + std::numbers::pi, two_pi);
  if (r <= 0.0) r += two_pi;
  return r - std::numbers::pi;
}

std::vector<double> clip_action(const EnvSpec& spec, std::span<const double> action) {
  if (action.size() != spec.action_dim) throw std::invalid_argument("clip_action: action dimension mismatch");
  std::vector<double> out(action.size());
  for (std::size_t k = 0; k < action.size(); ++k) out[k] = std::clamp(action[k], spec.action_low[k], spec.action_high[k]);
  return out;
}

std::vector<double> env_reset(const EnvSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case EnvKind::pendulum: {
      const double theta = uniform(rng, -std::numbers::pi, std::numbers::pi);
      const double theta_dot = uniform(rng, -1.0, 1.0);
      return {std::cos(theta), std::sin(theta), theta_dot};
    }
    case EnvKind::pointmass2d: {
      const double px = uniform(rng, -1.0, 1.0);
      const double py = uniform(rng, -1.0, 1.0);
      return {px, py, 0.0, 0.0};
    }
    case EnvKind::double_integrator:
      return {uniform(rng, -1.0, 1.0), 0.0};
  }
  throw std::logic_error("env_reset: unknown environment");
}

std::vector<double> env_reset(const EnvSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return env_reset(spec, rng);
}

StepResult env_step(const EnvSpec& spec, std::span<const double> state, std::span<const double> action,
                    int step_index) {
  if (state.size() != spec.state_dim) throw std::invalid_argument("env_step: state dimension mismatch");
  if (action.size() != spec.action_dim) throw std::invalid_argument("env_step: action dimension mismatch");
  require_finite(state, "state");
  require_finite(action, "action");
  const auto a = clip_action(spec, action);

  StepResult r;
  switch (spec.kind) {
    case EnvKind::pendulum: r = step_pendulum(state, a); break;
    case EnvKind::pointmass2d: r = step_point_mass(state, a, 2); break;
    case EnvKind::double_integrator: r = step_point_mass(state, a, 1); break;
  }
  r.truncated = !r.terminated && step_index + 1 >= spec.max_episode_steps;
  return r;
}

}  // namespace hed
