#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hed/envs.hpp"
#include "hed/mlp.hpp"
#include "hed/replay.hpp"

namespace hed {

struct NoiseSpec {
  double exploration_std = 0.1;
  double smoothing_std = 0.1;
  void validate() const;
};

/// Hidden-layer shape shared by every policy and critic network.
struct NetworkSpec {
  std::vector<std::size_t> hidden{64, 64};
  Activation hidden_activation = Activation::relu;
};

/// Maps tanh outputs in (-1, 1) onto the box [low, high].
class ActionScaler {
 public:
  ActionScaler() = default;
  ActionScaler(std::vector<double> low, std::vector<double> high);

  std::size_t dim() const { return low_.size(); }
  double half_range(std::size_t d) const { return 0.5 * (high_[d] - low_[d]); }

  Matrix squash(const Matrix& unit) const;
  void clip(Matrix& actions) const;
  /// Chain rule through squash: scales row d of an action gradient by half_range(d).
  void scale_gradient(Matrix& d_action, double factor = 1.0) const;

 private:
  std::vector<double> low_;
  std::vector<double> high_;
};

MlpSpec policy_spec(const EnvSpec& env, const NetworkSpec& net);
MlpSpec critic_spec(const EnvSpec& env, const NetworkSpec& net);

/// One TD3-style base learner: deterministic policy, twin critics and their targets.
class BaseLearner {
 public:
  BaseLearner(const EnvSpec& env, const NetworkSpec& net, const AdamConfig& adam, std::uint64_t seed,
              std::size_t index);

  std::size_t index() const { return index_; }
  const ActionScaler& scaler() const { return scaler_; }

  const Mlp& policy() const { return policy_; }
  Mlp& policy() { return policy_; }
  const Mlp& critic(std::size_t k) const { return critics_.at(k); }
  Mlp& critic(std::size_t k) { return critics_.at(k); }
  const Mlp& target(std::size_t k) const { return targets_.at(k); }
  Mlp& target(std::size_t k) { return targets_.at(k); }
  const AdamState& policy_optimizer() const { return policy_opt_; }
  AdamState& policy_optimizer() { return policy_opt_; }
  const AdamState& critic_optimizer(std::size_t k) const { return critic_opts_.at(k); }
  AdamState& critic_optimizer(std::size_t k) { return critic_opts_.at(k); }

  std::vector<double> act(std::span<const double> state) const;
  /// Squashed actions for a batch of states; cache receives the policy forward pass.
  Matrix act(const Matrix& states, ForwardCache* cache = nullptr) const;

  /// y = r for terminated samples, otherwise r + gamma * min_k target_k(s', clip(next_actions + noise)).
  std::vector<double> td_targets(const TransitionBatch& batch, double gamma, const Matrix& next_actions,
                                 const Matrix& noise) const;
  std::vector<double> td_targets(const TransitionBatch& batch, double gamma, double smoothing_std, Rng& rng) const;

  /// Mean squared TD error of critic k and its gradient with respect to the critic parameters.
  double critic_loss(std::size_t k, const TransitionBatch& batch, std::span<const double> targets) const;
  ParamVector critic_loss_gradient(std::size_t k, const TransitionBatch& batch, std::span<const double> targets) const;

  /// One Adam descent step on both critics toward the same targets; returns critic 1's pre-step loss.
  double critic_update(const TransitionBatch& batch, std::span<const double> targets);

  /// Mean of critic1(s, pi(s)) over the batch and its gradient with respect to the policy.
  double policy_objective(const TransitionBatch& batch) const;
  ParamVector policy_gradient(const TransitionBatch& batch) const;
  void low_level_policy_update(const TransitionBatch& batch);

  void target_sync(double tau);

  std::uint64_t critic_updates() const { return critic_updates_; }
  std::uint64_t policy_updates() const { return policy_updates_; }
  void set_counters(std::uint64_t critic_updates, std::uint64_t policy_updates) {
    critic_updates_ = critic_updates;
    policy_updates_ = policy_updates;
  }

 private:
  std::size_t index_;
  ActionScaler scaler_;
  Mlp policy_;
  std::array<Mlp, 2> critics_;
  std::array<Mlp, 2> targets_;
  AdamState policy_opt_;
  std::array<AdamState, 2> critic_opts_;
  std::uint64_t critic_updates_ = 0;
  std::uint64_t policy_updates_ = 0;
};

/// Draws an [action_dim x batch] matrix of N(0, std^2) noise.
Matrix gaussian_noise(std::size_t rows, std::size_t cols, double std, Rng& rng);

/// Rows [first, first + count) of m.
Matrix row_block(const Matrix& m, std::size_t first, std::size_t count);

}  // namespace hed
