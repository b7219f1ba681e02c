#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hed/learner.hpp"
#include "hed/multistep.hpp"

namespace hed {

/// N base learners plus the central critic that scores the averaged policy.
class Ensemble {
 public:
  Ensemble(const EnvSpec& env, std::size_t n, const NetworkSpec& net, const AdamConfig& adam, std::uint64_t seed);

  std::size_t size() const { return learners_.size(); }
  const EnvSpec& env() const { return env_; }
  const NetworkSpec& network() const { return net_; }

  std::vector<BaseLearner>& learners() { return learners_; }
  const std::vector<BaseLearner>& learners() const { return learners_; }
  BaseLearner& learner(std::size_t i) { return learners_.at(i); }
  const BaseLearner& learner(std::size_t i) const { return learners_.at(i); }

  Mlp& central() { return central_; }
  const Mlp& central() const { return central_; }
  Mlp& central_target() { return central_target_; }
  const Mlp& central_target() const { return central_target_; }
  AdamState& central_optimizer() { return central_opt_; }
  const AdamState& central_optimizer() const { return central_opt_; }

  /// Mean of the learners' squashed actions.
  std::vector<double> act(std::span<const double> state) const;
  Matrix act(const Matrix& states) const;
  static Matrix mean_action(const std::vector<Matrix>& learner_actions);

  /// r for terminated samples, otherwise r + gamma * central_target(s', pi_e(s')). No smoothing noise.
  std::vector<double> central_targets(const TransitionBatch& batch, double gamma,
                                      const Matrix& next_ensemble_actions) const;
  std::vector<double> central_targets(const TransitionBatch& batch, double gamma) const;

  double central_loss(const TransitionBatch& batch, std::span<const double> targets) const;
  ParamVector central_loss_gradient(const TransitionBatch& batch, std::span<const double> targets) const;

  /// One Adam descent step on the central critic followed by a Polyak sync of its target.
  /// Returns the pre-step loss.
  double central_critic_update(const TransitionBatch& batch, double gamma, double tau,
                               const Matrix* next_ensemble_actions = nullptr);

  /// Mean of central(s, pi_e(s)) over the batch.
  double ensemble_objective(const TransitionBatch& batch) const;

  /// Gradient of ensemble_objective with respect to learner i's policy parameters:
  /// dQe/da at the ensemble action, times 1/N, times the Jacobian of learner i's action.
  ParamVector ensemble_policy_gradient(const TransitionBatch& batch, std::size_t i) const;
  /// All N gradients from a single central-critic backward pass.
  std::vector<ParamVector> ensemble_policy_gradients(const TransitionBatch& batch) const;

  std::uint64_t central_updates() const { return central_updates_; }
  void set_central_updates(std::uint64_t n) { central_updates_ = n; }

 private:
  EnvSpec env_;
  NetworkSpec net_;
  std::vector<BaseLearner> learners_;
  Mlp central_;
  Mlp central_target_;
  AdamState central_opt_;
  std::uint64_t central_updates_ = 0;
};

struct SessionOptions {
  bool exclude_self = false;  // draw p, q from learners other than i
  bool shared_pair = false;   // one (p, q) for the whole ensemble instead of one per learner
};

/// Per-learner bootstrap windows seeded with (theta_p, theta_q, theta_i).
struct HighLevelSession {
  std::vector<BootstrapWindow> windows;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (p, q) per learner
  MultiStepCoefficients coeffs;
  std::uint64_t iterations = 0;
};

HighLevelSession start_high_level_session(const Ensemble& e, double rho0, double h, Rng& rng,
                                          SessionOptions options = {});

/// One synchronous multi-step sweep: every learner's ensemble gradient is computed
/// before any policy is written. single_step replaces the recurrence with theta + h g.
void high_level_update(Ensemble& e, HighLevelSession& session, const TransitionBatch& batch, bool single_step = false);

}  // namespace hed
