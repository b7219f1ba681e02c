#include "hed/ensemble.hpp"

#include <stdexcept>

namespace hed {

Ensemble::Ensemble(const EnvSpec& env, std::size_t n, const NetworkSpec& net, const AdamConfig& adam,
                   std::uint64_t seed)
    : env_(env), net_(net) {
  if (n == 0) throw std::invalid_argument("Ensemble: need at least one learner");
  env_.validate();
  learners_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) learners_.emplace_back(env_, net_, adam, seed, i);
  // Index n is reserved for the central critic's seed stream.
  central_ = Mlp::init(critic_spec(env_, net_), derive_seed(seed, n + 1000, 1));
  central_target_ = central_;
  central_opt_ = AdamState(central_.param_count(), adam);
}

Matrix Ensemble::mean_action(const std::vector<Matrix>& learner_actions) {
  if (learner_actions.empty()) throw std::invalid_argument("mean_action: no actions");
  Matrix sum = learner_actions.front();
  for (std::size_t i = 1; i < learner_actions.size(); ++i) {
    const auto& a = learner_actions[i];
    if (a.rows != sum.rows || a.cols != sum.cols) throw std::invalid_argument("mean_action: shape mismatch");
    for (std::size_t k = 0; k < sum.data.size(); ++k) sum.data[k] += a.data[k];
  }
  const double n = static_cast<double>(learner_actions.size());
  for (double& v : sum.data) v /= n;
  return sum;
}

Matrix Ensemble::act(const Matrix& states) const {
  std::vector<Matrix> actions;
  actions.reserve(learners_.size());
  for (const auto& l : learners_) actions.push_back(l.act(states));
  return mean_action(actions);
}

std::vector<double> Ensemble::act(std::span<const double> state) const {
  return act(Matrix::from_column(state)).column(0);
}

std::vector<double> Ensemble::central_targets(const TransitionBatch& batch, double gamma,
                                              const Matrix& next_ensemble_actions) const {
  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("central_targets: empty batch");
  if (next_ensemble_actions.cols != n) throw std::invalid_argument("central_targets: shape mismatch");
  const Matrix q = central_target_.forward(stack_rows(batch.s_next, next_ensemble_actions));
  std::vector<double> y(n);
  for (std::size_t b = 0; b < n; ++b) y[b] = batch.terminated[b] ? batch.r[b] : batch.r[b] + gamma * q(0, b);
  return y;
}

std::vector<double> Ensemble::central_targets(const TransitionBatch& batch, double gamma) const {
  return central_targets(batch, gamma, act(batch.s_next));
}

double Ensemble::central_loss(const TransitionBatch& batch, std::span<const double> targets) const {
  if (targets.size() != batch.size()) throw std::invalid_argument("central_loss: target count mismatch");
  const Matrix q = central_.forward(stack_rows(batch.s, batch.a));
  double sum = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double e = q(0, b) - targets[b];
    sum += e * e;
  }
  return sum / static_cast<double>(batch.size());
}

ParamVector Ensemble::central_loss_gradient(const TransitionBatch& batch, std::span<const double> targets) const {
  if (targets.size() != batch.size()) throw std::invalid_argument("central_loss_gradient: target count mismatch");
  ForwardCache cache;
  const Matrix q = central_.forward(stack_rows(batch.s, batch.a), &cache);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Matrix d_q(1, batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) d_q(0, b) = 2.0 * (q(0, b) - targets[b]) * inv_n;
  ParamVector grad(central_.param_count(), 0.0);
  central_.backward(cache, d_q, grad, nullptr);
  return grad;
}

double Ensemble::central_critic_update(const TransitionBatch& batch, double gamma, double tau,
                                       const Matrix* next_ensemble_actions) {
  const auto targets = next_ensemble_actions ? central_targets(batch, gamma, *next_ensemble_actions)
                                             : central_targets(batch, gamma);
  const double loss = central_loss(batch, targets);
  const ParamVector grad = central_loss_gradient(batch, targets);
  central_opt_.step(central_.params(), grad, Direction::descent);
  polyak_update(central_target_.params(), central_.params(), tau);
  ++central_updates_;
  return loss;
}

double Ensemble::ensemble_objective(const TransitionBatch& batch) const {
  const Matrix q = central_.forward(stack_rows(batch.s, act(batch.s)));
  double sum = 0.0;
  for (double v : q.data) sum += v;
  return sum / static_cast<double>(batch.size());
}

std::vector<ParamVector> Ensemble::ensemble_policy_gradients(const TransitionBatch& batch) const {
  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("ensemble_policy_gradients: empty batch");
  const std::size_t N = learners_.size();

  std::vector<ForwardCache> caches(N);
  std::vector<Matrix> actions(N);
  for (std::size_t i = 0; i < N; ++i) actions[i] = learners_[i].act(batch.s, &caches[i]);
  const Matrix a_e = mean_action(actions);

  ForwardCache critic_cache;
  central_.forward(stack_rows(batch.s, a_e), &critic_cache);
  Matrix d_q(1, n, 1.0 / static_cast<double>(n));
  Matrix d_input;
  central_.backward(critic_cache, d_q, {}, &d_input);
  // d pi_e / d a_i = I / N
  Matrix d_action = row_block(d_input, batch.s.rows, a_e.rows);
  for (double& v : d_action.data) v /= static_cast<double>(N);

  std::vector<ParamVector> grads(N);
  for (std::size_t i = 0; i < N; ++i) {
    Matrix d_unit = d_action;
    learners_[i].scaler().scale_gradient(d_unit);
    grads[i].assign(learners_[i].policy().param_count(), 0.0);
    learners_[i].policy().backward(caches[i], d_unit, grads[i], nullptr);
  }
  return grads;
}

ParamVector Ensemble::ensemble_policy_gradient(const TransitionBatch& batch, std::size_t i) const {
  if (i >= learners_.size()) throw std::out_of_range("ensemble_policy_gradient: learner index");
  return ensemble_policy_gradients(batch)[i];
}

HighLevelSession start_high_level_session(const Ensemble& e, double rho0, double h, Rng& rng,
                                          SessionOptions options) {
  const std::size_t N = e.size();
  HighLevelSession s;
  s.coeffs = coeffs_from_rho0(rho0, h);
  if (options.exclude_self && N < 2) throw std::invalid_argument("start_high_level_session: exclude_self needs N >= 2");

  auto draw = [&](std::size_t self) {
    if (!options.exclude_self) return uniform_index(rng, N);
    std::size_t k = uniform_index(rng, N - 1);
    return k >= self ? k + 1 : k;
  };

  std::pair<std::size_t, std::size_t> shared{};
  if (options.shared_pair) {
    // exclude_self has no effect on a pair shared by every learner.
    const std::size_t p = uniform_index(rng, N);
    const std::size_t q = uniform_index(rng, N);
    shared = {p, q};
  }
  for (std::size_t i = 0; i < N; ++i) {
    std::pair<std::size_t, std::size_t> pq = shared;
    if (!options.shared_pair) {
      const std::size_t p = draw(i);
      const std::size_t q = draw(i);
      pq = {p, q};
    }
    s.pairs.push_back(pq);
    s.windows.emplace_back(e.learner(pq.first).policy().flatten(), e.learner(pq.second).policy().flatten(),
                           e.learner(i).policy().flatten());
  }
  return s;
}

void high_level_update(Ensemble& e, HighLevelSession& session, const TransitionBatch& batch, bool single_step) {
  const std::size_t N = e.size();
  if (session.windows.size() != N) throw std::invalid_argument("high_level_update: session/ensemble mismatch");
  for (std::size_t i = 0; i < N; ++i) {
    if (session.windows[i].dim() != e.learner(i).policy().param_count())
      throw std::invalid_argument("high_level_update: window dimension mismatch");
  }

  const auto grads = e.ensemble_policy_gradients(batch);
  for (std::size_t i = 0; i < N; ++i) {
    auto& window = session.windows[i];
    ParamVector next;
    if (single_step) {
      next = window.curr();
      for (std::size_t k = 0; k < next.size(); ++k) next[k] += session.coeffs.h * grads[i][k];
    } else {
      next = multistep_update(window, grads[i], session.coeffs);
    }
    e.learner(i).policy().unflatten(next);
    window.push(std::move(next));
  }
  ++session.iterations;
}

}  // namespace hed
