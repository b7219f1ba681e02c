#include "hed/learner.hpp"

#include <algorithm>
#include <stdexcept>

namespace hed {

void NoiseSpec::validate() const {
  if (!(exploration_std >= 0.0) || !(smoothing_std >= 0.0))
    throw std::invalid_argument("NoiseSpec: standard deviations must be >= 0");
}

ActionScaler::ActionScaler(std::vector<double> low, std::vector<double> high)
    : low_(std::move(low)), high_(std::move(high)) {
  if (low_.size() != high_.size() || low_.empty()) throw std::invalid_argument("ActionScaler: bad bounds");
}

Matrix ActionScaler::squash(const Matrix& unit) const {
  if (unit.rows != dim()) throw std::invalid_argument("ActionScaler::squash: dimension mismatch");
  Matrix out(unit.rows, unit.cols);
  for (std::size_t d = 0; d < unit.rows; ++d) {
    const double lo = low_[d];
    const double span = high_[d] - lo;
    for (std::size_t b = 0; b < unit.cols; ++b) out(d, b) = lo + 0.5 * (unit(d, b) + 1.0) * span;
  }
  return out;
}

void ActionScaler::clip(Matrix& actions) const {
  for (std::size_t d = 0; d < actions.rows; ++d)
    for (double& v : actions.row(d)) v = std::clamp(v, low_[d], high_[d]);
}

void ActionScaler::scale_gradient(Matrix& d_action, double factor) const {
  for (std::size_t d = 0; d < d_action.rows; ++d) {
    const double s = half_range(d) * factor;
    for (double& v : d_action.row(d)) v *= s;
  }
}

MlpSpec policy_spec(const EnvSpec& env, const NetworkSpec& net) {
  return {env.state_dim, net.hidden, env.action_dim, net.hidden_activation, Activation::tanh};
}

MlpSpec critic_spec(const EnvSpec& env, const NetworkSpec& net) {
  return {env.state_dim + env.action_dim, net.hidden, 1, net.hidden_activation, Activation::identity};
}

Matrix gaussian_noise(std::size_t rows, std::size_t cols, double std, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = normal(rng, std);
  return m;
}

Matrix row_block(const Matrix& m, std::size_t first, std::size_t count) {
  if (first + count > m.rows) throw std::out_of_range("row_block: rows out of range");
  Matrix out(count, m.cols);
  std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(first * m.cols),
            m.data.begin() + static_cast<std::ptrdiff_t>((first + count) * m.cols), out.data.begin());
  return out;
}

BaseLearner::BaseLearner(const EnvSpec& env, const NetworkSpec& net, const AdamConfig& adam, std::uint64_t seed,
                         std::size_t index)
    : index_(index),
      scaler_(env.action_low, env.action_high),
      policy_(Mlp::init(policy_spec(env, net), derive_seed(seed, index, 0))),
      critics_{Mlp::init(critic_spec(env, net), derive_seed(seed, index, 1)),
               Mlp::init(critic_spec(env, net), derive_seed(seed, index, 2))},
      targets_{critics_[0], critics_[1]},
      policy_opt_(policy_.param_count(), adam),
      critic_opts_{AdamState(critics_[0].param_count(), adam), AdamState(critics_[1].param_count(), adam)} {}

std::vector<double> BaseLearner::act(std::span<const double> state) const {
  return act(Matrix::from_column(state)).column(0);
}

Matrix BaseLearner::act(const Matrix& states, ForwardCache* cache) const {
  return scaler_.squash(policy_.forward(states, cache));
}

std::vector<double> BaseLearner::td_targets(const TransitionBatch& batch, double gamma, const Matrix& next_actions,
                                            const Matrix& noise) const {
  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("td_targets: empty batch");
  if (next_actions.cols != n || noise.cols != n || next_actions.rows != noise.rows)
    throw std::invalid_argument("td_targets: shape mismatch");
  Matrix a_next = next_actions;
  for (std::size_t k = 0; k < a_next.data.size(); ++k) a_next.data[k] += noise.data[k];
  scaler_.clip(a_next);
  const Matrix sa = stack_rows(batch.s_next, a_next);
  const Matrix q1 = targets_[0].forward(sa);
  const Matrix q2 = targets_[1].forward(sa);
  std::vector<double> y(n);
  for (std::size_t b = 0; b < n; ++b)
    y[b] = batch.terminated[b] ? batch.r[b] : batch.r[b] + gamma * std::min(q1(0, b), q2(0, b));
  return y;
}

std::vector<double> BaseLearner::td_targets(const TransitionBatch& batch, double gamma, double smoothing_std,
                                            Rng& rng) const {
  const Matrix noise = gaussian_noise(scaler_.dim(), batch.size(), smoothing_std, rng);
  return td_targets(batch, gamma, act(batch.s_next), noise);
}

double BaseLearner::critic_loss(std::size_t k, const TransitionBatch& batch, std::span<const double> targets) const {
  if (targets.size() != batch.size()) throw std::invalid_argument("critic_loss: target count mismatch");
  const Matrix q = critics_.at(k).forward(stack_rows(batch.s, batch.a));
  double sum = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double e = q(0, b) - targets[b];
    sum += e * e;
  }
  return sum / static_cast<double>(batch.size());
}

namespace {

// Loss and parameter gradient of mean (Q - y)^2 for one critic network.
double mse_with_gradient(const Mlp& critic, const Matrix& inputs, std::span<const double> targets, ParamVector& grad) {
  ForwardCache cache;
  const Matrix q = critic.forward(inputs, &cache);
  const std::size_t n = targets.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix d_q(1, n);
  double sum = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const double e = q(0, b) - targets[b];
    sum += e * e;
    d_q(0, b) = 2.0 * e * inv_n;
  }
  grad.assign(critic.param_count(), 0.0);
  critic.backward(cache, d_q, grad, nullptr);
  return sum * inv_n;
}

}  // namespace

ParamVector BaseLearner::critic_loss_gradient(std::size_t k, const TransitionBatch& batch,
                                              std::span<const double> targets) const {
  if (targets.size() != batch.size()) throw std::invalid_argument("critic_loss_gradient: target count mismatch");
  ParamVector grad;
  mse_with_gradient(critics_.at(k), stack_rows(batch.s, batch.a), targets, grad);
  return grad;
}

double BaseLearner::critic_update(const TransitionBatch& batch, std::span<const double> targets) {
  if (targets.size() != batch.size() || batch.size() == 0)
    throw std::invalid_argument("critic_update: target count mismatch");
  const Matrix inputs = stack_rows(batch.s, batch.a);
  double first_loss = 0.0;
  ParamVector grad;
  for (std::size_t k = 0; k < 2; ++k) {
    const double loss = mse_with_gradient(critics_[k], inputs, targets, grad);
    if (k == 0) first_loss = loss;
    critic_opts_[k].step(critics_[k].params(), grad, Direction::descent);
  }
  ++critic_updates_;
  return first_loss;
}

double BaseLearner::policy_objective(const TransitionBatch& batch) const {
  const Matrix q = critics_[0].forward(stack_rows(batch.s, act(batch.s)));
  double sum = 0.0;
  for (double v : q.data) sum += v;
  return sum / static_cast<double>(batch.size());
}

ParamVector BaseLearner::policy_gradient(const TransitionBatch& batch) const {
  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("policy_gradient: empty batch");
  ForwardCache policy_cache;
  const Matrix a = act(batch.s, &policy_cache);
  ForwardCache critic_cache;
  critics_[0].forward(stack_rows(batch.s, a), &critic_cache);

  Matrix d_q(1, n, 1.0 / static_cast<double>(n));
  Matrix d_input;
  critics_[0].backward(critic_cache, d_q, {}, &d_input);
  Matrix d_action = row_block(d_input, batch.s.rows, a.rows);
  scaler_.scale_gradient(d_action);

  ParamVector grad(policy_.param_count(), 0.0);
  policy_.backward(policy_cache, d_action, grad, nullptr);
  return grad;
}

void BaseLearner::low_level_policy_update(const TransitionBatch& batch) {
  const ParamVector grad = policy_gradient(batch);
  policy_opt_.step(policy_.params(), grad, Direction::ascent);
  ++policy_updates_;
}

void BaseLearner::target_sync(double tau) {
  for (std::size_t k = 0; k < 2; ++k) polyak_update(targets_[k].params(), critics_[k].params(), tau);
}

}  // namespace hed
