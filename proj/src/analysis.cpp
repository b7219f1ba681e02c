#include "hed/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "hed/ensemble.hpp"
#include "hed/rng.hpp"

namespace hed::analysis {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// g_i = dQe/dtheta_i = C * (1/N) * phi for every learner.
std::vector<double> ensemble_gradient(const LinearPolicyScenario& sc) {
  std::vector<double> g(sc.phi);
  const double f = sc.c / static_cast<double>(sc.n());
  for (double& v : g) v *= f;
  return g;
}

}  // namespace

void LinearPolicyScenario::validate() const {
  if (thetas.empty()) throw std::invalid_argument("scenario: need at least one learner");
  if (phi.empty()) throw std::invalid_argument("scenario: empty feature vector");
  for (const auto& t : thetas)
    if (t.size() != phi.size()) throw std::invalid_argument("scenario: theta and phi dimensions differ");
}

LinearPolicyScenario random_scenario(std::uint64_t seed, std::size_t n_lo, std::size_t n_hi, std::size_t d_lo,
                                     std::size_t d_hi, double rho_lo, double rho_hi) {
  Rng rng = make_stream(seed, "scenario");
  LinearPolicyScenario sc;
  const std::size_t n = n_lo + uniform_index(rng, n_hi - n_lo + 1);
  const std::size_t d = d_lo + uniform_index(rng, d_hi - d_lo + 1);
  sc.phi.resize(d);
  for (double& v : sc.phi) v = normal(rng, 1.0);
  sc.thetas.assign(n, ParamVector(d));
  for (auto& t : sc.thetas)
    for (double& v : t) v = normal(rng, 1.0);
  sc.c = normal(rng, 1.0);
  do {
    sc.rho0 = uniform(rng, rho_lo, rho_hi);
  } while (sc.rho0 <= rho_lo);
  sc.h = uniform(rng, 1e-3, 1e-1);
  return sc;
}

std::vector<double> policy_actions(const LinearPolicyScenario& sc) {
  sc.validate();
  std::vector<double> a(sc.n());
  for (std::size_t i = 0; i < sc.n(); ++i) a[i] = dot(sc.phi, sc.thetas[i]);
  return a;
}

SinActions sin_actions(const LinearPolicyScenario& sc) {
  sc.validate();
  const auto g = ensemble_gradient(sc);
  SinActions out;
  out.learner.resize(sc.n());
  for (std::size_t i = 0; i < sc.n(); ++i) {
    ParamVector next = sc.thetas[i];
    for (std::size_t k = 0; k < next.size(); ++k) next[k] += sc.h * g[k];
    out.learner[i] = dot(sc.phi, next);
  }
  out.ensemble = mean(out.learner);
  return out;
}

MulStats mul_action_stats(const LinearPolicyScenario& sc) {
  sc.validate();
  const std::size_t N = sc.n();
  const auto coeffs = coeffs_from_rho0(sc.rho0, sc.h, true);
  const auto g = ensemble_gradient(sc);
  const double pairs = static_cast<double>(N * N);

  // mul[i][p * N + q]: learner i's action after one step from window (theta_p, theta_q, theta_i).
  std::vector<std::vector<double>> mul(N, std::vector<double>(N * N));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t p = 0; p < N; ++p)
      for (std::size_t q = 0; q < N; ++q) {
        const BootstrapWindow w(sc.thetas[p], sc.thetas[q], sc.thetas[i]);
        mul[i][p * N + q] = dot(sc.phi, multistep_update(w, g, coeffs));
      }

  MulStats out;
  out.expected_learner.resize(N);
  for (std::size_t i = 0; i < N; ++i) out.expected_learner[i] = mean(mul[i]);
  out.expected_ensemble = mean(out.expected_learner);
  for (std::size_t i = 0; i < N; ++i) {
    double s = 0.0;
    for (double m : mul[i]) s += (m - out.expected_ensemble) * (m - out.expected_ensemble);
    out.variance_sum += s / pairs;
  }
  return out;
}

double action_dispersion(const LinearPolicyScenario& sc) {
  const auto a = policy_actions(sc);
  const double e = mean(a);
  double s = 0.0;
  for (double v : a) s += (v - e) * (v - e);
  return s;
}

Prop2Report prop2_check(const LinearPolicyScenario& sc) {
  Prop2Report r;
  r.delta = action_dispersion(sc);
  if (!(r.delta > 0.0)) throw std::invalid_argument("prop2_check: learners have identical actions (dispersion 0)");
  const auto sin = sin_actions(sc);
  const auto mul = mul_action_stats(sc);
  r.identity_residual = std::abs(mul.expected_ensemble - sin.ensemble);
  r.variance_ratio = mul.variance_sum / r.delta;
  r.predicted_ratio = predicted_variance_ratio(sc.rho0);
  r.on_boundary = std::abs(r.predicted_ratio - 1.0) < kRatioTolerance;
  r.contracts = r.variance_ratio < 1.0 - kRatioTolerance;
  r.in_contraction_region = !r.on_boundary && sc.rho0 > 0.0 && sc.rho0 < 1.0 / 3.0;
  const bool ratio_ok = std::abs(r.variance_ratio - r.predicted_ratio) < kRatioTolerance;
  const bool region_ok = r.on_boundary ? std::abs(r.variance_ratio - 1.0) < kRatioTolerance
                                       : r.contracts == r.in_contraction_region;
  r.passed = ratio_ok && region_ok;
  return r;
}

FlowResult quadratic_flow_run(const QuadraticProblem& p) {
  if (!(p.lambda > 0.0)) throw std::invalid_argument("quadratic_flow_run: lambda must be > 0");
  if (!(p.h > 0.0)) throw std::invalid_argument("quadratic_flow_run: h must be > 0");
  if (!(p.tol > 0.0)) throw std::invalid_argument("quadratic_flow_run: tol must be > 0");
  const auto c = coeffs_from_rho0(p.rho0, p.h, true);

  double e0 = p.x0 - p.theta_star;
  double e1 = p.x1 - p.theta_star;
  double e2 = p.x2 - p.theta_star;
  const double initial = std::max({std::abs(e0), std::abs(e1), std::abs(e2)});
  const double limit = kDivergenceFactor * initial;

  FlowResult r;
  auto within = [&] { return std::abs(e0) < p.tol && std::abs(e1) < p.tol && std::abs(e2) < p.tol; };
  for (std::size_t k = 0;; ++k) {
    r.iterations = k;
    r.final_error = std::abs(e2);
    if (within()) {
      r.converged = true;
      return r;
    }
    if (!std::isfinite(e2) || std::abs(e2) > limit) {
      r.diverged = true;
      return r;
    }
    if (k == p.max_iters) return r;
    // The error obeys the same recurrence with theta* = 0.
    const double next = multistep_step(e0, e1, e2, -p.lambda * e2, c);
    e0 = e1;
    e1 = e2;
    e2 = next;
  }
}

std::vector<double> grid_values(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw std::invalid_argument("grid_values: need step > 0 and hi >= lo");
  const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  std::vector<double> v(count);
  for (std::size_t k = 0; k < count; ++k) v[k] = lo + static_cast<double>(k) * step;
  return v;
}

std::vector<GridPoint> stability_grid(const std::vector<double>& rho0s, const std::vector<double>& lambda_hs,
                                      double band) {
  std::vector<GridPoint> out;
  out.reserve(rho0s.size() * lambda_hs.size());
  for (double rho0 : rho0s)
    for (double lh : lambda_hs) {
      GridPoint g;
      g.rho0 = rho0;
      g.lambda_h = lh;
      g.absolute = check_absolute_stability(rho0, lh);
      g.root_ok = g.absolute.pi_root_max < 1.0;
      QuadraticProblem p;
      p.lambda = lh;
      p.h = 1.0;
      p.rho0 = rho0;
      p.theta_star = 1.0;
      g.empirical_converged = quadratic_flow_run(p).converged;
      g.in_band = std::abs(lh - (2.0 - 4.0 * rho0)) < band;
      g.agree = g.absolute.routh_ok == g.root_ok && g.root_ok == g.empirical_converged;
      out.push_back(g);
    }
  return out;
}

GradFn parse_grad_fn(const std::string& id) {
  if (id == "low_level") return GradFn::low_level;
  if (id == "ensemble_level") return GradFn::ensemble_level;
  if (id == "critic_loss") return GradFn::critic_loss;
  if (id == "central_loss") return GradFn::central_loss;
  throw std::invalid_argument("unknown gradient function '" + id + "'");
}

std::string to_string(GradFn fn) {
  switch (fn) {
    case GradFn::low_level: return "low_level";
    case GradFn::ensemble_level: return "ensemble_level";
    case GradFn::critic_loss: return "critic_loss";
    case GradFn::central_loss: return "central_loss";
  }
  return "?";
}

namespace {

TransitionBatch random_batch(const EnvSpec& env, std::size_t n, Rng& rng) {
  std::vector<Transition> ts;
  for (std::size_t b = 0; b < n; ++b) {
    Transition t;
    t.s = env_reset(env, rng);
    t.a.resize(env.action_dim);
    for (std::size_t d = 0; d < env.action_dim; ++d) t.a[d] = uniform(rng, env.action_low[d], env.action_high[d]);
    auto step = env_step(env, t.s, t.a, 0);
    t.r = step.reward;
    t.s_next = std::move(step.next_state);
    t.terminated = uniform(rng, 0.0, 1.0) < 0.2;
    ts.push_back(std::move(t));
  }
  return TransitionBatch::from_transitions(ts);
}

void zero_action_inputs(Mlp& critic, std::size_t state_dim) {
  auto w = critic.weights(0);
  const std::size_t in = critic.spec().fan_in(0);
  for (std::size_t r = 0; r < critic.spec().fan_out(0); ++r)
    for (std::size_t c = state_dim; c < in; ++c) w[r * in + c] = 0.0;
}

}  // namespace

GradCheckResult grad_check(GradFn fn, const GradCheckParams& prm, double tolerance) {
  if (prm.n == 0 || prm.batch == 0 || !(prm.step > 0.0)) throw std::invalid_argument("grad_check: bad parameters");
  if (prm.learner >= prm.n) throw std::invalid_argument("grad_check: learner index out of range");
  const EnvSpec env = EnvSpec::make(EnvKind::pendulum);
  Ensemble e(env, prm.n, {prm.hidden, Activation::tanh}, AdamConfig{}, derive_seed(prm.seed, 0x9C));
  Rng rng = make_stream(prm.seed, "grad_check");
  const TransitionBatch batch = random_batch(env, prm.batch, rng);
  std::vector<double> targets(batch.size());
  for (double& y : targets) y = normal(rng, 2.0);

  BaseLearner& l = e.learner(prm.learner);
  if (prm.critic_ignores_action) {
    zero_action_inputs(l.critic(0), env.state_dim);
    zero_action_inputs(e.central(), env.state_dim);
  }

  std::span<double> params;
  std::function<double()> objective;
  ParamVector analytic;
  switch (fn) {
    case GradFn::low_level:
      params = l.policy().params();
      objective = [&] { return l.policy_objective(batch); };
      analytic = l.policy_gradient(batch);
      break;
    case GradFn::ensemble_level:
      params = l.policy().params();
      objective = [&] { return e.ensemble_objective(batch); };
      analytic = e.ensemble_policy_gradient(batch, prm.learner);
      break;
    case GradFn::critic_loss:
      params = l.critic(0).params();
      objective = [&] { return l.critic_loss(0, batch, targets); };
      analytic = l.critic_loss_gradient(0, batch, targets);
      break;
    case GradFn::central_loss:
      params = e.central().params();
      objective = [&] { return e.central_loss(batch, targets); };
      analytic = e.central_loss_gradient(batch, targets);
      break;
  }

  std::vector<std::size_t> idx(params.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (prm.max_params > 0) {
    const std::size_t keep = std::max<std::size_t>(prm.max_params, 500);
    if (keep < idx.size()) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(keep);
      std::sort(idx.begin(), idx.end());
    }
  }

  GradCheckResult res;
  for (std::size_t k : idx) {
    const double orig = params[k];
    params[k] = orig + prm.step;
    const double up = objective();
    params[k] = orig - prm.step;
    const double down = objective();
    params[k] = orig;
    const double fd = (up - down) / (2.0 * prm.step);
    const double err = std::abs(analytic[k] - fd);
    const double denom = std::max({std::abs(analytic[k]), std::abs(fd), prm.floor});
    res.max_abs_error = std::max(res.max_abs_error, err);
    res.max_rel_error = std::max(res.max_rel_error, err / denom);
    ++res.checked;
  }
  res.passed = res.max_rel_error < tolerance;
  return res;
}

}  // namespace hed::analysis
