#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hed/mlp.hpp"
#include "hed/multistep.hpp"

namespace hed::analysis {

/// Scalar-action linear policies pi_i(s) = phi . theta_i sharing one state, with a
/// constant action-gradient C of the central critic at the ensemble action.
struct LinearPolicyScenario {
  std::vector<double> phi;
  std::vector<ParamVector> thetas;
  double c = 1.0;
  double rho0 = 0.1;
  double h = 1e-2;

  std::size_t n() const { return thetas.size(); }
  std::size_t d() const { return phi.size(); }
  void validate() const;
};

/// N in [n_lo, n_hi], d in [d_lo, d_hi], rho0 ~ U(rho_lo, rho_hi), entries ~ N(0, 1).
LinearPolicyScenario random_scenario(std::uint64_t seed, std::size_t n_lo = 2, std::size_t n_hi = 8,
                                     std::size_t d_lo = 1, std::size_t d_hi = 10, double rho_lo = 0.0,
                                     double rho_hi = 1.0 / 3.0);

std::vector<double> policy_actions(const LinearPolicyScenario& sc);

struct SinActions {
  std::vector<double> learner;
  double ensemble = 0.0;
};

/// Actions after one single-step update theta_i += h * (C / N) phi.
SinActions sin_actions(const LinearPolicyScenario& sc);

struct MulStats {
  std::vector<double> expected_learner;
  double expected_ensemble = 0.0;
  double variance_sum = 0.0;  // sum_i E[(Mul_i - E[Mul_e])^2]
};

/// Exact expectations over all N^2 (p, q) bootstrap pairs per learner, each
/// pair pushed through the three-step recurrence.
MulStats mul_action_stats(const LinearPolicyScenario& sc);

/// sum_i (pi_i - pi_e)^2
double action_dispersion(const LinearPolicyScenario& sc);

inline double predicted_variance_ratio(double rho0) { return 1.0 - 2.0 * rho0 + 6.0 * rho0 * rho0; }

struct Prop2Report {
  double identity_residual = 0.0;
  double variance_ratio = 0.0;
  double predicted_ratio = 0.0;
  double delta = 0.0;
  bool contracts = false;       // ratio < 1 outside the boundary band
  bool in_contraction_region = false;
  bool on_boundary = false;     // |predicted - 1| below the band
  bool passed = false;
};

inline constexpr double kRatioTolerance = 1e-10;
inline constexpr double kIdentityTolerance = 1e-12;

/// Throws std::invalid_argument when the learners' actions coincide (zero dispersion).
Prop2Report prop2_check(const LinearPolicyScenario& sc);

struct QuadraticProblem {
  double lambda = 1.0;
  double theta_star = 0.0;
  double x0 = 0.0;
  double x1 = 0.0;
  double x2 = 0.0;
  double h = 1.0;
  double rho0 = 0.1;
  std::size_t max_iters = 100'000;
  double tol = 1e-8;
};

struct FlowResult {
  bool converged = false;
  bool diverged = false;
  std::size_t iterations = 0;
  double final_error = 0.0;
};

inline constexpr double kDivergenceFactor = 1e6;

/// Runs the recurrence on g(x) = -lambda (x - theta*). Converged once the last
/// three iterates are all within tol of theta*.
FlowResult quadratic_flow_run(const QuadraticProblem& p);

struct GridPoint {
  double rho0 = 0.0;
  double lambda_h = 0.0;
  AbsoluteStability absolute;
  bool root_ok = false;          // pi_root_max < 1
  bool empirical_converged = false;
  bool in_band = false;          // within band of lambda_h = 2 - 4 rho0
  bool agree = false;
};

/// Inclusive grid lo, lo + step, ..., hi with the count rounded from (hi - lo) / step.
std::vector<double> grid_values(double lo, double hi, double step);

/// Routh verdict, root-radius verdict and an empirical run (x* = 1 from 0, h = 1,
/// lambda = lambda_h) at every grid point.
std::vector<GridPoint> stability_grid(const std::vector<double>& rho0s, const std::vector<double>& lambda_hs,
                                      double band = 0.01);

enum class GradFn { low_level, ensemble_level, critic_loss, central_loss };

GradFn parse_grad_fn(const std::string& id);
std::string to_string(GradFn fn);

struct GradCheckParams {
  std::uint64_t seed = 0;
  std::size_t n = 3;
  std::vector<std::size_t> hidden{8, 8};
  std::size_t batch = 6;
  std::size_t learner = 0;
  double step = 1e-5;
  double floor = 1e-6;            // denominator floor of the relative error
  std::size_t max_params = 0;     // 0 checks every parameter
  bool critic_ignores_action = false;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Central finite differences of a scalar objective against its analytic gradient
/// on a randomly initialized tanh ensemble and a random pendulum batch.
GradCheckResult grad_check(GradFn fn, const GradCheckParams& params, double tolerance = 1e-5);

}  // namespace hed::analysis
