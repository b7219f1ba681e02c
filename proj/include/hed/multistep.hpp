#pragma once

#include <array>
#include <complex>
#include <span>

#include "hed/mlp.hpp"

namespace hed {

/// Coefficients of the three-step recurrence
///
///   x[k+3] = -rho2 * x[k+2] - rho1 * x[k+1] - rho0 * x[k] + h * g(x[k+2])
///
/// The consistent family has rho1 = -2 rho0 and rho2 = rho0 - 1, so the update
/// is (1 - rho0) x[k+2] + 2 rho0 x[k+1] - rho0 x[k] + h g. rho0 = 0 is plain
/// gradient ascent.
struct MultiStepCoefficients {
  double rho0 = 0.0;
  double rho1 = 0.0;
  double rho2 = -1.0;
  double h = 0.0;
};

/// Builds the consistent coefficient set. Rejects rho0 outside (0, 1/2) unless
/// allow_unstable is set (analysis probes the unstable region and rho0 = 0).
MultiStepCoefficients coeffs_from_rho0(double rho0, double h, bool allow_unstable = false);

/// rho(F) = F^3 + rho2 F^2 + rho1 F + rho0 evaluated at F and its derivative.
std::complex<double> rho_poly(const MultiStepCoefficients& c, std::complex<double> f);
double rho_poly_derivative(const MultiStepCoefficients& c, double f);

/// Roots of rho(F): 1 and (-rho0 +- sqrt(rho0 (rho0 + 4))) / 2. Each root is
/// checked against the cubic; throws std::logic_error if the coefficients are
/// not from the consistent family.
std::array<std::complex<double>, 3> characteristic_roots(const MultiStepCoefficients& c);

/// Roots of the monic cubic F^3 + b F^2 + c F + d via companion-matrix eigenvalues.
std::array<std::complex<double>, 3> monic_cubic_roots(double b, double c, double d);

/// Root condition: every root of rho in the closed unit disk, unit-circle roots simple.
bool check_zero_stability(const MultiStepCoefficients& c);

struct AbsoluteStability {
  std::array<double, 4> a{};  // A0..A3 of the transformed polynomial
  bool routh_ok = false;
  double pi_root_max = 0.0;   // max |root| of F^3 + (rho0 - 1 + lh) F^2 - 2 rho0 F + rho0
};

/// Routh-Hurwitz test on the bilinear-transformed stability polynomial for
/// g(x) = -lambda (x - x*), together with the numerically computed spectral radius.
AbsoluteStability check_absolute_stability(double rho0, double lambda_h);

struct StabilityReport {
  std::array<std::complex<double>, 3> rho_roots{};
  bool zero_stable = false;
  AbsoluteStability absolute{};
};

StabilityReport stability_report(const MultiStepCoefficients& c, double lambda_h);

/// The three most recent iterates x[k], x[k+1], x[k+2].
class BootstrapWindow {
 public:
  BootstrapWindow() = default;
  BootstrapWindow(ParamVector prev2, ParamVector prev1, ParamVector curr);

  const ParamVector& prev2() const { return prev2_; }
  const ParamVector& prev1() const { return prev1_; }
  const ParamVector& curr() const { return curr_; }
  std::size_t dim() const { return curr_.size(); }

  /// Shifts the window: (prev1, curr, x_new). Older points are never read again.
  void push(ParamVector x_new);

 private:
  ParamVector prev2_;
  ParamVector prev1_;
  ParamVector curr_;
};

/// One recurrence step for a scalar coordinate.
inline double multistep_step(double prev2, double prev1, double curr, double grad, const MultiStepCoefficients& c) {
  return -c.rho2 * curr - c.rho1 * prev1 - c.rho0 * prev2 + c.h * grad;
}

/// Next iterate from the window and the gradient evaluated at window.curr().
ParamVector multistep_update(const BootstrapWindow& w, std::span<const double> grad, const MultiStepCoefficients& c);

}  // namespace hed
