#include "hed/multistep.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hed {
namespace {

constexpr double kUnitBand = 1e-12;
constexpr double kRootResidual = 1e-10;

}  // namespace

MultiStepCoefficients coeffs_from_rho0(double rho0, double h, bool allow_unstable) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("coeffs_from_rho0: h must be > 0");
  if (!std::isfinite(rho0)) throw std::invalid_argument("coeffs_from_rho0: rho0 must be finite");
  if (!allow_unstable && !(rho0 > 0.0 && rho0 < 0.5))
    throw std::invalid_argument("coeffs_from_rho0: rho0 = " + std::to_string(rho0) + " outside (0, 1/2)");
  return {rho0, -2.0 * rho0, rho0 - 1.0, h};
}

std::complex<double> rho_poly(const MultiStepCoefficients& c, std::complex<double> f) {
  return ((f + c.rho2) * f + c.rho1) * f + c.rho0;
}

double rho_poly_derivative(const MultiStepCoefficients& c, double f) { return 3.0 * f * f + 2.0 * c.rho2 * f + c.rho1; }

std::array<std::complex<double>, 3> characteristic_roots(const MultiStepCoefficients& c) {
  if (std::abs(c.rho1 + 2.0 * c.rho0) > 1e-12 || std::abs(c.rho2 - (c.rho0 - 1.0)) > 1e-12)
    throw std::logic_error("characteristic_roots: coefficients are not consistent");
  // rho(F) = (F - 1)(F^2 + rho0 F - rho0)
  const std::complex<double> disc = std::sqrt(std::complex<double>(c.rho0 * (c.rho0 + 4.0), 0.0));
  std::array<std::complex<double>, 3> roots{std::complex<double>(1.0, 0.0), 0.5 * (-c.rho0 + disc),
                                            0.5 * (-c.rho0 - disc)};
  for (const auto& r : roots) {
    if (std::abs(rho_poly(c, r)) > kRootResidual)
      throw std::logic_error("characteristic_roots: closed-form root fails back-substitution");
  }
  return roots;
}

std::array<std::complex<double>, 3> monic_cubic_roots(double b, double c, double d) {
  Eigen::Matrix3d companion;
  companion << -b, -c, -d,
                1.0, 0.0, 0.0,
                0.0, 1.0, 0.0;
  Eigen::EigenSolver<Eigen::Matrix3d> solver(companion, false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("monic_cubic_roots: eigen solver failed");
  const auto ev = solver.eigenvalues();
  return {ev[0], ev[1], ev[2]};
}

bool check_zero_stability(const MultiStepCoefficients& c) {
  const auto roots = monic_cubic_roots(c.rho2, c.rho1, c.rho0);
  for (std::size_t k = 0; k < roots.size(); ++k) {
    const double mag = std::abs(roots[k]);
    if (mag > 1.0 + kUnitBand) return false;
    if (mag >= 1.0 - kUnitBand) {
      for (std::size_t j = 0; j < roots.size(); ++j)
        if (j != k && std::abs(roots[j] - roots[k]) < 1e-6) return false;
    }
  }
  return true;
}

AbsoluteStability check_absolute_stability(double rho0, double lambda_h) {
  if (!(lambda_h >= 0.0)) throw std::invalid_argument("check_absolute_stability: lambda_h must be >= 0");
  AbsoluteStability out;
  out.a = {2.0 - lambda_h - 4.0 * rho0, 4.0 - lambda_h - 2.0 * rho0, 2.0 + lambda_h, lambda_h};
  const auto& a = out.a;
  const bool positive = std::all_of(a.begin(), a.end(), [](double v) { return v > 0.0; });
  out.routh_ok = positive && a[1] * a[2] > a[0] * a[3];

  const auto roots = monic_cubic_roots(rho0 - 1.0 + lambda_h, -2.0 * rho0, rho0);
  for (const auto& r : roots) out.pi_root_max = std::max(out.pi_root_max, std::abs(r));
  return out;
}

StabilityReport stability_report(const MultiStepCoefficients& c, double lambda_h) {
  StabilityReport r;
  r.rho_roots = characteristic_roots(c);
  r.zero_stable = check_zero_stability(c);
  r.absolute = check_absolute_stability(c.rho0, lambda_h);
  return r;
}

BootstrapWindow::BootstrapWindow(ParamVector prev2, ParamVector prev1, ParamVector curr)
    : prev2_(std::move(prev2)), prev1_(std::move(prev1)), curr_(std::move(curr)) {
  if (prev2_.size() != curr_.size() || prev1_.size() != curr_.size())
    throw std::invalid_argument("BootstrapWindow: length mismatch");
}

void BootstrapWindow::push(ParamVector x_new) {
  if (x_new.size() != curr_.size()) throw std::invalid_argument("BootstrapWindow::push: length mismatch");
  prev2_ = std::move(prev1_);
  prev1_ = std::move(curr_);
  curr_ = std::move(x_new);
}

ParamVector multistep_update(const BootstrapWindow& w, std::span<const double> grad, const MultiStepCoefficients& c) {
  if (grad.size() != w.dim()) throw std::invalid_argument("multistep_update: length mismatch");
  ParamVector out(w.dim());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = multistep_step(w.prev2()[k], w.prev1()[k], w.curr()[k], grad[k], c);
  return out;
}

}  // namespace hed
