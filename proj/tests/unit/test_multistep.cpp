#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "hed/multistep.hpp"

using namespace hed;

namespace {

double max_abs_root(const std::array<std::complex<double>, 3>& r) {
  double m = 0.0;
  for (const auto& z : r) m = std::max(m, std::abs(z));
  return m;
}

}  // namespace

TEST_CASE("coefficient family") {
  const auto c = coeffs_from_rho0(1e-4, 0.1);
  CHECK(c.rho0 == 1e-4);
  CHECK(c.rho1 == doctest::Approx(-2e-4).epsilon(1e-15));
  CHECK(c.rho2 == doctest::Approx(-0.9999).epsilon(1e-15));

  const auto q = coeffs_from_rho0(0.25, 1.0);
  CHECK(q.rho1 == -0.5);
  CHECK(q.rho2 == -0.75);

  const auto z = coeffs_from_rho0(0.0, 1.0, true);
  CHECK(z.rho0 == 0.0);
  CHECK(z.rho1 == 0.0);
  CHECK(z.rho2 == -1.0);

  CHECK_THROWS_AS(coeffs_from_rho0(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(coeffs_from_rho0(0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(coeffs_from_rho0(0.6, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(coeffs_from_rho0(0.1, 0.0), std::invalid_argument);
  CHECK_NOTHROW(coeffs_from_rho0(0.6, 1.0, true));
}

TEST_CASE("consistency: rho(1) = 0 and rho'(1) = sigma(1) = 1") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1e-6, 0.5 - 1e-6);
  for (int k = 0; k < 200; ++k) {
    const auto c = coeffs_from_rho0(u(rng), 0.01);
    CHECK(std::abs(rho_poly(c, 1.0)) < 1e-12);
    CHECK(std::abs(rho_poly_derivative(c, 1.0) - 1.0) < 1e-12);
  }
}

TEST_CASE("characteristic roots") {
  const auto r = characteristic_roots(coeffs_from_rho0(0.25, 1.0));
  std::vector<double> re;
  for (const auto& z : r) {
    CHECK(std::abs(z.imag()) < 1e-15);
    re.push_back(z.real());
  }
  std::sort(re.begin(), re.end());
  // Independent oracle: the quadratic factor F^2 + 0.25 F - 0.25.
  const double disc = std::sqrt(0.0625 + 1.0);
  CHECK(re[0] == doctest::Approx((-0.25 - disc) / 2).epsilon(1e-14));
  CHECK(re[1] == doctest::Approx((-0.25 + disc) / 2).epsilon(1e-14));
  CHECK(re[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(re[0] == doctest::Approx(-0.640388).epsilon(1e-6));
  CHECK(re[1] == doctest::Approx(0.390388).epsilon(1e-6));

  // Non-unit root magnitude at rho0 = 0.6 is (0.6 + sqrt(0.36 + 2.4)) / 2 = 1.13066.
  const auto u = characteristic_roots(coeffs_from_rho0(0.6, 1.0, true));
  CHECK(max_abs_root(u) == doctest::Approx((0.6 + std::sqrt(2.76)) / 2).epsilon(1e-14));
  CHECK(std::abs(max_abs_root(u) - 1.1305) < 1e-3);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0.0, 0.9);
  for (int k = 0; k < 50; ++k) {
    const double rho0 = d(rng);
    const auto roots = characteristic_roots(coeffs_from_rho0(rho0, 1.0, true));
    const auto prod = roots[0] * roots[1] * roots[2];
    CHECK(std::abs(prod - std::complex<double>(-rho0, 0.0)) < 1e-13);
  }

  MultiStepCoefficients bogus{0.1, 0.3, -1.0, 1.0};
  CHECK_THROWS_AS(characteristic_roots(bogus), std::logic_error);
}

TEST_CASE("companion-matrix cubic roots agree with the closed forms") {
  for (double rho0 : {0.05, 0.2, 0.3, 0.45, 0.7}) {
    const auto c = coeffs_from_rho0(rho0, 1.0, true);
    auto a = characteristic_roots(c);
    auto b = monic_cubic_roots(c.rho2, c.rho1, c.rho0);
    auto key = [](const std::complex<double>& x, const std::complex<double>& y) { return x.real() < y.real(); };
    std::sort(a.begin(), a.end(), key);
    std::sort(b.begin(), b.end(), key);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(a[k] - b[k]) < 1e-10);
  }
  // (F - 1)(F^2 + 1) has a complex pair.
  const auto r = monic_cubic_roots(-1.0, 1.0, -1.0);
  for (const auto& z : r) CHECK(std::abs(z * z * z - z * z + z - 1.0) < 1e-12);
}

TEST_CASE("zero-stability boundary") {
  CHECK(check_zero_stability(coeffs_from_rho0(0.1, 1.0)));
  CHECK_FALSE(check_zero_stability(coeffs_from_rho0(0.6, 1.0, true)));
  CHECK(check_zero_stability(coeffs_from_rho0(0.4999, 1.0)));
  CHECK_FALSE(check_zero_stability(coeffs_from_rho0(0.5001, 1.0, true)));
  for (int k = 1; k <= 75; ++k) {
    const double rho0 = k / 100.0;
    if (k == 50) continue;
    const auto c = coeffs_from_rho0(rho0, 1.0, true);
    // closed-form non-unit root magnitude
    const double mag = (rho0 + std::sqrt(rho0 * (rho0 + 4.0))) / 2.0;
    CHECK(check_zero_stability(c) == (mag < 1.0));
    CHECK(check_zero_stability(c) == (rho0 < 0.5));
  }
  // rho0 = 1/2 puts a second root on the unit circle at -1: simple, so the root condition holds at the edge.
  CHECK(check_zero_stability(coeffs_from_rho0(0.5, 1.0, true)));
}

TEST_CASE("absolute stability") {
  const auto a = check_absolute_stability(0.1, 1.0);
  CHECK(a.a[0] == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(a.a[1] == doctest::Approx(2.8).epsilon(1e-14));
  CHECK(a.a[2] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(a.a[3] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(a.a[1] * a.a[2] == doctest::Approx(8.4));
  CHECK(a.routh_ok);
  CHECK(a.pi_root_max < 1.0);

  const auto b = check_absolute_stability(0.1, 1.7);
  CHECK(b.a[0] == doctest::Approx(-0.1).epsilon(1e-13));
  CHECK_FALSE(b.routh_ok);
  CHECK(b.pi_root_max > 1.0);

  for (double rho0 : {0.01, 0.2, 0.4}) {
    const auto z = check_absolute_stability(rho0, 0.0);
    CHECK(z.a[3] == 0.0);
    CHECK_FALSE(z.routh_ok);
  }
}

TEST_CASE("Routh verdict equals the root-radius verdict away from the boundary") {
  for (int i = 1; i <= 49; ++i)
    for (int j = 1; j <= 80; ++j) {
      const double rho0 = i / 100.0, lh = j * 0.05;
      if (std::abs(lh - (2.0 - 4.0 * rho0)) < 1e-3) continue;
      const auto a = check_absolute_stability(rho0, lh);
      CHECK(a.routh_ok == (a.pi_root_max < 1.0));
      CHECK(a.routh_ok == (lh < 2.0 - 4.0 * rho0));
    }
}

TEST_CASE("multistep update") {
  const auto c = coeffs_from_rho0(0.1, 0.5);
  const BootstrapWindow w({0.0}, {0.0}, {1.0});
  CHECK(multistep_update(w, std::vector<double>{0.0}, c)[0] == doctest::Approx(0.9).epsilon(1e-15));

  const BootstrapWindow fixed({2.5, -1.0}, {2.5, -1.0}, {2.5, -1.0});
  const auto same = multistep_update(fixed, std::vector<double>{0.0, 0.0}, c);
  CHECK(same[0] == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(same[1] == doctest::Approx(-1.0).epsilon(1e-15));

  const auto single = coeffs_from_rho0(0.0, 0.5, true);
  const BootstrapWindow any({9.0}, {-4.0}, {1.0});
  CHECK(multistep_update(any, std::vector<double>{2.0}, single)[0] == 1.0 + 0.5 * 2.0);

  CHECK_THROWS_AS(multistep_update(any, std::vector<double>{1.0, 2.0}, c), std::invalid_argument);
}

TEST_CASE("multistep update is jointly linear") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  auto vec = [&] { return std::vector<double>{n(rng), n(rng), n(rng)}; };
  const auto c = coeffs_from_rho0(0.3, 0.2);
  for (int t = 0; t < 20; ++t) {
    const auto a1 = vec(), b1 = vec(), c1 = vec(), g1 = vec();
    const auto a2 = vec(), b2 = vec(), c2 = vec(), g2 = vec();
    const double al = n(rng), be = n(rng);
    auto mix = [&](const std::vector<double>& x, const std::vector<double>& y) {
      std::vector<double> r(3);
      for (int k = 0; k < 3; ++k) r[k] = al * x[k] + be * y[k];
      return r;
    };
    const auto lhs = multistep_update(BootstrapWindow(mix(a1, a2), mix(b1, b2), mix(c1, c2)), mix(g1, g2), c);
    const auto u1 = multistep_update(BootstrapWindow(a1, b1, c1), g1, c);
    const auto u2 = multistep_update(BootstrapWindow(a2, b2, c2), g2, c);
    for (int k = 0; k < 3; ++k) CHECK(lhs[k] == doctest::Approx(al * u1[k] + be * u2[k]).epsilon(1e-12));
  }
}

TEST_CASE("window push") {
  BootstrapWindow w({1.0}, {2.0}, {3.0});
  w.push({4.0});
  CHECK(w.curr()[0] == 4.0);
  CHECK(w.prev1()[0] == 3.0);
  CHECK(w.prev2()[0] == 2.0);
  w.push({7.0});
  w.push({8.0});
  w.push({9.0});
  CHECK(w.prev2()[0] == 7.0);
  CHECK(w.prev1()[0] == 8.0);
  CHECK(w.curr()[0] == 9.0);
  CHECK_THROWS_AS(w.push({1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(BootstrapWindow({1.0}, {2.0, 3.0}, {4.0}), std::invalid_argument);
}

TEST_CASE("window iteration reproduces a hand-rolled scalar recurrence") {
  const double rho0 = 0.2, h = 0.3, lambda = 1.5, star = 2.0;
  const auto c = coeffs_from_rho0(rho0, h);
  BootstrapWindow w({0.0}, {0.5}, {1.0});
  double x0 = 0.0, x1 = 0.5, x2 = 1.0;
  for (int k = 0; k < 100; ++k) {
    const std::vector<double> g{-lambda * (w.curr()[0] - star)};
    w.push(multistep_update(w, g, c));
    const double x3 = (1 - rho0) * x2 + 2 * rho0 * x1 - rho0 * x0 + h * (-lambda * (x2 - star));
    x0 = x1;
    x1 = x2;
    x2 = x3;
    CHECK(w.curr()[0] == doctest::Approx(x2).epsilon(1e-13));
  }
}

TEST_CASE("stability report bundles the verdicts") {
  const auto r = stability_report(coeffs_from_rho0(0.1, 1.0), 1.0);
  CHECK(r.zero_stable);
  CHECK(r.absolute.routh_ok);
}
