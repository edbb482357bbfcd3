#include <catch_amalgamated.hpp>

#include <cmath>

#include "cmaf/elliptic.hpp"
#include "oracles.hpp"

using namespace cmaf;
using Catch::Matchers::WithinAbs;

namespace {

ScalarField cos_x(const TorusGeometry& g, double amp) {
  return ScalarField::sample(g, [&](std::span<const double> x) { return amp * std::cos(2 * M_PI * x[0]); });
}

void check_residuals_decrease(const EllipticReport& rep) {
  // strictly decreasing after the first damped step
  for (std::size_t i = 2; i < rep.residual_history.size(); ++i)
    CHECK(rep.residual_history[i] < rep.residual_history[i - 1]);
}

void check_fixed_rhs_invariants(const EllipticReport& rep, const EllipticOptions& opts) {
  REQUIRE(rep.converged);
  CHECK(rep.residual_sup <= opts.tol);
  CHECK(std::abs(rep.solution.mean()) <= 1e-12);
  CHECK_THAT(det_ratio(MetricField::from_potential(rep.solution)).mean(), WithinAbs(1.0, 1e-10));
  check_residuals_decrease(rep);
}

}  // namespace

TEST_CASE("compatibility constant", "[elliptic]") {
  TorusGeometry g(1, 64);
  CHECK(compatibility_constant(ScalarField(g, 1.0)) == 1.0);
  CHECK(compatibility_constant(ScalarField(g, 2.0)) == 0.5);
  auto f = ScalarField::sample(g, [](std::span<const double> x) { return std::exp(0.1 * std::cos(2 * M_PI * x[0])); });
  // trapezoid rule is spectrally accurate for periodic integrands: 1 / I0(0.1)
  CHECK_THAT(compatibility_constant(f), WithinAbs(0.997505, 5e-7));
  CHECK_THAT(compatibility_constant(f), WithinAbs(1.0 / std::cyl_bessel_i(0.0, 0.1), 1e-14));
  ScalarField bad(g, 1.0);
  bad[3] = 0.0;
  CHECK_THROWS_AS(compatibility_constant(bad), Error);
}

TEST_CASE("fixed right-hand side solve", "[elliptic]") {
  EllipticOptions opts;
  SECTION("trivial density") {
    TorusGeometry g(1, 32);
    auto rep = solve_fixed_rhs(ScalarField(g, 1.0), opts);
    REQUIRE(rep.converged);
    CHECK(rep.c == 1.0);
    CHECK(rep.newton_iters <= 1);
    CHECK(rep.solution.sup_abs() <= 1e-14);
  }
  SECTION("manufactured, n = 1") {
    TorusGeometry g(1, 64);
    auto f = ScalarField::sample(
        g, [](std::span<const double> x) { return 1.0 - 0.05 * M_PI * M_PI * std::cos(2 * M_PI * x[0]); });
    auto rep = solve_fixed_rhs(f, opts);
    check_fixed_rhs_invariants(rep, opts);
    CHECK_THAT(rep.c, WithinAbs(1.0, 1e-14));
    CHECK(sup_distance(rep.solution, cos_x(g, 0.05)) <= 1e-8);
    CHECK(rep.newton_iters <= 15);
  }
  SECTION("manufactured, n = 2 separable") {
    TorusGeometry g(2, 16);
    auto psi = ScalarField::sample(
        g, [](std::span<const double> x) { return 0.05 * std::cos(2 * M_PI * x[0]) + 0.05 * std::cos(2 * M_PI * x[2]); });
    auto rep = solve_fixed_rhs(det_ratio(MetricField::from_potential(psi)), opts);
    check_fixed_rhs_invariants(rep, opts);
    CHECK(sup_distance(rep.solution, psi) <= 1e-8);
  }
  SECTION("manufactured, n = 2 coupled, scaled density") {
    TorusGeometry g(2, 16);
    auto psi = ScalarField::sample(g, [](std::span<const double> x) {
      return 0.02 * std::cos(2 * M_PI * (x[0] + x[2])) + 0.015 * std::sin(2 * M_PI * (x[1] - x[3]));
    });
    // f = det / 3 has c = 3
    auto f = det_ratio(MetricField::from_potential(psi));
    f *= 1.0 / 3.0;
    auto rep = solve_fixed_rhs(f, opts);
    check_fixed_rhs_invariants(rep, opts);
    CHECK_THAT(rep.c, WithinAbs(3.0, 1e-12));
    CHECK(sup_distance(rep.solution, psi) <= 1e-8);
  }
  SECTION("rough band-limited target at N = 64") {
    TorusGeometry g(1, 64);
    auto rough = random_rough_field(g, 5, 0.5, 1.0);
    auto psi = (0.6 / hessian(rough).sup_abs()) * fourier_truncate(rough, 20);
    auto rep = solve_fixed_rhs(det_ratio(MetricField::from_potential(psi)), opts);
    check_fixed_rhs_invariants(rep, opts);
    CHECK(sup_distance(rep.solution, psi + (-psi.mean())) <= 1e-8);
  }
  SECTION("iteration cap reports non-convergence") {
    TorusGeometry g(1, 64);
    auto f = ScalarField::sample(
        g, [](std::span<const double> x) { return 1.0 - 0.08 * M_PI * M_PI * std::cos(2 * M_PI * x[0]); });
    EllipticOptions capped;
    capped.max_iters = 1;
    auto rep = solve_fixed_rhs(f, capped);
    CHECK_FALSE(rep.converged);
    CHECK(rep.newton_iters == 1);
    CHECK(rep.residual_sup > capped.tol);
  }
  SECTION("invalid density") {
    TorusGeometry g(1, 16);
    CHECK_THROWS_AS(solve_fixed_rhs(ScalarField(g, -1.0), opts), Error);
  }
}

TEST_CASE("self-consistent solve", "[elliptic]") {
  TorusGeometry g(1, 64);
  SECTION("F = s") {
    auto rep = solve_self_consistent(NonlinearityF(1.0, 0.0), g);
    REQUIRE(rep.converged);
    CHECK(rep.solution.sup_abs() <= 1e-14);
    CHECK(rep.warnings.empty());
  }
  SECTION("F = s - 0.01 cos(2 pi x)") {
    NonlinearityF F(1.0, 0.0, {TrigTerm{-0.01, {1, 0}, 0.0}});
    auto rep = solve_self_consistent(F, g);
    REQUIRE(rep.converged);
    CHECK(rep.residual_sup <= 1e-10);
    // linearization: (1 - pi^2) a = -0.01 for the cos amplitude
    const double amp = -0.01 / (M_PI * M_PI - 1.0);
    CHECK_THAT(amp, WithinAbs(-0.0011275, 1e-7));
    // the quadratic term of log(1 + u) shifts the mean by about u^2 / 4 = 3.1e-5,
    // so the linear prediction alone is only good to that order
    CHECK(sup_distance(rep.solution, cos_x(g, amp)) <= 4e-5);
    // second order: with L = d_z dbar_z and beta = pi^2 / (pi^2 - 1),
    //   (L + 1) phi2 = (L phi1)^2 / 2 = (0.01 beta)^2 (1 + cos(4 pi x)) / 4
    const double beta = 0.01 * M_PI * M_PI / (M_PI * M_PI - 1.0);
    const double c0 = beta * beta / 4.0;
    const double c2 = beta * beta / 4.0 / (1.0 - 4.0 * M_PI * M_PI);
    auto second = ScalarField::sample(g, [&](std::span<const double> x) {
      return amp * std::cos(2 * M_PI * x[0]) + c0 + c2 * std::cos(4 * M_PI * x[0]);
    });
    CHECK(sup_distance(rep.solution, second) <= 1e-6);
    check_residuals_decrease(rep);
    // the residual really is log det + F
    auto r = log_det_ratio(MetricField::from_potential(rep.solution)) + F_value(F, rep.solution);
    CHECK(r.sup_abs() <= 1e-10);
  }
  SECTION("F = s + 0.3") {
    NonlinearityF F = NonlinearityF(1.0, 0.0).shifted(0.3);
    auto rep = solve_self_consistent(F, g);
    REQUIRE(rep.converged);
    CHECK(sup_distance(rep.solution, ScalarField(g, -0.3)) <= 1e-10);
  }
  SECTION("F = s + 0.5 sin(s) + h on n = 2") {
    TorusGeometry g2(2, 16);
    NonlinearityF F(1.0, 0.5, {TrigTerm{0.02, {1, 0, 0, 1}, 0.4}});
    auto rep = solve_self_consistent(F, g2);
    REQUIRE(rep.converged);
    auto r = log_det_ratio(MetricField::from_potential(rep.solution)) + F_value(F, rep.solution);
    CHECK(r.sup_abs() <= 1e-10);
  }
  SECTION("decreasing F records a warning") {
    NonlinearityF F(-1.0, 0.0, {TrigTerm{0.01, {1, 0}, 0.0}});
    auto rep = solve_self_consistent(F, g);
    REQUIRE_FALSE(rep.warnings.empty());
    CHECK(rep.converged);
  }
}

TEST_CASE("normalization against a reference", "[elliptic]") {
  TorusGeometry g(1, 32);
  auto phi = cos_x(g, 0.3) + ScalarField::sample(g, [](std::span<const double> x) { return 0.1 * std::sin(6 * M_PI * x[0]); });
  CHECK(sup_distance(normalize_against(phi + 3.0, phi), phi) <= 1e-14);
  CHECK(sup_distance(normalize_against(phi, phi), phi) == 0.0);
  auto c = cos_x(g, 1.0);
  CHECK(sup_distance(normalize_against(c, ScalarField(g, 0.0)), c) <= 1e-15);

  auto psi = ScalarField::sample(g, [](std::span<const double> x) { return 0.7 * x[0] * (1 - x[0]) - 2.0; });
  auto n = normalize_against(psi, phi);
  CHECK_THAT((n - phi).max(), WithinAbs((phi - n).max(), 1e-14));
}
