#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "amplab/amp_analysis.hpp"
#include "amplab/lambda_star.hpp"
#include "test_support.hpp"

using namespace amplab;
using Catch::Approx;

namespace {

const Mesh1D kMesh = Mesh1D::make(0.0, M_PI, 999);

GridFunction project_feasible(const WeightFunction& f, GridFunction u) {
  const auto c = pairing_vector(f);
  double cu = 0.0, cc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    cu += c[i] * u.values[i];
    cc += c[i] * c[i];
  }
  for (std::size_t i = 0; i < c.size(); ++i) u.values[i] -= cu / cc * c[i];
  return u;
}

}  // namespace

TEST_CASE("first eigenfunction weight pins the critical value at lambda2") {
  const EigenPair e1 = first_eigenpair(2.0, kMesh);
  const WeightFunction f(e1.fn, true);
  const LambdaStarResult r = lambda_star(2.0, f);
  CHECK(r.value == Approx(4.0).margin(1e-2));
  CHECK(std::abs(integral_abs_pow(r.minimizer, 2.0) - 1.0) < 1e-12);
  CHECK(r.constraint_residual < 1e-11 * (1.0 + f.max_abs()));
}

TEST_CASE("worked-example weight sits strictly below lambda2") {
  const WeightFunction f = WeightFunction::sample(kMesh, [](double x) { return 1.0 - std::sin(x); });
  const LambdaStarResult r = lambda_star(2.0, f);
  const double lambda1 = first_eigenpair(2.0, kMesh).value;
  const double lambda0 = paper_example_lambda0(kMesh);
  CHECK(r.value > lambda1);
  CHECK(r.value <= lambda0 + 1e-3);
  CHECK(r.value < 4.0 * (1.0 - 1e-3));
}

TEST_CASE("positive scaling of the weight leaves the value unchanged") {
  const WeightFunction f = WeightFunction::sample(kMesh, [](double x) { return 1.0 - std::sin(x); });
  const WeightFunction f3(3.0 * static_cast<const GridFunction&>(f), true);
  const double v1 = lambda_star(2.0, f).value;
  const double v3 = lambda_star(2.0, f3).value;
  CHECK(v1 == Approx(v3).epsilon(1e-8));
}

TEST_CASE("bracketing between the eigenvalues") {
  std::mt19937_64 rng(2);
  for (double p : {1.5, 2.0, 3.0}) {
    const double lambda1 = first_eigenpair(p, kMesh).value;
    const double lambda2 = second_eigenpair(p, kMesh).value;
    for (int rep = 0; rep < 3; ++rep) {
      const WeightFunction f = testsupport::random_positive_weight(kMesh, rng);
      const double v = lambda_star(p, f).value;
      CHECK(v > lambda1);
      CHECK(v <= lambda2 + 1e-8);
    }
  }
}

TEST_CASE("any feasible point bounds the infimum from above") {
  std::mt19937_64 rng(5);
  const WeightFunction f = testsupport::random_positive_weight(kMesh, rng);
  const LambdaStarResult r = lambda_star(2.0, f);
  for (int rep = 0; rep < 10; ++rep) {
    const GridFunction u = project_feasible(f, testsupport::random_gridfunction(kMesh, rng));
    if (!(u.max_abs() > 0.0)) continue;
    const double quotient = integral_grad_pow(u, 2.0) / integral_abs_pow(u, 2.0);
    CHECK(r.value <= quotient + 1e-8);
  }
}

TEST_CASE("H stays positive below the critical value on the feasible set") {
  std::mt19937_64 rng(7);
  const WeightFunction f = testsupport::random_positive_weight(kMesh, rng);
  const LambdaStarResult r = lambda_star(2.0, f);
  const double lambda = r.value - 0.05;
  for (int rep = 0; rep < 20; ++rep) {
    const GridFunction u = project_feasible(f, testsupport::random_gridfunction(kMesh, rng));
    if (!(u.max_abs() > 0.0)) continue;
    CHECK(h_lambda(u, 2.0, lambda) > 0.0);
  }
}

TEST_CASE("nonzero pairing with the second eigenfunction forces a strict gap") {
  const EigenPair e1 = first_eigenpair(2.0, kMesh);
  const EigenPair e2 = second_eigenpair(2.0, kMesh);
  std::mt19937_64 rng(11);
  int witnessed = 0;
  for (int rep = 0; rep < 4; ++rep) {
    const WeightFunction f = testsupport::random_positive_weight(kMesh, rng);
    const double pairing_phi2 = weighted_pairing(f, e2.fn);
    if (std::abs(pairing_phi2) < 1e-3) continue;
    ++witnessed;
    CHECK(lambda_star(2.0, f).value < e2.value * (1.0 - 1e-3));
  }
  for (int k : {1, 3}) {
    const WeightFunction fk = vanishing_sequence_weight(k, kMesh, e1.fn);
    if (std::abs(weighted_pairing(fk, e2.fn)) < 1e-3) continue;
    ++witnessed;
    CHECK(lambda_star(2.0, fk).value < e2.value * (1.0 - 1e-3));
  }
  CHECK(witnessed >= 3);
}

TEST_CASE("minimizer rescales to a sign-changing zero-energy solution") {
  const WeightFunction f = WeightFunction::sample(kMesh, [](double x) { return 1.0 - std::sin(x); });
  const LambdaStarResult r = lambda_star(2.0, f);
  const double lambda2 = second_eigenpair(2.0, kMesh).value;
  const MinimizerCheck chk = minimizer_is_solution_check(r, 2.0, f, lambda2);
  const double scale = (1.0 + chk.v.max_abs()) * (1.0 + f.max_abs());
  CHECK(chk.pde_residual <= 1e-6 * scale);
  CHECK(std::abs(chk.energy) <= 1e-6 * scale);
  CHECK(chk.sign_class == SignClass::SignChanging);
  CHECK(chk.rayleigh == Approx(r.value).epsilon(1e-10));
}

TEST_CASE("minimizer check refuses the resonant case") {
  const EigenPair e1 = first_eigenpair(2.0, kMesh);
  const WeightFunction f(e1.fn, true);
  const LambdaStarResult r = lambda_star(2.0, f);
  const double lambda2 = second_eigenpair(2.0, kMesh).value;
  CHECK_THROWS_MATCHES(minimizer_is_solution_check(r, 2.0, f, lambda2), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == errc::not_applicable;
                       }));
}

TEST_CASE("feeding a known solution back recovers the unit scaling") {
  // Build the discrete solution at the pairing zero: it satisfies the
  // boundary value problem with zero f-pairing, so the fitted multiplier
  // must come back as one with positive sign.
  const Mesh1D mesh = Mesh1D::make(0.0, M_PI, 800);
  const WeightFunction f = WeightFunction::sample(mesh, [](double x) { return 1.0 - std::sin(x); });
  const double lambda0 = paper_example_lambda0(mesh);
  const Solution s = linear_solve_p2(lambda0, f);

  LambdaStarResult synthetic;
  synthetic.value = integral_grad_pow(s.u, 2.0) / integral_abs_pow(s.u, 2.0);
  synthetic.minimizer = s.u;
  const MinimizerCheck chk = minimizer_is_solution_check(synthetic, 2.0, f, 4.0);
  CHECK(chk.sign == 1);
  CHECK(chk.scaling == Approx(1.0).epsilon(1e-6));
  CHECK(testsupport::max_diff(chk.v.values, s.u.values) < 1e-6 * (1.0 + s.u.max_abs()));
}

TEST_CASE("vanishing sequence construction") {
  const EigenPair e1 = first_eigenpair(2.0, kMesh);

  SECTION("weights are admissible and the probe has zero pairing") {
    for (int k = 1; k <= 5; ++k) {
      const auto parts = detail::vanishing_sequence_parts(k, kMesh, e1.fn);
      parts.f.validate_nonneg();
      const double scale = (1.0 + parts.f.max_abs()) * (1.0 + parts.probe.max_abs());
      CHECK(std::abs(weighted_pairing(parts.f, parts.probe)) <= 1e-10 * scale);
    }
  }
  SECTION("critical values decrease toward lambda1") {
    std::vector<double> gaps;
    for (int k = 1; k <= 5; ++k) {
      const WeightFunction fk = vanishing_sequence_weight(k, kMesh, e1.fn);
      gaps.push_back(lambda_star(2.0, fk).value - e1.value);
    }
    for (std::size_t i = 1; i < gaps.size(); ++i) CHECK(gaps[i] < gaps[i - 1]);
    CHECK(gaps[4] <= 0.5 * gaps[0]);
    CHECK(gaps[4] > 0.0);
  }
  SECTION("coarse meshes cannot host the construction") {
    const Mesh1D coarse = Mesh1D::make(0.0, M_PI, 49);
    const GridFunction phi = GridFunction::sample(coarse, [](double x) { return std::sin(x); });
    CHECK_THROWS_MATCHES(vanishing_sequence_weight(5, coarse, phi), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == errc::geometry_infeasible;
                         }));
  }
}

TEST_CASE("identically zero weight is rejected") {
  const WeightFunction fzero(GridFunction(kMesh), false);
  CHECK_THROWS_MATCHES(lambda_star(2.0, fzero), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == errc::weight_not_nonneg || e.code() == errc::infeasible_constraint;
                       }));
}
