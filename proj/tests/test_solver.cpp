#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "amplab/lambda_star.hpp"
#include "amplab/solver.hpp"
#include "test_support.hpp"

using namespace amplab;
using Catch::Approx;

namespace {

const Mesh1D kMesh = Mesh1D::make(0.0, M_PI, 999);

/// Random tuple satisfying the fibering precondition H * pairing > 0.
struct AdmissibleCase {
  GridFunction u;
  WeightFunction f;
  double p;
  double lambda;
  double H;
  double I;
};

AdmissibleCase random_admissible(const Mesh1D& mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pdist(1.2, 3.5);
  std::uniform_real_distribution<double> ldist(-2.0, 6.0);
  for (;;) {
    AdmissibleCase c{testsupport::random_gridfunction(mesh, rng), testsupport::random_positive_weight(mesh, rng),
                     pdist(rng), ldist(rng), 0.0, 0.0};
    c.H = h_lambda(c.u, c.p, c.lambda);
    c.I = weighted_pairing(c.f, c.u);
    if (c.H * c.I > 0.0 && std::abs(c.H) > 1e-8 && std::abs(c.I) > 1e-8) return c;
  }
}

}  // namespace

TEST_CASE("fibering algebra on constructed cases") {
  // Arrange H = 2 and pairing = 4 exactly, then the scaling and energy of
  // the stationary point follow in closed form.
  const Mesh1D mesh = Mesh1D::make(0.0, 1.0, 7);
  GridFunction u = GridFunction::sample(mesh, [](double x) { return x * (1.0 - x); });
  const double D = integral_grad_pow(u, 2.0);
  const double Mss = integral_abs_pow(u, 2.0);
  const double lambda = (D - 2.0) / Mss;  // makes H = 2
  WeightFunction f = WeightFunction::sample(mesh, [](double) { return 1.0 ; });
  const double i0 = weighted_pairing(f, u);
  f = WeightFunction((4.0 / i0) * static_cast<const GridFunction&>(f), true);  // makes pairing = 4

  const FiberingResult r = fibering_scale(u, 2.0, lambda, f);
  CHECK(r.h_value == Approx(2.0).epsilon(1e-12));
  CHECK(r.pairing_value == Approx(4.0).epsilon(1e-12));
  CHECK(r.t_u == Approx(2.0).epsilon(1e-12));
  CHECK(r.energy_at_t == Approx(-4.0).epsilon(1e-12));
  CHECK(r.stationary_kind == FiberKind::GlobalMin);
}

TEST_CASE("fibering unit case with negative H") {
  const Mesh1D mesh = Mesh1D::make(0.0, 1.0, 7);
  for (double p : {1.5, 2.0, 3.0}) {
    GridFunction u = GridFunction::sample(mesh, [](double x) { return -x * (1.0 - x); });
    const double D = integral_grad_pow(u, p);
    const double Mss = integral_abs_pow(u, p);
    const double lambda = (D + 1.0) / Mss;  // makes H = -1
    WeightFunction f = WeightFunction::sample(mesh, [](double) { return 1.0; });
    const double i0 = weighted_pairing(f, u);  // negative
    f = WeightFunction((-1.0 / i0) * static_cast<const GridFunction&>(f), true);  // makes pairing = -1

    const FiberingResult r = fibering_scale(u, p, lambda, f);
    CHECK(r.t_u == Approx(1.0).epsilon(1e-12));
    CHECK(r.energy_at_t == Approx(1.0 - 1.0 / p).epsilon(1e-12));
    CHECK(r.stationary_kind == FiberKind::GlobalMax);
  }
}

TEST_CASE("fibering identities and brute-force extremum kind") {
  std::mt19937_64 rng(101);
  const Mesh1D mesh = Mesh1D::make(0.0, 1.0, 31);
  for (int rep = 0; rep < 100; ++rep) {
    const AdmissibleCase c = random_admissible(mesh, rng);
    const FiberingResult r = fibering_scale(c.u, c.p, c.lambda, c.f);
    // Stationarity identity: t^{p-1} |H| = |pairing|.
    CHECK(std::pow(r.t_u, c.p - 1.0) * std::abs(r.h_value) ==
          Approx(std::abs(r.pairing_value)).epsilon(1e-12));
    // The scaled point lies on the Nehari set.
    GridFunction v = r.t_u * c.u;
    const double nehari = h_lambda(v, c.p, c.lambda) - weighted_pairing(c.f, v);
    CHECK(std::abs(nehari) <= 1e-11 * (1.0 + std::abs(r.h_value) * std::pow(r.t_u, c.p)));
    // Energy formula against a direct evaluation.
    const FunctionalValue fv = e_lambda(v, c.p, c.lambda, c.f);
    CHECK(fv.e_lambda == Approx(r.energy_at_t).margin(1e-11 * (1.0 + std::abs(fv.e_lambda))));

    if (rep < 25) {
      // Brute-force scan of the fiber confirms the predicted extremum kind.
      double best_t = 0.0;
      double best = r.stationary_kind == FiberKind::GlobalMin ? 1e300 : -1e300;
      for (int k = 0; k <= 400; ++k) {
        const double t = r.t_u * std::pow(10.0, -1.0 + 2.0 * k / 400.0);
        const double et = std::pow(t, c.p) / c.p * r.h_value - t * r.pairing_value;
        if (r.stationary_kind == FiberKind::GlobalMin ? et < best : et > best) {
          best = et;
          best_t = t;
        }
      }
      CHECK(std::abs(std::log(best_t / r.t_u)) < 2.5 * (2.0 / 400.0) * std::log(10.0));
    }
  }
}

TEST_CASE("fibering infeasible when the sign product fails") {
  const Mesh1D mesh = Mesh1D::make(0.0, 1.0, 7);
  const GridFunction u = GridFunction::sample(mesh, [](double x) { return x * (1.0 - x); });
  const WeightFunction f = WeightFunction::sample(mesh, [](double) { return 1.0; });
  // lambda = 0: H > 0 and pairing > 0 is fine; flip u to get H > 0, pairing < 0.
  const GridFunction w = -1.0 * u;
  CHECK_THROWS_MATCHES(fibering_scale(w, 2.0, 0.0, f), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == errc::fibering_infeasible;
                       }));
}

TEST_CASE("subcritical solve on classical cases") {
  SECTION("p = 2, f = sin, lambda = 0 gives back the sine") {
    const WeightFunction f = WeightFunction::sample(kMesh, [](double x) { return std::sin(x); });
    const Solution s = solve_subcritical(2.0, 0.0, f);
    CHECK(s.sign_class == SignClass::Positive);
    CHECK(s.energy == Approx(-M_PI / 4.0).margin(1e-4));
    double diff = 0.0;
    for (int i = 1; i <= kMesh.n; ++i) diff = std::max(diff, std::abs(s.u.at_node(i) - std::sin(kMesh.node(i))));
    CHECK(diff < 1e-4);
  }
  SECTION("p = 2, f = phi1, lambda = 1/2 doubles the eigenfunction") {
    const EigenPair e1 = first_eigenpair(2.0, kMesh);
    const WeightFunction f(e1.fn, true);
    const Solution s = solve_subcritical(2.0, 0.5, f);
    CHECK(s.sign_class == SignClass::Positive);
    double diff = 0.0;
    for (std::size_t i = 0; i < s.u.values.size(); ++i)
      diff = std::max(diff, std::abs(s.u.values[i] - 2.0 * e1.fn.values[i]));
    CHECK(diff < 1e-5);
  }
  SECTION("p = 3 stays positive with negative energy") {
    const Mesh1D mesh = Mesh1D::make(0.0, 1.0, 499);
    const WeightFunction f = WeightFunction::sample(mesh, [](double) { return 1.0; });
    const EigenPair e1 = first_eigenpair(3.0, mesh);
    SolveOptions so;
    so.lambda1 = e1.value;
    const Solution s = solve_subcritical(3.0, 0.4 * e1.value, f, so);
    CHECK(s.sign_class == SignClass::Positive);
    CHECK(s.energy < 0.0);
    CHECK(s.pde_residual <= so.solve_tol);
    CHECK(s.nehari_residual <= 1e-8);
  }
  SECTION("rejects lambda at or above lambda1") {
    const WeightFunction f = WeightFunction::sample(kMesh, [](double) { return 1.0; });
    CHECK_THROWS_MATCHES(solve_subcritical(2.0, 1.5, f), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == errc::not_subcritical;
                         }));
  }
}

TEST_CASE("linear solve at p = 2") {
  SECTION("negative multiple of phi1 between the eigenvalues") {
    const EigenPair e1 = first_eigenpair(2.0, kMesh);
    const WeightFunction f(e1.fn, true);
    const Solution s = linear_solve_p2(2.0, f);
    CHECK(s.sign_class == SignClass::Negative);
    double diff = 0.0;
    for (int i = 1; i <= kMesh.n; ++i) {
      const double expect = -std::sin(kMesh.node(i)) / std::sqrt(M_PI / 2.0) / (2.0 - 1.0);
      diff = std::max(diff, std::abs(s.u.at_node(i) - expect));
    }
    CHECK(diff < 1e-4);
    CHECK(s.pde_residual < 1e-10);
  }
  SECTION("poisson closed form") {
    const Mesh1D mesh = Mesh1D::make(0.0, 1.0, 999);
    const WeightFunction f = WeightFunction::sample(mesh, [](double) { return 1.0; });
    const Solution s = linear_solve_p2(0.0, f);
    double diff = 0.0;
    for (int i = 1; i <= mesh.n; ++i) {
      const double x = mesh.node(i);
      diff = std::max(diff, std::abs(s.u.at_node(i) - 0.5 * x * (1.0 - x)));
    }
    CHECK(diff < 1e-6);
  }
  SECTION("pairing changes sign across the worked example zero") {
    const WeightFunction f = WeightFunction::sample(kMesh, [](double x) { return 1.0 - std::sin(x); });
    const double g3 = weighted_pairing(f, linear_solve_p2(3.0, f).u);
    const double g35 = weighted_pairing(f, linear_solve_p2(3.5, f).u);
    CHECK(g3 < 0.0);
    CHECK(g35 > 0.0);
  }
  SECTION("near-resonance is refused") {
    const double lambda1_disc = discrete_p2_eigenvalue(kMesh, 1);
    const WeightFunction f = WeightFunction::sample(kMesh, [](double) { return 1.0; });
    CHECK_THROWS_MATCHES(linear_solve_p2(lambda1_disc + 1e-8, f), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == errc::near_resonance;
                         }));
  }
}

TEST_CASE("nehari minimization reproduces the linear path at p = 2") {
  const EigenPair e1 = first_eigenpair(2.0, kMesh);
  SolveOptions so;
  so.lambda1 = e1.value;

  SECTION("f = phi1 at lambda = 2") {
    const WeightFunction f(e1.fn, true);
    const Solution lin = linear_solve_p2(2.0, f, so);
    const Solution neh = nehari_minimize(2.0, 2.0, f, so);
    CHECK(testsupport::max_diff(lin.u.values, neh.u.values) < 1e-6);
    CHECK(neh.method == SolveMethod::NehariMin);
    CHECK(neh.energy > 0.0);
  }
  SECTION("worked-example weight keeps the linear sign at lambda = 2") {
    const WeightFunction f = WeightFunction::sample(kMesh, [](double x) { return 1.0 - std::sin(x); });
    const Solution lin = linear_solve_p2(2.0, f, so);
    const Solution neh = nehari_minimize(2.0, 2.0, f, so);
    CHECK(lin.sign_class == SignClass::Negative);
    CHECK(neh.sign_class == SignClass::Negative);
    CHECK(testsupport::max_diff(lin.u.values, neh.u.values) < 1e-5);
  }
  SECTION("nehari identity and H sign") {
    const WeightFunction f = WeightFunction::sample(kMesh, [](double x) { return 1.05 - std::sin(x); });
    const Solution s = nehari_minimize(2.0, 1.8, f, so);
    CHECK(std::abs(s.energy - (1.0 / 2.0 - 1.0) * weighted_pairing(f, s.u)) <= 10.0 * so.solve_tol);
    CHECK(s.nehari_residual <= 10.0 * so.solve_tol);
    CHECK(h_lambda(s.u, 2.0, 1.8) < 0.0);
  }
}

TEST_CASE("nehari minimization for p = 3 satisfies the solution contract") {
  const Mesh1D mesh = Mesh1D::make(0.0, M_PI, 799);
  const WeightFunction f = WeightFunction::sample(mesh, [](double x) { return 1.05 - std::sin(x); });
  const EigenPair e1 = first_eigenpair(3.0, mesh);
  SolveOptions so;
  so.lambda1 = e1.value;
  const double lambda = 1.8 * e1.value;
  const Solution s = nehari_minimize(3.0, lambda, f, so);
  CHECK(s.pde_residual <= so.solve_tol);
  CHECK(s.nehari_residual <= 10.0 * so.solve_tol);
  CHECK(s.energy > 0.0);
  CHECK(h_lambda(s.u, 3.0, lambda) < 0.0);
  CHECK(std::abs(s.energy - (1.0 / 3.0 - 1.0) * weighted_pairing(f, s.u)) <=
        10.0 * so.solve_tol * (1.0 + std::abs(s.energy)));
}

TEST_CASE("no admissible start below lambda1") {
  const WeightFunction f = WeightFunction::sample(kMesh, [](double) { return 1.0; });
  CHECK_THROWS_MATCHES(nehari_minimize(2.0, 0.5, f), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == errc::no_admissible_start;
                       }));
}

TEST_CASE("sign-changing nehari minimization") {
  const WeightFunction f = WeightFunction::sample(kMesh, [](double x) { return 1.05 - std::sin(x); });
  const EigenPair e1 = first_eigenpair(2.0, kMesh);
  const EigenPair e2 = second_eigenpair(2.0, kMesh);
  const LambdaStarResult star = lambda_star(2.0, f);
  const MinimizerCheck gs = minimizer_is_solution_check(star, 2.0, f, e2.value);
  SolveOptions so;
  so.lambda1 = e1.value;
  so.lambda2 = e2.value;
  so.lambda_star = star.value;
  const double lambda = 0.5 * (star.value + e2.value);

  SECTION("agrees with the exact linear path") {
    const Solution lin = linear_solve_p2(lambda, f, so);
    const Solution sgn = sign_changing_nehari_minimize(2.0, lambda, f, so, &gs.v);
    CHECK(testsupport::max_diff(lin.u.values, sgn.u.values) < 1e-5);
    CHECK(sgn.sign_class == SignClass::SignChanging);
    CHECK(sgn.energy < 0.0);
    CHECK(sgn.method == SolveMethod::SignChangingNehariMin);
  }
  SECTION("initializer from the critical minimizer lands on the constraint set") {
    auto [vp, vm] = split_parts(gs.v);
    const FiberingResult rp = fibering_scale(vp, 2.0, lambda, f);
    const FiberingResult rm = fibering_scale(vm, 2.0, lambda, f);
    CHECK(rp.stationary_kind == FiberKind::GlobalMin);
    CHECK(rm.stationary_kind == FiberKind::GlobalMax);
    for (const auto& [part, t] : {std::pair{vp, rp.t_u}, std::pair{vm, rm.t_u}}) {
      GridFunction scaled = t * part;
      const double resid = h_lambda(scaled, 2.0, lambda) - weighted_pairing(f, scaled);
      const double scale = (1.0 + scaled.max_abs()) * (1.0 + f.max_abs());
      CHECK(std::abs(resid) <= 1e-10 * scale);
    }
    // The combination is an admissible test point whose energy bounds the
    // minimizer energy from above.
    GridFunction probe(kMesh);
    for (std::size_t i = 0; i < probe.values.size(); ++i)
      probe.values[i] = rp.t_u * vp.values[i] + rm.t_u * vm.values[i];
    const double probe_energy = e_lambda(probe, 2.0, lambda, f).e_lambda;
    CHECK(probe_energy < 0.0);
    const Solution sgn = sign_changing_nehari_minimize(2.0, lambda, f, so, &gs.v);
    CHECK(sgn.energy <= probe_energy + 1e-9 * (1.0 + std::abs(probe_energy)));
  }
  SECTION("window and positivity preconditions") {
    CHECK_THROWS_MATCHES(sign_changing_nehari_minimize(2.0, star.value * 0.9, f, so, &gs.v), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == errc::out_of_window;
                         }));
    const WeightFunction touching = WeightFunction::sample(kMesh, [](double x) { return 1.0 - std::sin(x); });
    CHECK_THROWS_MATCHES(sign_changing_nehari_minimize(2.0, lambda, touching, so, &gs.v), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == errc::positivity_violation;
                         }));
  }
}

TEST_CASE("residual refinement") {
  const WeightFunction f = WeightFunction::sample(kMesh, [](double x) { return 1.05 - std::sin(x); });

  SECTION("a solution is a fixed point") {
    const Mesh1D mesh = Mesh1D::make(0.0, M_PI, 499);
    const WeightFunction fm = WeightFunction::sample(mesh, [](double x) { return 1.05 - std::sin(x); });
    const EigenPair e1 = first_eigenpair(3.0, mesh);
    SolveOptions so;
    so.lambda1 = e1.value;
    const Solution s = nehari_minimize(3.0, 1.8 * e1.value, fm, so);
    const Solution refined = residual_refine(s.u, 3.0, 1.8 * e1.value, fm, so);
    CHECK(testsupport::max_diff(refined.u.values, s.u.values) == 0.0);
    CHECK(refined.pde_residual <= so.solve_tol);
  }
  SECTION("noisy linear solution recovers with the same sign class") {
    const Solution lin = linear_solve_p2(2.0, f);
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> noise(-1e-3, 1e-3);
    GridFunction noisy = lin.u;
    for (double& v : noisy.values) v += noise(rng);
    const Solution refined = residual_refine(noisy, 2.0, 2.0, f);
    CHECK(refined.pde_residual <= 1e-10);
    CHECK(refined.sign_class == lin.sign_class);
    CHECK(testsupport::max_diff(refined.u.values, lin.u.values) < 1e-10 * (1.0 + lin.u.max_abs()));
  }
  SECTION("residual decreases monotonically across accepted steps at p = 3") {
    const Mesh1D mesh = Mesh1D::make(0.0, M_PI, 499);
    const WeightFunction fm = WeightFunction::sample(mesh, [](double x) { return 1.05 - std::sin(x); });
    const EigenPair e1 = first_eigenpair(3.0, mesh);
    SolveOptions so;
    so.lambda1 = e1.value;
    const double lambda = 1.8 * e1.value;
    Solution rough = nehari_minimize(3.0, lambda, fm, so);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> noise(-1e-4, 1e-4);
    for (double& v : rough.u.values) v += noise(rng);
    std::vector<double> trace;
    const Solution refined = residual_refine(rough.u, 3.0, lambda, fm, so, &trace);
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] < trace[i - 1]);
    CHECK(refined.pde_residual <= so.solve_tol);
  }
  SECTION("unreachable tolerance reports divergence") {
    SolveOptions so;
    so.max_iter = 2;
    std::mt19937_64 rng(99);
    const GridFunction rough = testsupport::random_gridfunction(kMesh, rng);
    CHECK_THROWS_MATCHES(residual_refine(rough, 3.0, 2.0, f, so), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == errc::divergence;
                         }));
  }
}

TEST_CASE("structural watchdogs") {
  SECTION("positive solution above lambda1 aborts") {
    const GridFunction pos = GridFunction::sample(kMesh, [](double x) { return std::sin(x) + 0.2; });
    const WeightFunction f = WeightFunction::sample(kMesh, [](double) { return 1.0; });
    SolveOptions so;
    so.lambda1 = 1.0;
    CHECK_THROWS_MATCHES(detail::finalize_solution(pos, 2.0, 2.0, f, SolveMethod::Refined, 0, so), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == errc::watchdog_positive_solution;
                         }));
  }
  SECTION("zero pairing without sign change aborts") {
    // Weight supported away from the bump of u: the pairing vanishes while
    // u stays single-signed.
    GridFunction u(kMesh);
    u.values[10] = 1.0;
    GridFunction fg(kMesh);
    fg.values[kMesh.n - 10] = 1.0;
    const WeightFunction f(fg, true);
    SolveOptions so;
    CHECK_THROWS_MATCHES(detail::finalize_solution(u, 2.0, 0.5, f, SolveMethod::Refined, 0, so), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == errc::watchdog_zero_pairing;
                         }));
  }
  SECTION("double nonpositive H below lambda2 aborts") {
    const GridFunction w = GridFunction::sample(kMesh, [](double x) { return std::sin(2.0 * x); });
    SolveOptions so;
    so.lambda2 = 40.0;  // pretend the window extends far beyond the real lambda2
    CHECK_THROWS_MATCHES(detail::second_eigenvalue_watchdog(w, 2.0, 8.0, so), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == errc::watchdog_second_eigenvalue;
                         }));
    // At an honest lambda2 hint the same iterate is fine.
    SolveOptions honest;
    honest.lambda2 = 4.0;
    CHECK_NOTHROW(detail::second_eigenvalue_watchdog(w, 2.0, 8.0, honest));
  }
}
