#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "amplab/error.hpp"
#include "amplab/functionals.hpp"

namespace amplab {
namespace detail {

/// State of the first-order system (u, w) with w = |u'|^{p-2} u'. The w-form
/// avoids differentiating the degenerate coefficient: u' = sign(w)|w|^{1/(p-1)}.
struct ShootState {
  double u, w;
};

struct ShootDeriv {
  double p, lambda;
  ShootState operator()(const ShootState& y) const {
    return {odd_pow(y.w, 1.0 / (p - 1.0)), -lambda * odd_pow(y.u, p - 1.0)};
  }
};

/// Counts zeros of u on (0, L] for the initial-value problem u(0)=0, w(0)=1,
/// integrated with an adaptive Cash-Karp RK45 step.
inline int shooting_zero_count(double p, double lambda, double L) {
  constexpr double a2 = 1.0 / 5, a3 = 3.0 / 10, a4 = 3.0 / 5, a5 = 1.0, a6 = 7.0 / 8;
  constexpr double b21 = 1.0 / 5;
  constexpr double b31 = 3.0 / 40, b32 = 9.0 / 40;
  constexpr double b41 = 3.0 / 10, b42 = -9.0 / 10, b43 = 6.0 / 5;
  constexpr double b51 = -11.0 / 54, b52 = 5.0 / 2, b53 = -70.0 / 27, b54 = 35.0 / 27;
  constexpr double b61 = 1631.0 / 55296, b62 = 175.0 / 512, b63 = 575.0 / 13824, b64 = 44275.0 / 110592,
                   b65 = 253.0 / 4096;
  constexpr double c1 = 37.0 / 378, c3 = 250.0 / 621, c4 = 125.0 / 594, c6 = 512.0 / 1771;
  constexpr double d1 = 2825.0 / 27648, d3 = 18575.0 / 48384, d4 = 13525.0 / 55296, d5 = 277.0 / 14336,
                   d6 = 1.0 / 4;
  (void)a2; (void)a3; (void)a4; (void)a5; (void)a6;

  const ShootDeriv f{p, lambda};
  ShootState y{0.0, 1.0};
  double t = 0.0;
  double dt = std::min(1e-3, L / 64.0);
  const double rtol = 1e-12, atol = 1e-14;
  int zeros = 0;
  double prev_u = 0.0;
  bool left_origin = false;
  long steps = 0;
  const long max_steps = 50'000'000;

  while (t < L) {
    if (++steps > max_steps) fail(errc::no_convergence, "shooting integrator exceeded the step budget");
    dt = std::min(dt, L - t);
    const ShootState k1 = f(y);
    const ShootState k2 = f({y.u + dt * b21 * k1.u, y.w + dt * b21 * k1.w});
    const ShootState k3 = f({y.u + dt * (b31 * k1.u + b32 * k2.u), y.w + dt * (b31 * k1.w + b32 * k2.w)});
    const ShootState k4 = f({y.u + dt * (b41 * k1.u + b42 * k2.u + b43 * k3.u),
                             y.w + dt * (b41 * k1.w + b42 * k2.w + b43 * k3.w)});
    const ShootState k5 = f({y.u + dt * (b51 * k1.u + b52 * k2.u + b53 * k3.u + b54 * k4.u),
                             y.w + dt * (b51 * k1.w + b52 * k2.w + b53 * k3.w + b54 * k4.w)});
    const ShootState k6 =
        f({y.u + dt * (b61 * k1.u + b62 * k2.u + b63 * k3.u + b64 * k4.u + b65 * k5.u),
           y.w + dt * (b61 * k1.w + b62 * k2.w + b63 * k3.w + b64 * k4.w + b65 * k5.w)});
    const double u5 = y.u + dt * (c1 * k1.u + c3 * k3.u + c4 * k4.u + c6 * k6.u);
    const double w5 = y.w + dt * (c1 * k1.w + c3 * k3.w + c4 * k4.w + c6 * k6.w);
    const double u4 = y.u + dt * (d1 * k1.u + d3 * k3.u + d4 * k4.u + d5 * k5.u + d6 * k6.u);
    const double w4 = y.w + dt * (d1 * k1.w + d3 * k3.w + d4 * k4.w + d5 * k5.w + d6 * k6.w);
    const double sc_u = atol + rtol * std::max(std::abs(y.u), std::abs(u5));
    const double sc_w = atol + rtol * std::max(std::abs(y.w), std::abs(w5));
    const double err = std::max(std::abs(u5 - u4) / sc_u, std::abs(w5 - w4) / sc_w);

    if (err <= 1.0) {
      t += dt;
      y = {u5, w5};
      if (!left_origin) {
        if (std::abs(y.u) > 0.0) {
          left_origin = true;
          prev_u = y.u;
        }
      } else if (y.u == 0.0 || y.u * prev_u < 0.0) {
        ++zeros;
        prev_u = (y.u == 0.0) ? -prev_u : y.u;
      } else {
        prev_u = y.u;
      }
    }
    const double grow = (err > 0.0) ? 0.9 * std::pow(err, -0.2) : 5.0;
    dt *= std::clamp(grow, 0.2, 5.0);
    dt = std::max(dt, 1e-14 * std::max(1.0, L));
  }
  return zeros;
}

}  // namespace detail

/// Independent eigenvalue oracle: bisects lambda until the k-th zero of the
/// shooting solution lands at L (equivalently, until the zero count on (0, L]
/// flips from k-1 to k). Seeded from the classical bracket and expanded
/// geometrically before bisection; never touches the finite element path.
inline double shooting_eigenvalue(double p, double L, int k, double tol = 1e-10) {
  require_exponent(p);
  if (!(L > 0.0)) fail(errc::invalid_interval, "need L > 0");
  if (k < 1) fail(errc::bracket_failure, "need k >= 1");

  const double pi_p = 2.0 * M_PI / (p * std::sin(M_PI / p));
  double seed = (p - 1.0) * std::pow(static_cast<double>(k) * pi_p / L, p);
  auto below = [&](double lam) { return detail::shooting_zero_count(p, lam, L) < k; };

  double lo = seed * 0.7, hi = seed * 1.4;
  int guard = 0;
  while (!below(lo)) {
    lo *= 0.5;
    if (++guard > 60) fail(errc::bracket_failure, "no lower bracket found for the shooting eigenvalue");
  }
  guard = 0;
  while (below(hi)) {
    hi *= 2.0;
    if (++guard > 60) fail(errc::bracket_failure, "no upper bracket found for the shooting eigenvalue");
  }
  while (hi - lo > tol * (1.0 + std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    (below(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace amplab
