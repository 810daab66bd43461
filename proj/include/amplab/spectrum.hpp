#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "amplab/descent.hpp"
#include "amplab/error.hpp"
#include "amplab/functionals.hpp"
#include "amplab/linalg.hpp"
#include "amplab/mesh.hpp"
#include "amplab/options.hpp"

namespace amplab {

/// Eigenvalue estimate with its L^p-normalized eigenfunction.
struct EigenPair {
  double value = 0.0;
  GridFunction fn;
  int index = 1;
  int iterations = 0;
  double residual = 0.0;  // max-norm of the Rayleigh-quotient gradient at fn
};

namespace detail {

/// Minimizes R(u) = integral_grad_pow / integral_abs_pow by descent along the
/// stiffness-preconditioned gradient with a backtracking line search,
/// renormalizing to the L^p unit sphere after each accepted step.
inline EigenPair rayleigh_minimize(double p, const Mesh1D& mesh, GridFunction u, const EigenOptions& opts) {
  require_exponent(p);
  normalize_lp(u, p);

  auto rayleigh = [&](const GridFunction& v) {
    const double mass = integral_abs_pow(v, p);
    if (!(mass > 0.0)) return std::numeric_limits<double>::infinity();
    return integral_grad_pow(v, p) / mass;
  };

  auto residual_of = [&](const GridFunction& v, double val) {
    const auto gd = grad_dirichlet_pow(v, p);
    const auto gm = grad_mass_pow(v, p);
    double m = 0.0;
    for (std::size_t i = 0; i < gd.size(); ++i) m = std::max(m, std::abs(gd[i] - val * gm[i]));
    return m;
  };

  double value = integral_grad_pow(u, p);  // mass is 1 after normalization
  double step = 1.0;
  int it = 0;
  double res = 0.0;
  GridFunction trial(mesh);
  for (; it < opts.max_iter; ++it) {
    const auto gd = grad_dirichlet_pow(u, p);
    const auto gm = grad_mass_pow(u, p);
    std::vector<double> g(gd.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = gd[i] - value * gm[i];
    res = max_abs(g);
    if (res <= opts.tol * (1.0 + std::abs(value))) break;

    const SpdTridiagonalFactor K(weighted_stiffness_matrix(u, p));
    std::vector<double> d = K.solve(g);
    for (double& v : d) v = -v;
    double slope = dot(d, g);
    if (!(slope < 0.0)) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = -g[i];
      slope = -dot(g, g);
    }

    auto phi = [&](double a) {
      for (std::size_t i = 0; i < d.size(); ++i) trial.values[i] = u.values[i] + a * d[i];
      return rayleigh(trial);
    };
    const double noise = 1e-15 * static_cast<double>(mesh.n) * (1.0 + std::abs(value));
    const LineSearchResult ls = line_search(phi, value, slope, std::min(step * 2.0, 1.0e4), noise);
    if (ls.ok) {
      for (std::size_t i = 0; i < d.size(); ++i) u.values[i] += ls.alpha * d[i];
      normalize_lp(u, p);
      value = integral_grad_pow(u, p);
      step = ls.alpha;
      continue;
    }
    // Near the rounding floor of the quotient the sufficient-decrease test
    // cannot be certified, but the gradient residual is still computed
    // without cancellation against a large constant. Keep stepping while it
    // shrinks.
    bool improved = false;
    for (double a : {step, 0.5 * step, 0.25 * step, 2.0 * step, 1.0, 0.5, 0.2, 0.08, 0.03, 0.01}) {
      if (!(a > 0.0)) continue;
      for (std::size_t i = 0; i < d.size(); ++i) trial.values[i] = u.values[i] + a * d[i];
      GridFunction cand = trial;
      normalize_lp(cand, p);
      const double value_c = integral_grad_pow(cand, p);
      if (residual_of(cand, value_c) < 0.999 * res) {
        u = std::move(cand);
        value = value_c;
        step = a;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  res = residual_of(u, value);
  if (res > opts.tol * (1.0 + std::abs(value)))
    fail(errc::no_convergence,
         "rayleigh descent stopped at iter " + std::to_string(it) + " with residual " + std::to_string(res) +
             " above tolerance, value " + std::to_string(value));

  // Sign-fix positive.
  double total = std::accumulate(u.values.begin(), u.values.end(), 0.0);
  if (total < 0.0)
    for (double& v : u.values) v = -v;

  EigenPair out;
  out.value = value;
  out.fn = std::move(u);
  out.index = 1;
  out.iterations = it;
  out.residual = res;
  return out;
}

}  // namespace detail

/// First eigenpair of the 1D Dirichlet p-Laplacian on the mesh; the positive
/// parabola initializer lies in the basin of the first eigenfunction.
inline EigenPair first_eigenpair(double p, const Mesh1D& mesh, const EigenOptions& opts = {}) {
  GridFunction u0 = GridFunction::sample(mesh, [&](double x) { return (x - mesh.a) * (mesh.b - x); });
  return detail::rayleigh_minimize(p, mesh, std::move(u0), opts);
}

/// Second eigenpair via the half-interval construction: the first eigenpair
/// on (a, (a+b)/2) extended antisymmetrically about the midpoint. Exact in 1D
/// because the second eigenfunction has two nodal domains of equal length.
inline EigenPair second_eigenpair(double p, const Mesh1D& mesh, const EigenOptions& opts = {}) {
  if (mesh.n % 2 == 0)
    fail(errc::midpoint_not_a_node, "second eigenpair needs odd n; midpoint is not a node for n = " + std::to_string(mesh.n));
  const double mid = 0.5 * (mesh.a + mesh.b);
  const int m = (mesh.n - 1) / 2;
  if (m < 2) fail(errc::too_coarse, "half interval has fewer than 2 interior nodes");
  const Mesh1D half = Mesh1D::make(mesh.a, mid, m);
  EigenPair e = first_eigenpair(p, half, opts);

  GridFunction fn(mesh);
  for (int j = 1; j <= m; ++j) {
    fn.values[static_cast<std::size_t>(j - 1)] = e.fn.values[static_cast<std::size_t>(j - 1)];
    fn.values[static_cast<std::size_t>(mesh.n - j)] = -e.fn.values[static_cast<std::size_t>(j - 1)];
  }
  fn.values[static_cast<std::size_t>(m)] = 0.0;  // midpoint node
  normalize_lp(fn, p);

  EigenPair out;
  out.value = e.value;
  out.fn = std::move(fn);
  out.index = 2;
  out.iterations = e.iterations;
  out.residual = e.residual;
  return out;
}

}  // namespace amplab
