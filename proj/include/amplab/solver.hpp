#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "amplab/error.hpp"
#include "amplab/functionals.hpp"
#include "amplab/linalg.hpp"
#include "amplab/mesh.hpp"
#include "amplab/options.hpp"
#include "amplab/spectrum.hpp"

namespace amplab {

enum class FiberKind { GlobalMin, GlobalMax };

/// Nehari scaling of a direction u and the energy at the scaled point.
struct FiberingResult {
  double t_u = 0.0;
  double energy_at_t = 0.0;
  FiberKind stationary_kind = FiberKind::GlobalMin;
  double h_value = 0.0;
  double pairing_value = 0.0;
};

enum class SolveMethod { DirectMin, LinearP2, NehariMin, SignChangingNehariMin, Refined };

inline const char* solve_method_name(SolveMethod m) {
  switch (m) {
    case SolveMethod::DirectMin: return "direct-min";
    case SolveMethod::LinearP2: return "linear-p2";
    case SolveMethod::NehariMin: return "nehari-min";
    case SolveMethod::SignChangingNehariMin: return "sign-changing-nehari-min";
    case SolveMethod::Refined: return "refined";
  }
  return "unknown";
}

/// A computed solution of the boundary value problem at fixed (p, lambda, f).
struct Solution {
  GridFunction u;
  double p = 2.0;
  double lambda = 0.0;
  double energy = 0.0;
  double pde_residual = 0.0;     // max-norm of grad_e_lambda
  double nehari_residual = 0.0;  // |H_lambda(u) - integral of f*u|
  SignClass sign_class = SignClass::Indeterminate;
  SolveMethod method = SolveMethod::DirectMin;
  int iterations = 0;
};

/// Scales u onto the Nehari set; requires H_lambda(u) * (integral of f*u) > 0.
inline FiberingResult fibering_scale(const GridFunction& u, double p, double lambda, const WeightFunction& f) {
  require_exponent(p);
  FiberingResult r;
  r.h_value = h_lambda(u, p, lambda);
  r.pairing_value = weighted_pairing(f, u);
  if (!(r.h_value * r.pairing_value > 0.0))
    fail(errc::fibering_infeasible, "H*pairing = " + std::to_string(r.h_value * r.pairing_value) + " is not positive");
  const double q = 1.0 / (p - 1.0);
  r.t_u = std::pow(std::abs(r.pairing_value), q) / std::pow(std::abs(r.h_value), q);
  r.energy_at_t = (1.0 / p - 1.0) * std::pow(std::abs(r.pairing_value), p * q) /
                  std::pow(std::abs(r.h_value), q) * (r.h_value > 0.0 ? 1.0 : -1.0);
  r.stationary_kind = r.h_value > 0.0 ? FiberKind::GlobalMin : FiberKind::GlobalMax;
  return r;
}

namespace detail {

inline double scale_of(const GridFunction& u, const WeightFunction& f) {
  return (1.0 + u.max_abs()) * (1.0 + f.max_abs());
}

/// Action of the second derivative of E_lambda at u on a vector. Weights
/// |s|^{p-2} and |u|^{p-2} are floored away from zero so the action stays
/// finite for p < 2; the refinement loop only uses this as a descent
/// direction oracle, never as a linear system to invert.
inline std::vector<double> hessian_e_apply(const GridFunction& u, double p, double lambda,
                                           const std::vector<double>& v) {
  const int n = u.mesh.n;
  const double h = u.mesh.h;
  double s_scale = 0.0, u_scale = u.max_abs();
  for (int e = 0; e <= n; ++e) s_scale = std::max(s_scale, std::abs(u.at_node(e + 1) - u.at_node(e)) / h);
  const double s_floor = 1e-10 * (s_scale + 1e-300);
  const double u_floor = 1e-10 * (u_scale + 1e-300);
  auto vat = [&](int i) -> double { return (i <= 0 || i > n) ? 0.0 : v[static_cast<std::size_t>(i - 1)]; };

  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int e = 0; e <= n; ++e) {
    const double s = (u.at_node(e + 1) - u.at_node(e)) / h;
    const double w = (p - 1.0) * std::pow(std::max(std::abs(s), s_floor), p - 2.0) / h;
    const double dv = vat(e + 1) - vat(e);
    if (e >= 1) out[static_cast<std::size_t>(e - 1)] -= w * dv;
    if (e < n) out[static_cast<std::size_t>(e)] += w * dv;
  }
  for (int e = 0; e <= n; ++e) {
    const double ua = u.at_node(e), ub = u.at_node(e + 1);
    const double va = vat(e), vb = vat(e + 1);
    for (int q = 0; q < 4; ++q) {
      const double t = Gauss4::t[q];
      const double uq = ua + (ub - ua) * t;
      const double vq = va + (vb - va) * t;
      const double wq =
          Gauss4::w[q] * lambda * (p - 1.0) * std::pow(std::max(std::abs(uq), u_floor), p - 2.0) * vq * h;
      if (e >= 1) out[static_cast<std::size_t>(e - 1)] -= wq * (1.0 - t);
      if (e < n) out[static_cast<std::size_t>(e)] -= wq * t;
    }
  }
  return out;
}

/// Exact tridiagonal second derivative of E_lambda at u; weights floored as
/// in hessian_e_apply so the entries stay bounded for p < 2.
inline Tridiagonal hessian_e_matrix(const GridFunction& u, double p, double lambda) {
  const int n = u.mesh.n;
  const double h = u.mesh.h;
  double s_scale = 0.0;
  for (int e = 0; e <= n; ++e) s_scale = std::max(s_scale, std::abs(u.at_node(e + 1) - u.at_node(e)) / h);
  const double s_floor = 1e-10 * (s_scale + 1e-300);
  const double u_floor = 1e-10 * (u.max_abs() + 1e-300);

  Tridiagonal T(n);
  for (int e = 0; e <= n; ++e) {
    const double s = (u.at_node(e + 1) - u.at_node(e)) / h;
    const double w = (p - 1.0) * std::pow(std::max(std::abs(s), s_floor), p - 2.0) / h;
    if (e >= 1) T.diag[static_cast<std::size_t>(e - 1)] += w;
    if (e < n) T.diag[static_cast<std::size_t>(e)] += w;
    if (e >= 1 && e < n) {
      T.lower[static_cast<std::size_t>(e - 1)] -= w;
      T.upper[static_cast<std::size_t>(e - 1)] -= w;
    }
    const double ua = u.at_node(e), ub = u.at_node(e + 1);
    for (int q = 0; q < 4; ++q) {
      const double t = Gauss4::t[q];
      const double uq = ua + (ub - ua) * t;
      const double wm =
          Gauss4::w[q] * lambda * (p - 1.0) * std::pow(std::max(std::abs(uq), u_floor), p - 2.0) * h;
      if (e >= 1) T.diag[static_cast<std::size_t>(e - 1)] -= wm * (1.0 - t) * (1.0 - t);
      if (e < n) T.diag[static_cast<std::size_t>(e)] -= wm * t * t;
      if (e >= 1 && e < n) {
        T.lower[static_cast<std::size_t>(e - 1)] -= wm * t * (1.0 - t);
        T.upper[static_cast<std::size_t>(e - 1)] -= wm * t * (1.0 - t);
      }
    }
  }
  return T;
}

/// Polishes an approximate critical point of E_lambda to a small weak
/// residual. Three ingredients, tried in order per iteration:
///   - an exact fibering rescale, which handles the ray direction in closed
///     form (near lambda_1 that direction is nearly singular in the Hessian
///     and would otherwise dominate the cost),
///   - a Newton step on the tridiagonal linearization with Levenberg-style
///     diagonal damping, accepted on residual decrease,
///   - a preconditioned least-squares descent step on G^T K^{-1} G / 2,
///     accepted on its own merit function.
/// Converges to critical points regardless of their Morse index, which plain
/// energy descent cannot do for Nehari-type saddle points.
inline int residual_descent(GridFunction& u, double p, double lambda, const WeightFunction& f,
                            double target, int max_iter, std::vector<double>* trace = nullptr) {
  const SpdTridiagonalFactor K(weighted_stiffness_matrix(u, p));
  GridFunction trial(u.mesh);

  auto residual_at = [&](const GridFunction& w) { return grad_e_lambda(w, p, lambda, f).max_abs(); };

  auto try_ray_rescale = [&](double res_now) {
    const double H = h_lambda(u, p, lambda);
    const double I = weighted_pairing(f, u);
    if (!(H * I > 0.0)) return false;
    const double t = std::pow(std::abs(I) / std::abs(H), 1.0 / (p - 1.0));
    if (!std::isfinite(t) || std::abs(t - 1.0) > 0.5) return false;
    GridFunction cand = u;
    cand *= t;
    if (residual_at(cand) < res_now) {
      u = std::move(cand);
      return true;
    }
    return false;
  };

  GridFunction G = grad_e_lambda(u, p, lambda, f);
  double res = max_abs(G.values);
  double best = res;
  int since_best = 0;
  int it = 0;
  for (; it < max_iter; ++it) {
    if (trace) trace->push_back(res);
    if (res <= target) return it;
    if (++since_best > 200)
      fail(errc::divergence, "residual polish made no progress for 200 iterations at residual " + std::to_string(res));

    if (it % 6 == 0 && try_ray_rescale(res)) {
      G = grad_e_lambda(u, p, lambda, f);
      res = max_abs(G.values);
    }

    bool accepted = false;
    {
      // Newton step with a plain backtracking damping. No diagonal shift:
      // the linearization is indefinite at Nehari saddle points and shifting
      // it toward gradient flow walks away from the target.
      std::vector<double> rhs(G.values.size());
      for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -G.values[i];
      std::vector<double> delta;
      try {
        delta = solve_tridiagonal(hessian_e_matrix(u, p, lambda), std::move(rhs));
      } catch (const Error&) {
        Tridiagonal shifted = hessian_e_matrix(u, p, lambda);
        double diag_scale = 0.0;
        for (double v : shifted.diag) diag_scale = std::max(diag_scale, std::abs(v));
        for (double& v : shifted.diag) v += 1e-8 * diag_scale * (v >= 0.0 ? 1.0 : -1.0);
        std::vector<double> rhs2(G.values.size());
        for (std::size_t i = 0; i < rhs2.size(); ++i) rhs2[i] = -G.values[i];
        try {
          delta = solve_tridiagonal(std::move(shifted), std::move(rhs2));
        } catch (const Error&) {
        }
      }
      double alpha = 1.0;
      for (int bt = 0; bt < 30 && !accepted && !delta.empty(); ++bt) {
        for (std::size_t i = 0; i < delta.size(); ++i) trial.values[i] = u.values[i] + alpha * delta[i];
        const double res_t = residual_at(trial);
        if (res_t < res * (1.0 - 1e-4 * alpha)) {
          u = trial;
          res = res_t;
          accepted = true;
        }
        alpha *= 0.5;
      }
    }

    if (!accepted) {
      // Least-squares descent on Phi = G^T K^{-1} G / 2; Phi progress is
      // accepted even when the max-norm moves sideways for a while.
      const std::vector<double> kg = K.solve(G.values);
      double phi0 = 0.0;
      for (std::size_t i = 0; i < kg.size(); ++i) phi0 += 0.5 * kg[i] * G.values[i];
      const std::vector<double> gphi = hessian_e_apply(u, p, lambda, kg);
      std::vector<double> d = K.solve(gphi);
      double slope = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = -d[i];
        slope += d[i] * gphi[i];
      }
      if (slope < 0.0) {
        auto phi_at = [&](double a) {
          for (std::size_t i = 0; i < d.size(); ++i) trial.values[i] = u.values[i] + a * d[i];
          const GridFunction Gt = grad_e_lambda(trial, p, lambda, f);
          const std::vector<double> kgt = K.solve(Gt.values);
          double s = 0.0;
          for (std::size_t i = 0; i < kgt.size(); ++i) s += 0.5 * kgt[i] * Gt.values[i];
          return s;
        };
        const LineSearchResult ls = line_search(phi_at, phi0, slope, 1.0);
        if (ls.ok) {
          for (std::size_t i = 0; i < d.size(); ++i) u.values[i] += ls.alpha * d[i];
          res = residual_at(u);
          accepted = true;
        }
      }
    }
    if (!accepted)
      fail(errc::divergence,
           "residual polish stalled at residual " + std::to_string(res) + " (target " + std::to_string(target) + ")");
    if (res < best * (1.0 - 1e-9)) {
      best = res;
      since_best = 0;
    }
    G = grad_e_lambda(u, p, lambda, f);
    res = max_abs(G.values);
  }
  fail(errc::divergence, "residual polish: max_iter reached at residual " + std::to_string(res));
}

/// Exact ray rescale onto the Nehari set when the fibering precondition
/// holds and the correction is small. Near the window boundary H -> 0 makes
/// the scaling ill-conditioned, so the rescale is reverted whenever it
/// degrades the weak residual.
inline void nehari_rescale_inplace(GridFunction& u, double p, double lambda, const WeightFunction& f,
                                   double solve_tol) {
  const double H = h_lambda(u, p, lambda);
  const double I = weighted_pairing(f, u);
  if (!(H * I > 0.0)) return;
  const double t = std::pow(std::abs(I) / std::abs(H), 1.0 / (p - 1.0));
  if (std::abs(t - 1.0) > 0.25 || !std::isfinite(t)) return;
  const double res_before = grad_e_lambda(u, p, lambda, f).max_abs();
  GridFunction saved = u;
  u *= t;
  const double res_after = grad_e_lambda(u, p, lambda, f).max_abs();
  if (res_after > std::max(res_before, solve_tol)) u = std::move(saved);
}

/// Refine-then-rescale alternation: ends with the residual at target and the
/// Nehari identity as close to rounding level as the rescale conditioning
/// allows.
inline int finish_on_nehari(GridFunction& u, double p, double lambda, const WeightFunction& f,
                            const SolveOptions& opts) {
  int used = 0;
  for (int round = 0; round < 5; ++round) {
    used += residual_descent(u, p, lambda, f, 0.3 * opts.solve_tol, opts.max_iter);
    nehari_rescale_inplace(u, p, lambda, f, opts.solve_tol);
    const double res = grad_e_lambda(u, p, lambda, f).max_abs();
    if (res <= opts.solve_tol) return used;
  }
  fail(errc::no_convergence, "refine/rescale alternation did not settle below solve_tol");
}

inline bool hint_set(double v) { return std::isfinite(v); }

/// Second-eigenvalue criterion watchdog: a sign-changing iterate with both
/// parts at nonpositive H while lambda sits below lambda_2 contradicts the
/// spectral bound and means the iteration left the valid regime.
inline void second_eigenvalue_watchdog(const GridFunction& w, double p, double lambda, const SolveOptions& opts) {
  if (!hint_set(opts.lambda2)) return;
  if (!(lambda < opts.lambda2 * (1.0 - opts.margin_rel))) return;
  auto [wp, wm] = split_parts(w);
  if (!(wp.max_abs() > 0.0) || !(wm.max_abs() > 0.0)) return;
  if (h_lambda(wp, p, lambda) <= 0.0 && h_lambda(wm, p, lambda) <= 0.0)
    fail(errc::watchdog_second_eigenvalue,
         "iterate has H(w+) <= 0 and H(w-) <= 0 at lambda = " + std::to_string(lambda) + " < lambda2 = " +
             std::to_string(opts.lambda2));
}

inline Solution finalize_solution(GridFunction u, double p, double lambda, const WeightFunction& f,
                                  SolveMethod method, int iterations, const SolveOptions& opts) {
  Solution s;
  const FunctionalValue fv = e_lambda(u, p, lambda, f);
  s.p = p;
  s.lambda = lambda;
  s.energy = fv.e_lambda;
  s.pde_residual = grad_e_lambda(u, p, lambda, f).max_abs();
  s.nehari_residual = std::abs(fv.h_lambda - fv.pairing);
  s.sign_class = sign_classify(u, opts.delta_rel);
  s.method = method;
  s.iterations = iterations;
  s.u = std::move(u);

  if (hint_set(opts.lambda1) && lambda > opts.lambda1 * (1.0 + opts.margin_rel) &&
      s.sign_class == SignClass::Positive)
    fail(errc::watchdog_positive_solution,
         "positive solution reported at lambda = " + std::to_string(lambda) + " > lambda1 = " +
             std::to_string(opts.lambda1));
  if (std::abs(fv.pairing) <= opts.solve_tol * scale_of(s.u, f) && s.sign_class != SignClass::SignChanging)
    fail(errc::watchdog_zero_pairing, "zero-pairing solution is not sign-changing at lambda = " + std::to_string(lambda));
  return s;
}

/// Armijo descent on the energy itself; only valid where E_lambda is
/// coercive (the subcritical window).
inline int energy_descent(GridFunction& u, double p, double lambda, const WeightFunction& f,
                          double target_res, int max_iter) {
  double energy = e_lambda(u, p, lambda, f).e_lambda;
  double step = 1.0;
  GridFunction trial(u.mesh);
  for (int it = 0; it < max_iter; ++it) {
    const GridFunction G = grad_e_lambda(u, p, lambda, f);
    if (G.max_abs() <= target_res) return it;
    const SpdTridiagonalFactor K(weighted_stiffness_matrix(u, p));
    std::vector<double> d = K.solve(G.values);
    double slope = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = -d[i];
      slope += d[i] * G.values[i];
    }
    auto phi = [&](double a) {
      for (std::size_t i = 0; i < d.size(); ++i) trial.values[i] = u.values[i] + a * d[i];
      return e_lambda(trial, p, lambda, f).e_lambda;
    };
    const LineSearchResult ls = line_search(phi, energy, slope, std::min(2.0 * step, 1e3));
    if (!ls.ok) return it;  // hand over to the residual stage
    for (std::size_t i = 0; i < d.size(); ++i) u.values[i] += ls.alpha * d[i];
    energy = ls.value;
    step = ls.alpha;
  }
  return max_iter;
}

}  // namespace detail

/// Exact discrete solve of the p = 2 problem: (stiffness - lambda*mass) u =
/// mass*f, the unique solution between eigenvalues.
inline Solution linear_solve_p2(double lambda, const WeightFunction& f, const SolveOptions& opts = {}) {
  const Mesh1D& mesh = f.mesh;
  if (distance_to_p2_spectrum(mesh, lambda) < 1e-6)
    fail(errc::near_resonance, "lambda = " + std::to_string(lambda) + " is within 1e-6 of a discrete eigenvalue");
  Tridiagonal T = add_scaled(stiffness_matrix(mesh), -lambda, mass_matrix(mesh));
  std::vector<double> u = solve_tridiagonal(std::move(T), pairing_vector(f));
  return detail::finalize_solution(GridFunction(mesh, std::move(u)), 2.0, lambda, f, SolveMethod::LinearP2, 1, opts);
}

/// Global minimization of the coercive energy below lambda_1: exact linear
/// solve at p = 2, preconditioned descent plus residual polish otherwise.
inline Solution solve_subcritical(double p, double lambda, const WeightFunction& f, const SolveOptions& opts = {}) {
  require_exponent(p);
  const Mesh1D& mesh = f.mesh;
  double lambda1 = opts.lambda1;
  if (!detail::hint_set(lambda1)) lambda1 = first_eigenpair(p, mesh).value;
  if (!(lambda < lambda1))
    fail(errc::not_subcritical, "lambda = " + std::to_string(lambda) + " is not below lambda1 = " + std::to_string(lambda1));

  if (p == 2.0) {
    Tridiagonal T = add_scaled(stiffness_matrix(mesh), -lambda, mass_matrix(mesh));
    std::vector<double> u = solve_tridiagonal(std::move(T), pairing_vector(f));
    return detail::finalize_solution(GridFunction(mesh, std::move(u)), p, lambda, f, SolveMethod::DirectMin, 1, opts);
  }

  const SpdTridiagonalFactor poisson(stiffness_matrix(mesh));
  GridFunction u(mesh, poisson.solve(pairing_vector(f)));  // p = 2 Poisson warm start
  int it = detail::energy_descent(u, p, lambda, f, 1e-5 * detail::scale_of(u, f), opts.max_iter);
  it += detail::finish_on_nehari(u, p, lambda, f, opts);
  return detail::finalize_solution(std::move(u), p, lambda, f, SolveMethod::DirectMin, it, opts);
}

/// Polishes an approximate solution to a small weak residual: one exact
/// linear correction at p = 2, damped residual descent otherwise. The sign
/// class of the input (at a coarse threshold) must survive.
inline Solution residual_refine(const GridFunction& u0, double p, double lambda, const WeightFunction& f,
                                const SolveOptions& opts = {}, std::vector<double>* trace = nullptr) {
  require_exponent(p);
  require_same_mesh(u0.mesh, f.mesh);
  const SignClass class_in = sign_classify(u0, 1e-3);

  GridFunction u = u0;
  int it = 0;
  if (p == 2.0) {
    if (distance_to_p2_spectrum(u0.mesh, lambda) < 1e-6)
      fail(errc::near_resonance, "refine at p = 2 needs lambda away from the discrete spectrum");
    Tridiagonal T = add_scaled(stiffness_matrix(u0.mesh), -lambda, mass_matrix(u0.mesh));
    u = GridFunction(u0.mesh, solve_tridiagonal(std::move(T), pairing_vector(f)));
    it = 1;
    if (trace) trace->push_back(grad_e_lambda(u, p, lambda, f).max_abs());
  } else {
    it = detail::residual_descent(u, p, lambda, f, opts.solve_tol, opts.max_iter, trace);
  }

  const SignClass class_out = sign_classify(u, 1e-3);
  if (class_in != SignClass::Indeterminate && class_out != class_in)
    fail(errc::basin_escape, std::string("sign class changed from ") + sign_class_name(class_in) + " to " +
                                 sign_class_name(class_out));
  return detail::finalize_solution(std::move(u), p, lambda, f, SolveMethod::Refined, it, opts);
}

/// Ground state on (lambda_1, lambda_*): minimizes the fibered energy
/// u -> E_lambda(t_u u) over the admissible cone {H_lambda < 0, pairing < 0}
/// and polishes the scaled point. Every solution in this window is the
/// global maximum of its own fiber, so the reduced functional is the right
/// object to descend.
inline Solution nehari_minimize(double p, double lambda, const WeightFunction& f, const SolveOptions& opts = {},
                                const GridFunction* warm = nullptr) {
  require_exponent(p);
  const Mesh1D& mesh = f.mesh;
  const std::vector<double> c = pairing_vector(f);
  const double q = 1.0 / (p - 1.0);

  auto admissible = [&](const GridFunction& u, double& H, double& I) {
    H = h_lambda(u, p, lambda);
    I = weighted_pairing(f, u);
    return H < 0.0 && I < 0.0;
  };

  GridFunction u(mesh);
  double H = 0.0, I = 0.0;
  bool have_start = false;
  if (warm != nullptr && warm->mesh == mesh) {
    u = *warm;
    have_start = u.max_abs() > 0.0 && admissible(u, H, I);
  }
  if (!have_start) {
    const EigenPair e1 = first_eigenpair(p, mesh);
    u = -1.0 * e1.fn;
    have_start = admissible(u, H, I);
  }
  if (!have_start)
    fail(errc::no_admissible_start, "no direction with H < 0 and pairing < 0 at lambda = " + std::to_string(lambda));

  normalize_lp(u, p);
  H = h_lambda(u, p, lambda);
  I = weighted_pairing(f, u);

  auto reduced = [&](double Hv, double Iv) {
    return (1.0 / p - 1.0) * std::pow(std::abs(Iv), p * q) / std::pow(std::abs(Hv), q) * -1.0;
  };

  double J = reduced(H, I);
  double step = 1.0;
  int it = 0;
  GridFunction trial(mesh);
  const double coarse_target = std::min(1e-4, 1e5 * opts.solve_tol) * detail::scale_of(u, f);
  const int stage_cap = std::min(opts.max_iter, 400);
  for (; it < stage_cap; ++it) {
    detail::second_eigenvalue_watchdog(u, p, lambda, opts);
    const double t_scale = std::pow(I / H, q);
    GridFunction v = t_scale * u;
    if (grad_e_lambda(v, p, lambda, f).max_abs() <= coarse_target) break;

    const auto gd = grad_dirichlet_pow(u, p);
    const auto gm = grad_mass_pow(u, p);
    std::vector<double> gJ(gd.size());
    for (std::size_t i = 0; i < gJ.size(); ++i) {
      const double dH = gd[i] - lambda * gm[i];
      gJ[i] = J * (p * q * c[i] / I - q * dH / H);
    }
    const SpdTridiagonalFactor K(weighted_stiffness_matrix(u, p));
    std::vector<double> d = K.solve(gJ);
    double slope = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = -d[i];
      slope += d[i] * gJ[i];
    }
    if (!(slope < 0.0)) break;  // direction degenerate; hand to the polish stage

    auto phi = [&](double a) {
      for (std::size_t i = 0; i < d.size(); ++i) trial.values[i] = u.values[i] + a * d[i];
      double Ht = 0.0, It = 0.0;
      if (!admissible(trial, Ht, It)) return std::numeric_limits<double>::infinity();
      return reduced(Ht, It);
    };
    const detail::LineSearchResult ls = detail::line_search(phi, J, slope, std::min(2.0 * step, 1e3));
    if (!ls.ok) break;  // stalled in the reduced functional; polish from here
    for (std::size_t i = 0; i < d.size(); ++i) u.values[i] += ls.alpha * d[i];
    normalize_lp(u, p);
    H = h_lambda(u, p, lambda);
    I = weighted_pairing(f, u);
    J = reduced(H, I);
    step = ls.alpha;
  }

  GridFunction v = std::pow(I / H, q) * u;
  it += detail::finish_on_nehari(v, p, lambda, f, opts);
  return detail::finalize_solution(std::move(v), p, lambda, f, SolveMethod::NehariMin, it, opts);
}

/// Ground state on (lambda_*, lambda_2): minimizes E_lambda over the
/// sign-changing Nehari set. The iterate keeps both parts on their own
/// Nehari constraint (plus part at its fiber minimum, minus part at its
/// fiber maximum); each descent step is re-projected by fibering the parts.
inline Solution sign_changing_nehari_minimize(double p, double lambda, const WeightFunction& f,
                                              const SolveOptions& opts = {}, const GridFunction* warm = nullptr) {
  require_exponent(p);
  const Mesh1D& mesh = f.mesh;
  if (!f.strictly_positive())
    fail(errc::positivity_violation, "the sign-changing window needs f > 0 at every node");
  if (detail::hint_set(opts.lambda_star) && !(lambda > opts.lambda_star))
    fail(errc::out_of_window, "lambda = " + std::to_string(lambda) + " is not above lambda_star");
  if (detail::hint_set(opts.lambda2) && !(lambda < opts.lambda2))
    fail(errc::out_of_window, "lambda = " + std::to_string(lambda) + " is not below lambda2");

  // Fiber both parts of w onto their Nehari constraints; empty optional if w
  // is not an admissible sign-changing direction.
  auto project = [&](const GridFunction& w) -> std::optional<GridFunction> {
    auto [wp, wm] = split_parts(w);
    const double floor = 1e-13 * (w.max_abs() + 1e-300);
    if (!(wp.max_abs() > floor) || !(wm.max_abs() > floor)) return std::nullopt;
    const double Hp = h_lambda(wp, p, lambda), Ip = weighted_pairing(f, wp);
    const double Hm = h_lambda(wm, p, lambda), Im = weighted_pairing(f, wm);
    if (!(Hp > 0.0 && Ip > 0.0 && Hm < 0.0 && Im < 0.0)) return std::nullopt;
    const double qq = 1.0 / (p - 1.0);
    const double tp = std::pow(Ip / Hp, qq);
    const double tm = std::pow(Im / Hm, qq);
    GridFunction out(mesh);
    for (std::size_t i = 0; i < out.values.size(); ++i)
      out.values[i] = tp * wp.values[i] + tm * wm.values[i];
    return out;
  };

  std::optional<GridFunction> start;
  if (warm != nullptr && warm->mesh == mesh && warm->max_abs() > 0.0) start = project(*warm);
  if (!start)
    fail(errc::no_admissible_start,
         "no admissible sign-changing start at lambda = " + std::to_string(lambda) +
             " (provide a warm start from the lambda_star minimizer)");

  GridFunction v = *start;
  double energy = e_lambda(v, p, lambda, f).e_lambda;
  double step = 1.0;
  int it = 0;
  GridFunction trial(mesh);
  std::optional<GridFunction> projected;
  const double coarse_target = std::min(1e-4, 1e5 * opts.solve_tol) * detail::scale_of(v, f);
  const int stage_cap = std::min(opts.max_iter, 600);
  for (; it < stage_cap; ++it) {
    detail::second_eigenvalue_watchdog(v, p, lambda, opts);
    const GridFunction G = grad_e_lambda(v, p, lambda, f);
    if (G.max_abs() <= coarse_target) break;

    const SpdTridiagonalFactor K(weighted_stiffness_matrix(v, p));
    std::vector<double> d = K.solve(G.values);
    double slope = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = -d[i];
      slope += d[i] * G.values[i];
    }

    auto phi = [&](double a) {
      for (std::size_t i = 0; i < d.size(); ++i) trial.values[i] = v.values[i] + a * d[i];
      projected = project(trial);
      if (!projected) return std::numeric_limits<double>::infinity();
      return e_lambda(*projected, p, lambda, f).e_lambda;
    };
    const detail::LineSearchResult ls = detail::line_search(phi, energy, slope, std::min(2.0 * step, 1e3));
    if (!ls.ok) break;
    // Re-evaluate at the accepted alpha: the search may have probed past it.
    energy = phi(ls.alpha);
    v = std::move(*projected);
    step = ls.alpha;
  }

  it += detail::finish_on_nehari(v, p, lambda, f, opts);
  Solution s = detail::finalize_solution(std::move(v), p, lambda, f, SolveMethod::SignChangingNehariMin, it, opts);
  if (s.sign_class != SignClass::SignChanging)
    fail(errc::basin_escape, "sign-changing minimization converged to a single-signed function");
  return s;
}

}  // namespace amplab
