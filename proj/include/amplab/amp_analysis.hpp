#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "amplab/error.hpp"
#include "amplab/functionals.hpp"
#include "amplab/lambda_star.hpp"
#include "amplab/linalg.hpp"
#include "amplab/mesh.hpp"
#include "amplab/options.hpp"
#include "amplab/solver.hpp"
#include "amplab/spectrum.hpp"

namespace amplab {

/// One sample of the ground-state branch.
struct BranchPoint {
  double lambda = 0.0;
  double energy = 0.0;
  SignClass sign_class = SignClass::Indeterminate;
  double min_u = 0.0;
  double max_u = 0.0;
  double pairing = 0.0;
  SolveMethod method = SolveMethod::DirectMin;
  bool converged = false;
  std::string note;
};

struct AmpProbe {
  double lambda = 0.0;
  SignClass sign_class = SignClass::Indeterminate;
};

/// Certified estimate of the anti-maximum threshold.
struct AmpEstimate {
  double lambda_f = 0.0;
  double lambda_star = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<AmpProbe> certificate;
  double bisection_width = 0.0;
  std::string certifies;  // "all-solutions" at p = 2, "ground-state-only" otherwise
};

struct CheckEntry {
  std::string check_id;
  bool passed = false;
  bool applicable = true;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string note;
};

struct VerificationReport {
  double p = 2.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda_star = 0.0;
  double lambda_f = 0.0;
  std::string certifies;
  std::vector<CheckEntry> entries;
  bool all_passed = false;
};

enum class BranchMode { SequentialWarm, ParallelCold };

namespace detail {

/// Spectral context shared by all threshold work at fixed (p, f, mesh).
struct Landscape {
  EigenPair e1;
  double lambda2 = 0.0;
  LambdaStarResult star;
  std::optional<MinimizerCheck> star_ground_state;
  double margin_rel = 1e-3;
};

inline Landscape make_landscape(double p, const WeightFunction& f, const Mesh1D& mesh, const AmpOptions& opts) {
  Landscape L;
  L.margin_rel = opts.margin_rel;
  L.e1 = first_eigenpair(p, mesh, opts.eigen);
  if (mesh.n % 2 == 1)
    L.lambda2 = second_eigenpair(p, mesh, opts.eigen).value;
  else if (p == 2.0)
    L.lambda2 = discrete_p2_eigenvalue(mesh, 2);
  else
    fail(errc::midpoint_not_a_node, "need odd n (or p = 2) to place lambda2");
  L.star = lambda_star(p, f, opts.lambda_star);
  if (L.star.value < L.lambda2 * (1.0 - opts.margin_rel))
    L.star_ground_state = minimizer_is_solution_check(L.star, p, f, L.lambda2, opts.margin_rel);
  return L;
}

inline SolveOptions hinted_solve_options(const Landscape& L, const AmpOptions& opts) {
  SolveOptions so = opts.solve;
  so.lambda1 = L.e1.value;
  so.lambda2 = L.lambda2;
  so.lambda_star = L.star.value;
  so.margin_rel = opts.margin_rel;
  return so;
}

/// Window-dispatching ground-state solve. At p = 2 the linear path is exact
/// and unique by the Fredholm alternative; otherwise the window picks the
/// variational solver.
inline Solution ground_state_at(double p, double lambda, const WeightFunction& f, const Landscape& L,
                                const SolveOptions& so, const GridFunction* warm = nullptr) {
  if (p == 2.0) return linear_solve_p2(lambda, f, so);
  const double m = so.margin_rel;
  if (lambda < L.e1.value * (1.0 - m)) return solve_subcritical(p, lambda, f, so);
  if (lambda < L.star.value * (1.0 - m)) return nehari_minimize(p, lambda, f, so, warm);
  if (lambda > L.star.value * (1.0 + m) && lambda < L.lambda2 * (1.0 - m)) {
    const GridFunction* fallback = L.star_ground_state ? &L.star_ground_state->v : nullptr;
    if (warm != nullptr) {
      try {
        return sign_changing_nehari_minimize(p, lambda, f, so, warm);
      } catch (const Error& e) {
        if (e.code() != errc::no_admissible_start || fallback == nullptr) throw;
      }
    }
    return sign_changing_nehari_minimize(p, lambda, f, so, fallback);
  }
  fail(errc::out_of_window, "lambda = " + std::to_string(lambda) + " sits in a margin band around the thresholds");
}

inline bool negative_predicate(const Solution& s, bool weak, double delta_rel) {
  if (!weak) return s.sign_class == SignClass::Negative;
  const double tau = delta_rel * s.u.max_abs();
  return std::all_of(s.u.values.begin(), s.u.values.end(), [&](double v) { return v <= tau; });
}

inline AmpEstimate lambda_f_estimate_impl(double p, const WeightFunction& f, const Landscape& L,
                                          const AmpOptions& opts) {
  AmpEstimate est;
  est.lambda1 = L.e1.value;
  est.lambda2 = L.lambda2;
  est.lambda_star = L.star.value;
  est.certifies = (p == 2.0) ? "all-solutions" : "ground-state-only";

  const double span = L.lambda2 - L.e1.value;
  const double width = opts.bisect_tol_rel * span;
  // Strictly inside the dispatcher windows, or edge probes die on the margin.
  const double lo_edge = L.e1.value * (1.0 + opts.margin_rel) + std::max(width, 1e-12 * L.e1.value);
  const double hi_edge = L.lambda2 * (1.0 - opts.margin_rel) - std::max(width, 1e-12 * L.lambda2);
  const SolveOptions so = hinted_solve_options(L, opts);

  std::vector<AmpProbe> probes;
  GridFunction warm = -1.0 * L.e1.fn;
  auto probe = [&](double lambda) -> bool {
    // Inside the margin band around lambda_star the ground state is the
    // rescaled minimizer itself: sign-changing, never negative.
    if (p != 2.0 && std::abs(lambda - L.star.value) <= opts.margin_rel * L.star.value) {
      probes.push_back({lambda, SignClass::SignChanging});
      return false;
    }
    const Solution s = ground_state_at(p, lambda, f, L, so, &warm);
    probes.push_back({lambda, s.sign_class});
    const bool neg = negative_predicate(s, opts.weak_signs, so.delta_rel);
    if (neg) warm = s.u;
    return neg;
  };

  // The lower probe starts a comfortable distance above lambda1 (solutions
  // blow up like a negative power of lambda - lambda1, hardest exactly at
  // the edge) and walks down only if the window is genuinely that thin.
  // The variational upper probe stays away from the lambda2 resonance for
  // the same reason; the exact linear path at p = 2 has no such trouble.
  double lo = std::max(lo_edge, L.e1.value + 0.02 * span);
  double hi = hi_edge;
  if (p != 2.0) {
    hi = std::min(hi, L.lambda2 - 0.02 * span);
    if (L.star.value < L.lambda2 * (1.0 - opts.margin_rel))
      hi = std::min(hi, L.star.value + 0.3 * (L.lambda2 - L.star.value));
    hi = std::max(hi, lo + 4.0 * width);
  }
  while (!probe(lo)) {
    if (lo <= lo_edge * (1.0 + 1e-12))
      fail(errc::monotonicity_violation,
           "ground state just above lambda1 is not negative (lambda = " + std::to_string(lo) + ")");
    lo = std::max(lo_edge, L.e1.value + 0.3 * (lo - L.e1.value));
  }
  if (probe(hi)) {
    est.lambda_f = hi;
    est.bisection_width = width;
  } else {
    while (hi - lo > 2.0 * width) {
      const double mid = 0.5 * (lo + hi);
      (probe(mid) ? lo : hi) = mid;
    }
    est.lambda_f = 0.5 * (lo + hi);
    est.bisection_width = 0.5 * (hi - lo);
  }

  std::sort(probes.begin(), probes.end(), [](const AmpProbe& a, const AmpProbe& b) { return a.lambda < b.lambda; });
  bool seen_non_negative = false;
  for (const AmpProbe& pr : probes) {
    const bool neg = pr.sign_class == SignClass::Negative;
    if (!neg) seen_non_negative = true;
    if (neg && seen_non_negative) {
      std::string listing;
      for (const AmpProbe& q : probes)
        listing += "\n  lambda = " + std::to_string(q.lambda) + " -> " + sign_class_name(q.sign_class);
      fail(errc::monotonicity_violation, "sign predicate is not monotone across probes:" + listing);
    }
  }
  est.certificate = std::move(probes);
  return est;
}

inline BranchPoint branch_point_from(const Solution& s, const WeightFunction& f) {
  BranchPoint b;
  b.lambda = s.lambda;
  b.energy = s.energy;
  b.sign_class = s.sign_class;
  b.min_u = *std::min_element(s.u.values.begin(), s.u.values.end());
  b.max_u = *std::max_element(s.u.values.begin(), s.u.values.end());
  b.pairing = weighted_pairing(f, s.u);
  b.method = s.method;
  b.converged = true;
  return b;
}

inline std::vector<BranchPoint> branch_trace_impl(double p, const WeightFunction& f, const Landscape& L,
                                                  const std::vector<double>& grid, const AmpOptions& opts,
                                                  BranchMode mode, int jobs) {
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) fail(errc::bad_config, "lambda grid must be strictly increasing");
  const SolveOptions so = hinted_solve_options(L, opts);

  struct PointResult {
    BranchPoint point;
    std::optional<GridFunction> u;
  };
  auto solve_point = [&](double lambda, const GridFunction* warm) -> PointResult {
    PointResult r;
    r.point.lambda = lambda;
    try {
      Solution s = ground_state_at(p, lambda, f, L, so, warm);
      r.point = branch_point_from(s, f);
      r.u = std::move(s.u);
    } catch (const Error& e) {
      r.point.converged = false;
      r.point.note = e.what();
      r.point.sign_class = SignClass::Indeterminate;
      r.point.energy = std::numeric_limits<double>::quiet_NaN();
      r.point.min_u = r.point.max_u = r.point.pairing = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
  };

  std::vector<BranchPoint> out(grid.size());
  if (mode == BranchMode::ParallelCold && jobs > 1) {
    std::vector<std::future<PointResult>> futs(grid.size());
    std::size_t next = 0;
    while (next < grid.size()) {
      const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(jobs), grid.size() - next);
      for (std::size_t k = 0; k < batch; ++k)
        futs[next + k] = std::async(std::launch::async,
                                    [&, lam = grid[next + k]]() { return solve_point(lam, nullptr); });
      for (std::size_t k = 0; k < batch; ++k) out[next + k] = futs[next + k].get().point;
      next += batch;
    }
  } else {
    std::optional<GridFunction> warm;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      PointResult r = solve_point(grid[i], warm ? &*warm : nullptr);
      out[i] = std::move(r.point);
      if (r.u) warm = std::move(r.u);
    }
  }
  return out;
}

}  // namespace detail

/// Bisects lambda on the predicate "the ground state at lambda is strictly
/// negative". At p = 2 the solution is unique, so the certificate speaks for
/// all solutions; for p != 2 it certifies the computed ground-state branch.
inline AmpEstimate lambda_f_estimate(double p, const WeightFunction& f, const Mesh1D& mesh,
                                     const AmpOptions& opts = {}) {
  require_exponent(p);
  require_same_mesh(mesh, f.mesh);
  const detail::Landscape L = detail::make_landscape(p, f, mesh, opts);
  return detail::lambda_f_estimate_impl(p, f, L, opts);
}

/// Ground-state samples over a lambda grid, suitable for plotting energy
/// against lambda. Per-point failures are recorded, never fatal.
inline std::vector<BranchPoint> branch_trace(double p, const WeightFunction& f, const Mesh1D& mesh,
                                             const std::vector<double>& grid, const AmpOptions& opts = {},
                                             BranchMode mode = BranchMode::SequentialWarm, int jobs = 1) {
  require_exponent(p);
  require_same_mesh(mesh, f.mesh);
  const detail::Landscape L = detail::make_landscape(p, f, mesh, opts);
  return detail::branch_trace_impl(p, f, L, grid, opts, mode, jobs);
}

/// Reproduces the worked example: the zero of g(lambda) = integral of
/// f*u_lambda for f = 1 - sin(x) on (0, pi), p = 2.
inline double paper_example_lambda0(const Mesh1D& mesh, const AmpOptions& opts = {}) {
  if (std::abs(mesh.a) > 1e-12 || std::abs(mesh.b - M_PI) > 1e-12)
    fail(errc::invalid_interval, "the worked example lives on (0, pi)");
  const WeightFunction f = WeightFunction::sample(mesh, [](double x) { return 1.0 - std::sin(x); });
  const double lambda1 = first_eigenpair(2.0, mesh, opts.eigen).value;
  const double lambda2 = discrete_p2_eigenvalue(mesh, 2);
  const SolveOptions so = opts.solve;

  auto g = [&](double lambda) { return weighted_pairing(f, linear_solve_p2(lambda, f, so).u); };
  double lo = lambda1 + opts.margin_rel * (lambda2 - lambda1);
  double hi = lambda2 - opts.margin_rel * (lambda2 - lambda1);
  double glo = g(lo), ghi = g(hi);
  if (!(glo < 0.0 && ghi > 0.0))
    fail(errc::no_sign_change, "g does not change sign on the window: g(" + std::to_string(lo) + ") = " +
                                   std::to_string(glo) + ", g(" + std::to_string(hi) + ") = " + std::to_string(ghi));
  while (hi - lo > 1e-10 * (1.0 + hi)) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// The theorem battery: threshold ordering, energy-sign windows, the
/// zero-energy exclusion, and the lambda_star-point ground state, reported
/// with measured margins.
inline VerificationReport verify_theorems(double p, const WeightFunction& f, const Mesh1D& mesh,
                                          const AmpOptions& opts = {}) {
  require_exponent(p);
  require_same_mesh(mesh, f.mesh);
  const detail::Landscape L = detail::make_landscape(p, f, mesh, opts);
  const SolveOptions so = detail::hinted_solve_options(L, opts);

  VerificationReport rep;
  rep.p = p;
  rep.lambda1 = L.e1.value;
  rep.lambda2 = L.lambda2;
  rep.lambda_star = L.star.value;
  rep.certifies = (p == 2.0) ? "all-solutions" : "ground-state-only";

  auto push = [&](const std::string& id, bool passed, double measured, double expected, double tolerance,
                  bool applicable = true, const std::string& note = "") {
    rep.entries.push_back({id, passed, applicable, measured, expected, tolerance, note});
  };

  bool watchdog_fired = false;
  std::string watchdog_note;
  auto guarded = [&](auto&& fn) -> std::optional<Solution> {
    try {
      return fn();
    } catch (const Error& e) {
      if (e.code() == errc::watchdog_positive_solution || e.code() == errc::watchdog_zero_pairing ||
          e.code() == errc::watchdog_second_eigenvalue) {
        watchdog_fired = true;
        watchdog_note = e.what();
      }
      return std::nullopt;
    }
  };

  push("lambda_star_above_lambda1", L.star.value > L.e1.value, L.star.value - L.e1.value, 0.0, 0.0);
  push("lambda_star_at_most_lambda2", L.star.value <= L.lambda2 + 1e-8, L.star.value - L.lambda2, 0.0, 1e-8);

  AmpEstimate est;
  bool have_est = false;
  try {
    est = detail::lambda_f_estimate_impl(p, f, L, opts);
    have_est = true;
  } catch (const Error& e) {
    push("lambda_f_estimate", false, 0.0, 0.0, 0.0, true, e.what());
  }
  if (have_est) {
    rep.lambda_f = est.lambda_f;
    push("lambda_f_above_lambda1", est.lambda_f > L.e1.value, est.lambda_f - L.e1.value, 0.0, 0.0);
    push("lambda_f_at_most_lambda_star", est.lambda_f <= L.star.value + est.bisection_width,
         est.lambda_f - L.star.value, 0.0, est.bisection_width);
    const bool strict_applicable = L.star.value < L.lambda2 * (1.0 - opts.margin_rel);
    push("lambda_f_strictly_below_lambda_star",
         !strict_applicable || (L.star.value - est.lambda_f > est.bisection_width),
         L.star.value - est.lambda_f, est.bisection_width, 0.0, strict_applicable,
         strict_applicable ? "" : "lambda_star equals lambda2 within resolution");
  }

  // Energy-sign windows on a compact probe grid.
  const double m = opts.margin_rel;
  auto window_grid = [](double lo, double hi, int count) {
    std::vector<double> g;
    for (int i = 0; i < count; ++i)
      g.push_back(lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(count));
    return g;
  };

  {
    bool all_neg = true;
    double worst = -std::numeric_limits<double>::infinity();
    for (double lam : window_grid(0.2 * L.e1.value, 0.8 * L.e1.value, 5)) {
      auto s = guarded([&] { return (p == 2.0) ? linear_solve_p2(lam, f, so) : solve_subcritical(p, lam, f, so); });
      if (!s) {
        all_neg = false;
        continue;
      }
      all_neg = all_neg && s->energy < 0.0 && s->sign_class == SignClass::Positive;
      worst = std::max(worst, s->energy);
    }
    push("subcritical_energy_negative", all_neg, worst, 0.0, 0.0);
  }
  {
    bool all_pos = true;
    double worst = std::numeric_limits<double>::infinity();
    double min_abs = std::numeric_limits<double>::infinity();
    double zero_scale = 0.0;
    const double lo = L.e1.value * (1.0 + 4.0 * m);
    const double hi = L.star.value * (1.0 - 4.0 * m);
    if (hi > lo) {
      GridFunction warm = -1.0 * L.e1.fn;
      for (double lam : window_grid(lo, hi, 8)) {
        auto s = guarded([&] { return detail::ground_state_at(p, lam, f, L, so, &warm); });
        if (!s) {
          all_pos = false;
          continue;
        }
        warm = s->u;
        all_pos = all_pos && s->energy > 0.0;
        worst = std::min(worst, s->energy);
        min_abs = std::min(min_abs, std::abs(s->energy));
        zero_scale = std::max(zero_scale, (1.0 + s->u.max_abs()) * (1.0 + f.max_abs()));
      }
      push("mid_window_energy_positive", all_pos, worst, 0.0, 0.0);
      push("no_zero_energy_below_star", min_abs > 1e-8 * zero_scale, min_abs, 0.0, 1e-8 * zero_scale);
    } else {
      push("mid_window_energy_positive", true, 0.0, 0.0, 0.0, false, "window collapses at this resolution");
      push("no_zero_energy_below_star", true, 0.0, 0.0, 0.0, false, "window collapses at this resolution");
    }
  }
  {
    const bool upper_applicable =
        L.star.value < L.lambda2 * (1.0 - m) && (p == 2.0 || f.strictly_positive());
    if (upper_applicable) {
      bool all_ok = true;
      double worst = -std::numeric_limits<double>::infinity();
      const double lo = L.star.value * (1.0 + 4.0 * m);
      const double hi = L.lambda2 * (1.0 - 4.0 * m);
      const GridFunction* warm = L.star_ground_state ? &L.star_ground_state->v : nullptr;
      GridFunction carry;
      for (double lam : window_grid(lo, hi, 8)) {
        auto s = guarded([&] { return detail::ground_state_at(p, lam, f, L, so, warm); });
        if (!s) {
          all_ok = false;
          continue;
        }
        carry = s->u;
        warm = &carry;
        all_ok = all_ok && s->energy < 0.0 && s->sign_class == SignClass::SignChanging;
        worst = std::max(worst, s->energy);
      }
      push("upper_window_energy_negative_sign_changing", all_ok, worst, 0.0, 0.0);
    } else {
      push("upper_window_energy_negative_sign_changing", true, 0.0, 0.0, 0.0, false,
           "lambda_star equals lambda2 within resolution or f is not strictly positive");
    }
  }
  {
    if (L.star_ground_state) {
      const MinimizerCheck& gs = *L.star_ground_state;
      const double scale = (1.0 + gs.v.max_abs()) * (1.0 + f.max_abs());
      push("star_ground_state_residual", gs.pde_residual <= 1e-6 * scale, gs.pde_residual, 0.0, 1e-6 * scale);
      push("star_ground_state_energy", std::abs(gs.energy) <= 1e-6 * scale, gs.energy, 0.0, 1e-6 * scale);
      push("star_ground_state_sign_changing", gs.sign_class == SignClass::SignChanging,
           static_cast<double>(gs.sign_class == SignClass::SignChanging), 1.0, 0.0);
      push("star_ground_state_rayleigh", std::abs(gs.rayleigh - L.star.value) <= 1e-6 * (1.0 + L.star.value),
           gs.rayleigh - L.star.value, 0.0, 1e-6 * (1.0 + L.star.value));
    } else {
      push("star_ground_state_residual", true, 0.0, 0.0, 0.0, false, "not applicable: lambda_star = lambda2");
    }
  }
  push("watchdogs_silent", !watchdog_fired, watchdog_fired ? 1.0 : 0.0, 0.0, 0.0, true, watchdog_note);

  rep.all_passed = std::all_of(rep.entries.begin(), rep.entries.end(),
                               [](const CheckEntry& e) { return !e.applicable || e.passed; });
  return rep;
}

}  // namespace amplab
