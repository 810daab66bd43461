#pragma once

#include <cstdint>
#include <limits>

namespace amplab {

inline constexpr double kUnsetHint = std::numeric_limits<double>::quiet_NaN();

/// Rayleigh-quotient minimization controls.
struct EigenOptions {
  double tol = 1e-10;    // gradient residual target, scaled by (1 + value)
  int max_iter = 200000;
};

/// Constrained minimization controls for the critical value.
struct LambdaStarOptions {
  double grad_tol = 1e-9;        // projected-gradient stop, scaled by (1 + value)
  double constraint_tol = 1e-11; // |integral of f*u| at the reported minimizer
  int max_iter = 200000;
  std::uint64_t seed = 0;        // random multi-start
  double lambda2_margin_rel = 1e-3;  // "equal to lambda2 within resolution" band
};

/// Boundary-value solver controls. The lambda hints let callers share
/// already-computed spectral data; NaN means "compute if needed".
struct SolveOptions {
  double solve_tol = 1e-9;  // max-norm of the discrete weak residual
  int max_iter = 200000;
  double margin_rel = 1e-3;  // window margins around lambda_1, lambda_*, lambda_2
  double delta_rel = 1e-8;   // sign classification threshold
  double lambda1 = kUnsetHint;
  double lambda2 = kUnsetHint;
  double lambda_star = kUnsetHint;
};

/// Threshold estimation / branch sweep controls.
struct AmpOptions {
  double bisect_tol_rel = 1e-4;  // bisection width as a fraction of (lambda2 - lambda1)
  double margin_rel = 1e-3;
  bool weak_signs = false;  // non-strict nodal inequalities (weak AMP flag)
  EigenOptions eigen{};
  LambdaStarOptions lambda_star{};
  SolveOptions solve{};
};

}  // namespace amplab
