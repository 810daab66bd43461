#pragma once

#include <cmath>
#include <numeric>
#include <vector>

namespace amplab {
namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

struct LineSearchResult {
  bool ok = false;
  double alpha = 0.0;
  double value = 0.0;
};

/// Armijo backtracking followed by a coarse 1D minimization: keep doubling
/// or halving while the objective still improves. Settling for the first
/// Armijo-acceptable alpha is not enough here; with a preconditioned
/// eigen-descent direction it leaves the high modes undamped (they only
/// flip sign) and the iteration crawls sublinearly.
///
/// `noise` is the evaluation-noise floor of phi. Decreases that cannot be
/// certified above it are refused outright; otherwise rounding "accepts"
/// microscopic steps that go nowhere and can corrupt the iterate.
template <class Phi>
LineSearchResult line_search(Phi&& phi, double phi0, double slope, double alpha0, double noise = 0.0) {
  LineSearchResult r;
  if (1e-4 * alpha0 * (-slope) <= noise) return r;
  double alpha = alpha0;
  for (int bt = 0; bt < 60; ++bt) {
    const double v = phi(alpha);
    if (std::isfinite(v) && v <= phi0 + 1e-4 * alpha * slope - noise) {
      r.ok = true;
      r.alpha = alpha;
      r.value = v;
      break;
    }
    if (1e-4 * (alpha * 0.5) * (-slope) <= noise) return r;
    alpha *= 0.5;
  }
  if (!r.ok) return r;
  // Meaningful-improvement margin: without it the refinement chases rounding
  // noise in the objective and collapses the step to nothing.
  auto better = [&](double v) {
    return std::isfinite(v) && v < r.value - std::max(noise, 1e-12 * (std::abs(r.value) + 1e-300));
  };
  bool grew = false;
  for (int k = 0; k < 14; ++k) {
    const double v = phi(r.alpha * 2.0);
    if (better(v)) {
      r.alpha *= 2.0;
      r.value = v;
      grew = true;
    } else {
      break;
    }
  }
  if (!grew) {
    for (int k = 0; k < 20; ++k) {
      const double v = phi(r.alpha * 0.5);
      if (better(v)) {
        r.alpha *= 0.5;
        r.value = v;
      } else {
        break;
      }
    }
  }
  return r;
}

}  // namespace detail
}  // namespace amplab
