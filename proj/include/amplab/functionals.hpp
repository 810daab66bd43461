#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "amplab/error.hpp"
#include "amplab/mesh.hpp"
#include "amplab/quadrature.hpp"

namespace amplab {

inline void require_exponent(double p) {
  if (!(p > 1.0)) fail(errc::bad_exponent, "need p > 1, got p = " + std::to_string(p));
}

/// sign(s)*|s|^q, continuous through 0 for q > 0.
inline double odd_pow(double s, double q) {
  if (s == 0.0) return 0.0;
  double m = std::pow(std::abs(s), q);
  return s > 0.0 ? m : -m;
}

enum class SignClass { Positive, Negative, SignChanging, Indeterminate };

inline const char* sign_class_name(SignClass s) {
  switch (s) {
    case SignClass::Positive: return "positive";
    case SignClass::Negative: return "negative";
    case SignClass::SignChanging: return "sign-changing";
    case SignClass::Indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

/// Values of the building-block integrals at one (u, p, lambda, f) tuple.
/// h_lambda = dirichlet_power - lambda*mass_power and
/// e_lambda = h_lambda/p - pairing hold by construction.
struct FunctionalValue {
  double dirichlet_power = 0.0;  // integral of |u'|^p
  double mass_power = 0.0;       // integral of |u|^p
  double pairing = 0.0;          // integral of f*u
  double h_lambda = 0.0;
  double e_lambda = 0.0;
};

/// Per-element Gauss quadrature of |u|^p with u piecewise linear.
inline double integral_abs_pow(const GridFunction& u, double p) {
  require_exponent(p);
  const int n = u.mesh.n;
  double acc = 0.0;
  for (int e = 0; e <= n; ++e) {
    const double va = u.at_node(e);
    const double vb = u.at_node(e + 1);
    double s = 0.0;
    for (int q = 0; q < 4; ++q) {
      const double v = va + (vb - va) * Gauss4::t[q];
      s += Gauss4::w[q] * std::pow(std::abs(v), p);
    }
    acc += s;
  }
  return acc * u.mesh.h;
}

/// Exact per-element value of the gradient power: u' is constant per element.
inline double integral_grad_pow(const GridFunction& u, double p) {
  require_exponent(p);
  const int n = u.mesh.n;
  const double h = u.mesh.h;
  double acc = 0.0;
  for (int e = 0; e <= n; ++e) {
    const double slope = (u.at_node(e + 1) - u.at_node(e)) / h;
    acc += std::pow(std::abs(slope), p);
  }
  return acc * h;
}

/// Quadrature of f*u with both piecewise linear; exact for this integrand
/// and hence bilinear to rounding.
inline double weighted_pairing(const WeightFunction& f, const GridFunction& u) {
  require_same_mesh(f.mesh, u.mesh);
  const int n = u.mesh.n;
  double acc = 0.0;
  for (int e = 0; e <= n; ++e) {
    const double fa = f.at_node(e), fb = f.at_node(e + 1);
    const double ua = u.at_node(e), ub = u.at_node(e + 1);
    double s = 0.0;
    for (int q = 0; q < 4; ++q) {
      const double t = Gauss4::t[q];
      s += Gauss4::w[q] * (fa + (fb - fa) * t) * (ua + (ub - ua) * t);
    }
    acc += s;
  }
  return acc * u.mesh.h;
}

/// Gradient of u -> weighted_pairing(f, u); component i is the integral of
/// f against the i-th hat function.
inline std::vector<double> pairing_vector(const WeightFunction& f) {
  const int n = f.mesh.n;
  std::vector<double> c(static_cast<std::size_t>(n), 0.0);
  for (int e = 0; e <= n; ++e) {
    const double fa = f.at_node(e), fb = f.at_node(e + 1);
    for (int q = 0; q < 4; ++q) {
      const double t = Gauss4::t[q];
      const double fv = Gauss4::w[q] * (fa + (fb - fa) * t);
      if (e >= 1) c[static_cast<std::size_t>(e - 1)] += fv * (1.0 - t);
      if (e < n) c[static_cast<std::size_t>(e)] += fv * t;
    }
  }
  for (double& v : c) v *= f.mesh.h;
  return c;
}

/// Gradient of u -> integral_grad_pow(u, p): p*(phi(s_left) - phi(s_right))
/// with phi(s) = sign(s)|s|^{p-1}.
inline std::vector<double> grad_dirichlet_pow(const GridFunction& u, double p) {
  require_exponent(p);
  const int n = u.mesh.n;
  const double h = u.mesh.h;
  std::vector<double> g(static_cast<std::size_t>(n), 0.0);
  double s_left = (u.at_node(1) - u.at_node(0)) / h;
  for (int i = 1; i <= n; ++i) {
    const double s_right = (u.at_node(i + 1) - u.at_node(i)) / h;
    g[static_cast<std::size_t>(i - 1)] = p * (odd_pow(s_left, p - 1.0) - odd_pow(s_right, p - 1.0));
    s_left = s_right;
  }
  return g;
}

/// Gradient of u -> integral_abs_pow(u, p) under the same element rule.
inline std::vector<double> grad_mass_pow(const GridFunction& u, double p) {
  require_exponent(p);
  const int n = u.mesh.n;
  std::vector<double> g(static_cast<std::size_t>(n), 0.0);
  for (int e = 0; e <= n; ++e) {
    const double va = u.at_node(e), vb = u.at_node(e + 1);
    for (int q = 0; q < 4; ++q) {
      const double t = Gauss4::t[q];
      const double v = va + (vb - va) * t;
      const double dv = Gauss4::w[q] * p * odd_pow(v, p - 1.0);
      if (e >= 1) g[static_cast<std::size_t>(e - 1)] += dv * (1.0 - t);
      if (e < n) g[static_cast<std::size_t>(e)] += dv * t;
    }
  }
  for (double& v : g) v *= u.mesh.h;
  return g;
}

inline double h_lambda(const GridFunction& u, double p, double lambda) {
  return integral_grad_pow(u, p) - lambda * integral_abs_pow(u, p);
}

inline FunctionalValue e_lambda(const GridFunction& u, double p, double lambda, const WeightFunction& f) {
  FunctionalValue out;
  out.dirichlet_power = integral_grad_pow(u, p);
  out.mass_power = integral_abs_pow(u, p);
  out.pairing = weighted_pairing(f, u);
  out.h_lambda = out.dirichlet_power - lambda * out.mass_power;
  out.e_lambda = out.h_lambda / p - out.pairing;
  return out;
}

/// Discrete weak residual of (D) tested against the hat functions; a grid
/// function with zero gradient is a discrete solution.
inline GridFunction grad_e_lambda(const GridFunction& u, double p, double lambda, const WeightFunction& f) {
  require_same_mesh(f.mesh, u.mesh);
  const auto gd = grad_dirichlet_pow(u, p);
  const auto gm = grad_mass_pow(u, p);
  const auto c = pairing_vector(f);
  GridFunction g(u.mesh);
  for (std::size_t i = 0; i < g.values.size(); ++i)
    g.values[i] = gd[i] / p - (lambda / p) * gm[i] - c[i];
  return g;
}

/// Nodewise positive/negative parts; u+ + u- = u exactly.
inline std::pair<GridFunction, GridFunction> split_parts(const GridFunction& u) {
  GridFunction up(u.mesh), um(u.mesh);
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    up.values[i] = std::max(u.values[i], 0.0);
    um.values[i] = std::min(u.values[i], 0.0);
  }
  return {std::move(up), std::move(um)};
}

/// Sign classification with relative threshold tau = delta_rel * max|u_i|.
inline SignClass sign_classify(const GridFunction& u, double delta_rel = 1e-8) {
  const double tau = delta_rel * u.max_abs();
  bool all_pos = true, all_neg = true, some_pos = false, some_neg = false;
  for (double v : u.values) {
    if (!(v > tau)) all_pos = false;
    if (!(v < -tau)) all_neg = false;
    if (v > tau) some_pos = true;
    if (v < -tau) some_neg = true;
  }
  if (!u.values.empty() && all_pos) return SignClass::Positive;
  if (!u.values.empty() && all_neg) return SignClass::Negative;
  if (some_pos && some_neg) return SignClass::SignChanging;
  return SignClass::Indeterminate;
}

/// L^p normalization to integral_abs_pow == 1.
inline void normalize_lp(GridFunction& u, double p) {
  const double m = integral_abs_pow(u, p);
  if (!(m > 0.0)) fail(errc::nonfinite_value, "cannot normalize the zero function");
  const double scale = std::pow(m, -1.0 / p);
  for (double& v : u.values) v *= scale;
}

}  // namespace amplab
