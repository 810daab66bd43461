#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "amplab/error.hpp"
#include "amplab/mesh.hpp"

namespace amplab {

/// Symmetric tridiagonal matrix in (lower, diag, upper) bands; lower[i] and
/// upper[i] sit on row i+1 / row i respectively.
struct Tridiagonal {
  std::vector<double> lower, diag, upper;

  explicit Tridiagonal(int n = 0)
      : lower(n > 0 ? static_cast<std::size_t>(n - 1) : 0, 0.0),
        diag(static_cast<std::size_t>(n), 0.0),
        upper(n > 0 ? static_cast<std::size_t>(n - 1) : 0, 0.0) {}

  int size() const { return static_cast<int>(diag.size()); }

  std::vector<double> apply(const std::vector<double>& x) const {
    const std::size_t n = diag.size();
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double v = diag[i] * x[i];
      if (i > 0) v += lower[i - 1] * x[i - 1];
      if (i + 1 < n) v += upper[i] * x[i + 1];
      y[i] = v;
    }
    return y;
  }
};

inline Tridiagonal add_scaled(const Tridiagonal& A, double alpha, const Tridiagonal& B) {
  Tridiagonal C = A;
  for (std::size_t i = 0; i < C.diag.size(); ++i) C.diag[i] += alpha * B.diag[i];
  for (std::size_t i = 0; i < C.lower.size(); ++i) {
    C.lower[i] += alpha * B.lower[i];
    C.upper[i] += alpha * B.upper[i];
  }
  return C;
}

/// P1 stiffness matrix (1/h)*tridiag(-1, 2, -1) on the interior nodes.
inline Tridiagonal stiffness_matrix(const Mesh1D& m) {
  Tridiagonal A(m.n);
  const double ih = 1.0 / m.h;
  for (int i = 0; i < m.n; ++i) A.diag[static_cast<std::size_t>(i)] = 2.0 * ih;
  for (int i = 0; i + 1 < m.n; ++i) {
    A.lower[static_cast<std::size_t>(i)] = -ih;
    A.upper[static_cast<std::size_t>(i)] = -ih;
  }
  return A;
}

/// P1 consistent mass matrix (h/6)*tridiag(1, 4, 1).
inline Tridiagonal mass_matrix(const Mesh1D& m) {
  Tridiagonal M(m.n);
  for (int i = 0; i < m.n; ++i) M.diag[static_cast<std::size_t>(i)] = 4.0 * m.h / 6.0;
  for (int i = 0; i + 1 < m.n; ++i) {
    M.lower[static_cast<std::size_t>(i)] = m.h / 6.0;
    M.upper[static_cast<std::size_t>(i)] = m.h / 6.0;
  }
  return M;
}

/// Gaussian elimination with partial pivoting for a general tridiagonal
/// system (dgtsv-style, with fill-in on a second superdiagonal). Safe for
/// the indefinite matrices A - lambda*M between eigenvalues.
inline std::vector<double> solve_tridiagonal(Tridiagonal T, std::vector<double> rhs) {
  const int n = T.size();
  if (static_cast<int>(rhs.size()) != n) fail(errc::mesh_mismatch, "tridiagonal solve: size mismatch");
  std::vector<double> fill(n > 1 ? static_cast<std::size_t>(n - 2) : 0, 0.0);
  double scale = 0.0;
  for (double v : T.diag) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < n - 1; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    if (std::abs(T.diag[k]) >= std::abs(T.lower[k])) {
      if (T.diag[k] == 0.0) fail(errc::near_resonance, "singular tridiagonal matrix");
      const double m = T.lower[k] / T.diag[k];
      T.diag[k + 1] -= m * T.upper[k];
      rhs[k + 1] -= m * rhs[k];
      if (i < n - 2) fill[k] = 0.0;
    } else {
      const double m = T.diag[k] / T.lower[k];
      T.diag[k] = T.lower[k];
      const double tmp = T.diag[k + 1];
      T.diag[k + 1] = T.upper[k] - m * tmp;
      if (i < n - 2) {
        fill[k] = T.upper[k + 1];
        T.upper[k + 1] = -m * fill[k];
      }
      T.upper[k] = tmp;
      std::swap(rhs[k], rhs[k + 1]);
      rhs[k + 1] -= m * rhs[k];
    }
  }
  const double floor = 1e-300 + 1e-16 * scale;
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  for (int i = n - 1; i >= 0; --i) {
    const std::size_t k = static_cast<std::size_t>(i);
    if (std::abs(T.diag[k]) < floor) fail(errc::near_resonance, "tridiagonal pivot below " + std::to_string(floor));
    double v = rhs[k];
    if (i + 1 < n) v -= T.upper[k] * x[k + 1];
    if (i + 2 < n) v -= fill[k] * x[k + 2];
    x[k] = v / T.diag[k];
  }
  return x;
}

/// LDL^T factorization of a symmetric positive definite tridiagonal matrix,
/// prefactored once for repeated preconditioner solves.
class SpdTridiagonalFactor {
 public:
  explicit SpdTridiagonalFactor(const Tridiagonal& T) : d_(T.diag), l_(T.lower) {
    const std::size_t n = d_.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (!(d_[i] > 0.0)) fail(errc::nonfinite_value, "matrix is not positive definite");
      l_[i] /= d_[i];
      d_[i + 1] -= l_[i] * l_[i] * d_[i];
    }
  }

  void solve_inplace(std::vector<double>& x) const {
    const std::size_t n = d_.size();
    for (std::size_t i = 1; i < n; ++i) x[i] -= l_[i - 1] * x[i - 1];
    for (std::size_t i = 0; i < n; ++i) x[i] /= d_[i];
    for (std::size_t i = n - 1; i > 0; --i) x[i - 1] -= l_[i - 1] * x[i];
  }

  std::vector<double> solve(std::vector<double> x) const {
    solve_inplace(x);
    return x;
  }

 private:
  std::vector<double> d_, l_;
};

/// Stiffness matrix weighted per element by (p-1)|u'|^{p-2}, the exact
/// Dirichlet-term curvature of the p-energy at u. Weights are floored
/// relative to the largest slope so the matrix stays positive definite for
/// every p > 1; used as a descent preconditioner, never inverted as a
/// Newton system.
inline Tridiagonal weighted_stiffness_matrix(const GridFunction& u, double p) {
  const int n = u.mesh.n;
  const double h = u.mesh.h;
  double smax = 0.0;
  for (int e = 0; e <= n; ++e) smax = std::max(smax, std::abs(u.at_node(e + 1) - u.at_node(e)) / h);
  const double floor = 1e-3 * smax + 1e-300;
  Tridiagonal W(n);
  for (int e = 0; e <= n; ++e) {
    const double s = (u.at_node(e + 1) - u.at_node(e)) / h;
    const double w = (p - 1.0) * std::pow(std::max(std::abs(s), floor), p - 2.0) / h;
    if (e >= 1) W.diag[static_cast<std::size_t>(e - 1)] += w;
    if (e < n) W.diag[static_cast<std::size_t>(e)] += w;
    if (e >= 1 && e < n) {
      W.lower[static_cast<std::size_t>(e - 1)] = -w;
      W.upper[static_cast<std::size_t>(e - 1)] = -w;
    }
  }
  return W;
}

/// k-th eigenvalue of the discrete pair (stiffness, consistent mass) on a
/// uniform mesh: 6(1-cos t)/(h^2 (2+cos t)) with t = k*pi/(n+1). This is the
/// exact spectrum of the p = 2 discretization.
inline double discrete_p2_eigenvalue(const Mesh1D& m, int k) {
  const double t = static_cast<double>(k) * M_PI / static_cast<double>(m.n + 1);
  const double c = std::cos(t);
  return 6.0 * (1.0 - c) / (m.h * m.h * (2.0 + c));
}

/// Distance from lambda to the nearest discrete p = 2 eigenvalue.
inline double distance_to_p2_spectrum(const Mesh1D& m, double lambda) {
  double best = std::abs(lambda - discrete_p2_eigenvalue(m, 1));
  // Invert the dispersion relation for the nearest mode index.
  const double denom = 6.0 + lambda * m.h * m.h;
  double k_guess = 1.0;
  if (denom > 0.0) {
    const double c = (6.0 - 2.0 * lambda * m.h * m.h) / denom;
    if (c >= -1.0 && c <= 1.0)
      k_guess = std::acos(c) * static_cast<double>(m.n + 1) / M_PI;
    else if (c < -1.0)
      k_guess = m.n;
  } else {
    k_guess = m.n;
  }
  const int k0 = static_cast<int>(k_guess);
  for (int k = std::max(1, k0 - 1); k <= std::min(m.n, k0 + 2); ++k)
    best = std::min(best, std::abs(lambda - discrete_p2_eigenvalue(m, k)));
  return best;
}

}  // namespace amplab
