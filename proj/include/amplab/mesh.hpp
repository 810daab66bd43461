#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "amplab/error.hpp"

namespace amplab {

/// Uniform partition of (a,b) with n interior nodes, x_i = a + i*h for
/// i = 0..n+1. Boundary nodes carry the value 0 by convention, so a grid
/// function stores interior values only.
struct Mesh1D {
  double a = 0.0;
  double b = 1.0;
  int n = 2;
  double h = 1.0 / 3.0;

  static Mesh1D make(double a, double b, int n) {
    if (!(b > a)) fail(errc::invalid_interval, "need b > a, got [" + std::to_string(a) + ", " + std::to_string(b) + "]");
    if (n < 2) fail(errc::too_coarse, "need n >= 2 interior nodes, got " + std::to_string(n));
    Mesh1D m;
    m.a = a;
    m.b = b;
    m.n = n;
    m.h = (b - a) / static_cast<double>(n + 1);
    return m;
  }

  double node(int i) const { return a + static_cast<double>(i) * h; }
  int element_count() const { return n + 1; }
  double length() const { return b - a; }

  bool operator==(const Mesh1D&) const = default;
};

/// Nodal values of a piecewise-linear function vanishing at both endpoints.
/// values[i] is the value at node i+1; boundary values are structurally zero.
struct GridFunction {
  Mesh1D mesh;
  std::vector<double> values;

  GridFunction() = default;
  explicit GridFunction(const Mesh1D& m) : mesh(m), values(static_cast<std::size_t>(m.n), 0.0) {}
  GridFunction(const Mesh1D& m, std::vector<double> v) : mesh(m), values(std::move(v)) {
    if (static_cast<int>(values.size()) != mesh.n)
      fail(errc::mesh_mismatch, "value count " + std::to_string(values.size()) + " != n = " + std::to_string(mesh.n));
  }

  template <class F>
  static GridFunction sample(const Mesh1D& m, F&& f) {
    GridFunction u(m);
    for (int i = 1; i <= m.n; ++i) u.values[i - 1] = f(m.node(i));
    return u;
  }

  /// Value at node i, i = 0..n+1, with the zero boundary included.
  double at_node(int i) const {
    if (i <= 0 || i > mesh.n) return 0.0;
    return values[static_cast<std::size_t>(i - 1)];
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    for (double v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  GridFunction& operator+=(const GridFunction& o) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
  }
  GridFunction& operator*=(double c) {
    for (double& v : values) v *= c;
    return *this;
  }
};

inline GridFunction operator*(double c, GridFunction u) {
  u *= c;
  return u;
}

inline GridFunction operator+(GridFunction u, const GridFunction& v) {
  u += v;
  return u;
}

inline void require_same_mesh(const Mesh1D& lhs, const Mesh1D& rhs) {
  if (!(lhs == rhs)) fail(errc::mesh_mismatch, "operands live on different meshes");
}

/// Nodal samples of the weight f, interpolated piecewise-linearly like any
/// grid function. The nonneg flag records the standing sign assumption.
struct WeightFunction : GridFunction {
  bool nonneg = true;

  WeightFunction() = default;
  WeightFunction(GridFunction g, bool nonneg_flag) : GridFunction(std::move(g)), nonneg(nonneg_flag) {
    if (nonneg) validate_nonneg();
  }

  template <class F>
  static WeightFunction sample(const Mesh1D& m, F&& f, bool nonneg_flag = true) {
    return WeightFunction(GridFunction::sample(m, std::forward<F>(f)), nonneg_flag);
  }

  void validate_nonneg() const {
    bool any_positive = false;
    for (double v : values) {
      if (v < 0.0) fail(errc::weight_not_nonneg, "nonneg weight has a negative nodal value " + std::to_string(v));
      if (v > 0.0) any_positive = true;
    }
    if (!any_positive) fail(errc::weight_not_nonneg, "nonneg weight is identically zero");
  }

  bool strictly_positive() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return v > 0.0; });
  }
};

}  // namespace amplab
