#pragma once

#include <array>
#include <cstddef>

namespace coneflank {

/// Value and all partial derivatives up to total order 4 of a bivariate
/// function f at the base point (x, y).
struct Jet4 {
  double x = 0.0;
  double y = 0.0;

  double f = 0.0;
  double fx = 0.0, fy = 0.0;
  double fxx = 0.0, fxy = 0.0, fyy = 0.0;
  double fxxx = 0.0, fxxy = 0.0, fxyy = 0.0, fyyy = 0.0;
  double fxxxx = 0.0, fxxxy = 0.0, fxxyy = 0.0, fxyyy = 0.0, fyyyy = 0.0;

  /// Partial derivative d^(i+j) f / dx^i dy^j, i + j <= 4.
  double partial(int i, int j) const;
  double& partial(int i, int j);

  /// Value of the degree-4 Taylor polynomial at (x + dx, y + dy).
  double taylor_value(double dx, double dy) const;
  /// Gradient of the Taylor polynomial at (x + dx, y + dy).
  std::array<double, 2> taylor_gradient(double dx, double dy) const;
  /// Jet of the Taylor polynomial re-centered at (x + dx, y + dy); orders
  /// above 4 are dropped, so the result is exact only for polynomial f.
  Jet4 shifted(double dx, double dy) const;

  bool all_finite() const;

  /// Max absolute value of the second, third and fourth order partials.
  double curvature_scale() const;
};

Jet4 operator+(const Jet4& a, const Jet4& b);
Jet4 operator*(double s, const Jet4& a);

}  // namespace coneflank
