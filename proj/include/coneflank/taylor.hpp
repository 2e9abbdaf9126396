#pragma once

// Truncated bivariate Taylor arithmetic: polynomials in (dx, dy) of total
// degree <= 4, 15 coefficients. Propagating these through an expression
// yields all partials up to order 4 without finite differences.

#include <array>
#include <cstddef>

#include "coneflank/jet.hpp"

namespace coneflank {

class Taylor4 {
 public:
  static constexpr int kDegree = 4;
  static constexpr std::size_t kSize = 15;

  Taylor4() { c_.fill(0.0); }
  explicit Taylor4(double constant) {
    c_.fill(0.0);
    c_[0] = constant;
  }

  /// dx (variable 0) or dy (variable 1) around the given base value.
  static Taylor4 variable(int which, double base);

  static constexpr std::size_t index(int i, int j) {
    const int d = i + j;
    return static_cast<std::size_t>(d * (d + 1) / 2 + j);
  }

  /// Coefficient of dx^i dy^j.
  double coeff(int i, int j) const { return c_[index(i, j)]; }
  double& coeff(int i, int j) { return c_[index(i, j)]; }
  double value() const { return c_[0]; }

  Taylor4& operator+=(const Taylor4& o);
  Taylor4& operator-=(const Taylor4& o);
  Taylor4& operator*=(double s);

  friend Taylor4 operator+(Taylor4 a, const Taylor4& b) { return a += b; }
  friend Taylor4 operator-(Taylor4 a, const Taylor4& b) { return a -= b; }
  friend Taylor4 operator-(const Taylor4& a) {
    Taylor4 r = a;
    r *= -1.0;
    return r;
  }
  friend Taylor4 operator*(const Taylor4& a, const Taylor4& b);
  friend Taylor4 operator*(double s, Taylor4 a) { return a *= s; }

  /// g(a) for a scalar function g given its derivatives g(v), g'(v), ...,
  /// g''''(v) at the constant term v of a.
  Taylor4 compose(const std::array<double, 5>& derivs) const;

  /// Partials at the expansion point, stored as a Jet4 based at (x, y).
  Jet4 to_jet(double x, double y) const;

 private:
  std::array<double, kSize> c_;
};

// Elementary functions; each throws Error(DomainError) outside its domain.
Taylor4 reciprocal(const Taylor4& a);
Taylor4 operator/(const Taylor4& a, const Taylor4& b);
Taylor4 ipow(const Taylor4& a, int n);
Taylor4 sin(const Taylor4& a);
Taylor4 cos(const Taylor4& a);
Taylor4 tan(const Taylor4& a);
Taylor4 atan(const Taylor4& a);
Taylor4 sqrt(const Taylor4& a);
Taylor4 exp(const Taylor4& a);
Taylor4 log(const Taylor4& a);

}  // namespace coneflank
