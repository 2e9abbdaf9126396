#pragma once

#include <initializer_list>
#include <vector>

namespace coneflank {

/// Dense univariate polynomial; coeffs[i] multiplies t^i.
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(std::initializer_list<double> c) : c_(c) {}
  explicit Polynomial(std::vector<double> c) : c_(std::move(c)) {}

  const std::vector<double>& coeffs() const { return c_; }
  /// Index of the highest nonzero coefficient, -1 for the zero polynomial.
  int degree() const;
  double operator()(double t) const;
  /// Sum of |c_i| |t|^i: the rounding-error scale of an evaluation at t.
  double magnitude(double t) const;
  double max_abs_coeff() const;

  Polynomial derivative() const;
  /// Drops leading coefficients whose magnitude is at most tol * max|c|.
  Polynomial trimmed(double rel_tol) const;

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(double s, const Polynomial& a);

 private:
  std::vector<double> c_;
};

struct RealRoot {
  double t = 0.0;
  bool multiple = false;  // recovered from a critical point with |p| ~ 0
};

/// All real roots, ascending. Distinct roots are isolated with a Sturm
/// sequence on the Cauchy interval, then refined by bisection and Newton.
/// Critical points where |p| <= near_zero * magnitude are added as
/// multiple roots, which catches double roots that rounding splits into a
/// complex pair.
std::vector<RealRoot> real_roots(const Polynomial& p, double near_zero = 1e-10);

/// Number of distinct real roots in (a, b] from the Sturm sequence of p.
int sturm_count(const Polynomial& p, double a, double b);

}  // namespace coneflank
