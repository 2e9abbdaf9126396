#pragma once

// Plane-space contact conditions between the isotropic graph of f and the
// isotropic circles that represent congruent rotational cones.
//
// A candidate conic through (x, y, z) is
//   x(t) = x + v sin t + u (1 - cos t)
//   y(t) = y - u sin t + v (1 - cos t)
//   z(t) = z + a sin t + b (1 - cos t)
// whose top view is the circle of center (x + u, y + v).

#include <functional>
#include <vector>

#include "coneflank/jet.hpp"
#include "coneflank/poly.hpp"

namespace coneflank {

struct ConicCandidate {
  double x = 0.0, y = 0.0, z = 0.0;
  double u = 0.0, v = 0.0;
  double a = 0.0, b = 0.0;
  double theta = 0.0;

  double px(double t) const;
  double py(double t) const;
  double pz(double t) const;
};

struct Osculation {
  double z = 0.0, a = 0.0, b = 0.0;
};

Osculation osculation_coeffs(double x, double y, const Jet4& j, double u, double v);

/// Conic through (x, y) with direction (u, v) and [OSC] coefficients.
ConicCandidate make_conic(const Jet4& j, double u, double v, double theta);

/// (x^2+y^2+1+2xu+2yv)^2 - 4 tan^2(theta) (u^2+v^2); zero iff the conic
/// is the image of a cone of opening angle theta.
double theta_residual(double x, double y, double u, double v, double theta);
/// Cubic whose vanishing lifts second-order contact to third order.
double hyper_residual(const Jet4& j, double u, double v);
/// Quartic whose vanishing (given hyper_residual = 0) lifts contact to order 4.
double order4_residual(const Jet4& j, double u, double v);
/// Jacobian determinant of (theta_residual, hyper_residual) in (u, v), up to
/// the constant factor 12.
double multiplicity_jacobian(double x, double y, const Jet4& j, double u, double v,
                             double theta);

/// Sums of the absolute values of the terms of each residual. Dividing a
/// residual by its scale gives a relative measure of cancellation.
double theta_scale(double x, double y, double u, double v, double theta);
double hyper_scale(const Jet4& j, double u, double v);
double jacobian_scale(double x, double y, const Jet4& j, double u, double v,
                      double theta);

/// The degree-6 polynomial in t whose real roots parametrize the directions
/// (u : v) = (2t : t^2 - 1) solving both theta_residual and hyper_residual.
Polynomial hyper_polynomial(const Jet4& j, double theta);

struct SolveOptions {
  double root_tol = 1e-8;        // relative |C1|, |C2| after polish
  double order4_tol = 1e-6;      // |C3| accepted as hyperosculating
  double multiple_tol = 1e-8;    // relative |J|
  double zero_tol = 1e-12;       // relative size of an identically-zero polynomial
  double degenerate_tol = 1e-10; // relative size of a vanishing leading coefficient
  int family_samples = 72;
};

struct ContactRoot {
  double u = 0.0, v = 0.0;
  double t = 0.0;     // polynomial parameter; infinite for the (0 : 1) direction
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  double jacobian = 0.0;
  bool multiple = false;
  bool at_infinity = false;
  bool order4 = false;  // |c3| <= order4_tol

  double direction() const;  // atan2(v, u)
};

struct SolveReport {
  std::vector<ContactRoot> roots;  // sorted by |c3| ascending
  bool degenerate_leading = false;
  bool identically_zero = false;
  /// Sampled theta_residual solutions when every direction satisfies C2.
  std::vector<ContactRoot> family;
  std::vector<double> coefficients;  // t^0 ... t^6
};

SolveReport solve_hyperosculating(const Jet4& j, double theta,
                                  const SolveOptions& opt = {});

/// Brute-force reference solver: scans the direction angle, solves C1 for
/// the scale on one sign branch, and bisects sign changes of C2.
SolveReport oracle_solve(const Jet4& j, double theta, int n_angles = 3600,
                         const SolveOptions& opt = {});

/// Fills c1, c2, c3, jacobian and the flags of a root from its (u, v).
void evaluate_root(const Jet4& j, double theta, const SolveOptions& opt, ContactRoot& r);

struct ContactOrder {
  double slope = 0.0;
  bool contained = false;
};

/// Slope of log|z(t) - f(x(t), y(t))| against log t over t in [0.01, 0.1].
ContactOrder contact_order_estimate(const ConicCandidate& c,
                                    const std::function<double(double, double)>& f);

}  // namespace coneflank
