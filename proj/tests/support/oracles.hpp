#pragma once

// Test-only reference computations, written independently of the library.

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Eigen::Vector3d random_unit(std::mt19937_64& rng, double min_n3) {
  for (;;) {
    Eigen::Vector3d v(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const double l = v.norm();
    if (l < 1e-3 || l > 1.0) continue;
    v /= l;
    if (v.z() > min_n3) return v;
  }
}

/// Central finite-difference partial d^(i+j) g / dx^i dy^j with step h,
/// from nested first differences.
inline double fd_partial(const std::function<double(double, double)>& g, double x, double y,
                         int i, int j, double h) {
  if (i > 0) {
    auto gi = [&](double a, double b) {
      return fd_partial(g, a, b, i - 1, j, h);
    };
    return (gi(x + h, y) - gi(x - h, y)) / (2.0 * h);
  }
  if (j > 0) {
    auto gj = [&](double a, double b) {
      return fd_partial(g, a, b, 0, j - 1, h);
    };
    return (gj(x, y + h) - gj(x, y - h)) / (2.0 * h);
  }
  return g(x, y);
}

/// Plane through a point with the isotropic coordinates (x, y, z): normal by
/// inverse stereographic projection, offset scaled by n3 + 1.
inline void plane_of(double x, double y, double z, Eigen::Vector3d& n, double& h) {
  const double s = x * x + y * y + 1.0;
  n = Eigen::Vector3d(2 * x / s, 2 * y / s, (1 - x * x - y * y) / s);
  h = z * (n.z() + 1.0);
}

/// Fibonacci-lattice points on the unit sphere with z <= z_max, as
/// (position, inward normal) pairs.
inline std::vector<std::array<Eigen::Vector3d, 2>> sphere_cap_inward(int count, double z_max) {
  std::vector<std::array<Eigen::Vector3d, 2>> out;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  // Lattice over z in [-1, z_max], uniform in area.
  for (int i = 0; i < count; ++i) {
    const double z = -1.0 + (z_max + 1.0) * (i + 0.5) / count;
    const double rho = std::sqrt(1.0 - z * z);
    const Eigen::Vector3d p(rho * std::cos(golden * i), rho * std::sin(golden * i), z);
    out.push_back({p, -p});
  }
  return out;
}

/// Centers of the two circles of radius sqrt(3)/2 through the origin and
/// through p (0 < |p| < sqrt(3)).
inline std::array<std::array<double, 2>, 2> generator_centers(double px, double py) {
  const double d = std::hypot(px, py);
  const double h = std::sqrt(0.75 - 0.25 * d * d);
  const double ex = -py / d, ey = px / d;
  return {{{0.5 * px + h * ex, 0.5 * py + h * ey}, {0.5 * px - h * ex, 0.5 * py - h * ey}}};
}

}  // namespace oracle
