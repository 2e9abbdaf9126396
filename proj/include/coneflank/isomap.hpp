#pragma once

// Maps between oriented planes / oriented surfaces in design space and
// points / graphs in the isotropic model of Laguerre geometry.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coneflank/jet.hpp"

namespace coneflank {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Exclusion zone around the normal (0,0,-1), where the map blows up.
inline constexpr double kSouthPoleEps = 1e-9;

/// Plane n.p + h = 0 with unit normal n.
struct OrientedPlane {
  Vec3 n = Vec3::UnitZ();
  double h = 0.0;
};

struct IsotropicPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Oriented point of a design-space surface.
struct SurfaceSample {
  Vec3 r = Vec3::Zero();
  Vec3 n = Vec3::UnitZ();
};

/// Image of a SurfaceSample: a point (x, y, f) of the isotropic graph
/// together with the exact first partials there.
struct IsotropicSample {
  double x = 0.0;
  double y = 0.0;
  double f = 0.0;
  double fx = 0.0;
  double fy = 0.0;
};

enum class Orientation { Inward, Outward };

/// z = c2 (x^2 + y^2) + l1 x + l2 y + c0.
struct ParaboloidCoeffs {
  double c2 = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double c0 = 0.0;

  double operator()(double x, double y) const {
    return c2 * (x * x + y * y) + l1 * x + l2 * y + c0;
  }
};

IsotropicPoint plane_to_isotropic(const OrientedPlane& p,
                                  double eps = kSouthPoleEps);
OrientedPlane isotropic_to_plane(const IsotropicPoint& q);

/// Inverse stereographic projection from (0,0,-1).
Vec3 inverse_stereographic(double x, double y);

/// Image of the oriented sphere (center, radius); radius 0 is a point.
ParaboloidCoeffs sphere_to_paraboloid(const Vec3& center, double radius,
                                      Orientation orientation);

IsotropicSample sample_to_isotropic(const SurfaceSample& s,
                                    double eps = kSouthPoleEps);

/// Tangency point of the design surface with the plane whose image is
/// (x, y, f(x, y)). Only f, fx and fy of the jet are used.
Vec3 isotropic_to_contact_point(double x, double y, const Jet4& j);

struct Alignment {
  Mat3 rotation = Mat3::Identity();
  std::vector<SurfaceSample> samples;
};

/// Rotates the samples so that their normalized mean normal becomes
/// (0,0,1), using the smallest rotation that does so.
Alignment align_to_mean_normal(std::span<const SurfaceSample> samples);

}  // namespace coneflank
