#include "coneflank/isomap.hpp"

#include <cmath>
#include <string>

#include "coneflank/error.hpp"

namespace coneflank {

namespace {

double check_pole(const Vec3& n, double eps) {
  const double s = n.z() + 1.0;
  if (!(s > eps)) {
    throw Error(ErrorCode::NormalAtSouthPole,
                "normal too close to (0,0,-1): n3 = " + std::to_string(n.z()));
  }
  return s;
}

}  // namespace

IsotropicPoint plane_to_isotropic(const OrientedPlane& p, double eps) {
  const double s = check_pole(p.n, eps);
  return {p.n.x() / s, p.n.y() / s, p.h / s};
}

OrientedPlane isotropic_to_plane(const IsotropicPoint& q) {
  OrientedPlane p;
  p.n = inverse_stereographic(q.x, q.y);
  p.h = q.z * (p.n.z() + 1.0);
  return p;
}

Vec3 inverse_stereographic(double x, double y) {
  const double s = x * x + y * y + 1.0;
  return Vec3(2.0 * x, 2.0 * y, 1.0 - x * x - y * y) / s;
}

ParaboloidCoeffs sphere_to_paraboloid(const Vec3& center, double radius,
                                      Orientation orientation) {
  const double r = orientation == Orientation::Inward ? radius : -radius;
  return {(r + center.z()) / 2.0, -center.x(), -center.y(),
          (r - center.z()) / 2.0};
}

IsotropicSample sample_to_isotropic(const SurfaceSample& s, double eps) {
  const double d = check_pole(s.n, eps);
  const Vec3& n = s.n;
  const Vec3& r = s.r;
  return {n.x() / d, n.y() / d, -n.dot(r) / d, n.x() * r.z() / d - r.x(),
          n.y() * r.z() / d - r.y()};
}

Vec3 isotropic_to_contact_point(double x, double y, const Jet4& j) {
  const double s = x * x + y * y + 1.0;
  const double f = j.f, fx = j.fx, fy = j.fy;
  return Vec3((x * x - y * y - 1.0) * fx + 2.0 * x * y * fy - 2.0 * x * f,
              (y * y - x * x - 1.0) * fy + 2.0 * x * y * fx - 2.0 * y * f,
              2.0 * x * fx + 2.0 * y * fy - 2.0 * f) /
         s;
}

Alignment align_to_mean_normal(std::span<const SurfaceSample> samples) {
  Vec3 mean = Vec3::Zero();
  for (const auto& s : samples) mean += s.n;
  if (!samples.empty()) mean /= static_cast<double>(samples.size());
  const double len = mean.norm();
  if (samples.empty() || len < 1e-9) {
    throw Error(ErrorCode::DegenerateMeanNormal,
                "mean normal has length " + std::to_string(len));
  }
  const Vec3 a = mean / len;
  const Vec3 e3 = Vec3::UnitZ();
  const Vec3 k = a.cross(e3);
  const double sin_a = k.norm();
  const double cos_a = a.dot(e3);

  Alignment out;
  if (sin_a < 1e-15) {
    if (cos_a < 0.0) {
      // Antipodal case: any half turn about a horizontal axis is minimal.
      out.rotation = Eigen::AngleAxisd(M_PI, Vec3::UnitX()).toRotationMatrix();
    }
  } else {
    out.rotation =
        Eigen::AngleAxisd(std::atan2(sin_a, cos_a), k / sin_a).toRotationMatrix();
  }
  out.samples.reserve(samples.size());
  for (const auto& s : samples) {
    out.samples.push_back({out.rotation * s.r, (out.rotation * s.n).normalized()});
  }
  return out;
}

}  // namespace coneflank
