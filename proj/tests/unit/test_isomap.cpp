#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "coneflank/error.hpp"
#include "coneflank/expr.hpp"
#include "coneflank/isomap.hpp"
#include "oracles.hpp"

using namespace coneflank;

TEST(PlaneToIsotropic, Examples) {
  auto q = plane_to_isotropic({Vec3(0, 0, 1), 0.0});
  EXPECT_EQ(q.x, 0.0);
  EXPECT_EQ(q.y, 0.0);
  EXPECT_EQ(q.z, 0.0);
  q = plane_to_isotropic({Vec3(1, 0, 0), -2.0});
  EXPECT_DOUBLE_EQ(q.x, 1.0);
  EXPECT_DOUBLE_EQ(q.y, 0.0);
  EXPECT_DOUBLE_EQ(q.z, -2.0);
}

TEST(PlaneToIsotropic, SouthPoleRejected) {
  try {
    plane_to_isotropic({Vec3(0, 0, -1), 3.0});
    FAIL() << "expected NormalAtSouthPole";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NormalAtSouthPole);
  }
  const double n3 = -1.0 + 1e-10;
  const Vec3 n(std::sqrt(1 - n3 * n3), 0, n3);
  EXPECT_THROW(plane_to_isotropic({n, 0.0}), Error);
  EXPECT_NO_THROW(plane_to_isotropic({n, 0.0}, 1e-12));
}

TEST(IsotropicToPlane, Examples) {
  auto p = isotropic_to_plane({0, 0, 0});
  EXPECT_NEAR((p.n - Vec3(0, 0, 1)).norm(), 0.0, 1e-15);
  EXPECT_EQ(p.h, 0.0);
  p = isotropic_to_plane({1, 0, -2});
  EXPECT_NEAR((p.n - Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR(p.h, -2.0, 1e-15);
}

TEST(IsotropicToPlane, RoundTripRandomPlanes) {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    OrientedPlane p{oracle::random_unit(rng, -0.99), oracle::uniform(rng, -5, 5)};
    const auto back = isotropic_to_plane(plane_to_isotropic(p));
    worst = std::max({worst, (back.n - p.n).norm(), std::abs(back.h - p.h)});
    const IsotropicPoint q{oracle::uniform(rng, -3, 3), oracle::uniform(rng, -3, 3),
                           oracle::uniform(rng, -3, 3)};
    const auto q2 = plane_to_isotropic(isotropic_to_plane(q));
    worst = std::max({worst, std::abs(q2.x - q.x), std::abs(q2.y - q.y),
                      std::abs(q2.z - q.z) / (1.0 + std::abs(q.z))});
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(InverseStereographic, UnitNorm) {
  EXPECT_NEAR((inverse_stereographic(0, 0) - Vec3(0, 0, 1)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((inverse_stereographic(1, 0) - Vec3(1, 0, 0)).norm(), 0.0, 1e-15);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 n = inverse_stereographic(oracle::uniform(rng, -10, 10),
                                         oracle::uniform(rng, -10, 10));
    EXPECT_NEAR(n.norm(), 1.0, 1e-14);
  }
}

TEST(SphereToParaboloid, Examples) {
  auto c = sphere_to_paraboloid(Vec3::Zero(), 1.0, Orientation::Inward);
  EXPECT_DOUBLE_EQ(c.c2, 0.5);
  EXPECT_DOUBLE_EQ(c.c0, 0.5);
  EXPECT_EQ(c.l1, 0.0);
  c = sphere_to_paraboloid(Vec3::Zero(), 0.0, Orientation::Inward);
  EXPECT_EQ(c(0.3, -0.7), 0.0);
  c = sphere_to_paraboloid(Vec3(0, 0, -2), 2.0, Orientation::Inward);
  EXPECT_EQ(c.c2, 0.0);
}

// Tangent planes of a sphere, mapped one by one, land on the paraboloid.
TEST(SphereToParaboloid, TangentPlanesLieOnGraph) {
  std::mt19937_64 rng(11);
  for (auto orient : {Orientation::Inward, Orientation::Outward}) {
    const Vec3 m(0.3, -1.2, 0.7);
    const double R = 1.7;
    const auto c = sphere_to_paraboloid(m, R, orient);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const Vec3 n = oracle::random_unit(rng, -0.95);
      // Inward: the normal points to the center, so the contact point is m - R n.
      const Vec3 r = orient == Orientation::Inward ? Vec3(m - R * n) : Vec3(m + R * n);
      const auto q = plane_to_isotropic({n, -n.dot(r)});
      worst = std::max(worst, std::abs(q.z - c(q.x, q.y)) / (1.0 + std::abs(q.z)));
    }
    EXPECT_LT(worst, 1e-10);
  }
}

TEST(SampleToIsotropic, Examples) {
  auto s = sample_to_isotropic({Vec3(1, 0, 0), Vec3(-1, 0, 0)});
  EXPECT_DOUBLE_EQ(s.x, -1.0);
  EXPECT_DOUBLE_EQ(s.y, 0.0);
  EXPECT_DOUBLE_EQ(s.f, 1.0);
  EXPECT_DOUBLE_EQ(s.fx, -1.0);
  EXPECT_DOUBLE_EQ(s.fy, 0.0);
  s = sample_to_isotropic({Vec3(0, 0, -1), Vec3(0, 0, 1)});
  EXPECT_DOUBLE_EQ(s.f, 0.5);
  EXPECT_EQ(s.fx, 0.0);
  EXPECT_EQ(s.fy, 0.0);
  EXPECT_THROW(sample_to_isotropic({Vec3(0, 0, 1), Vec3(0, 0, -1)}), Error);
}

TEST(SampleToIsotropic, InwardSphereMatchesParaboloid) {
  const auto c = sphere_to_paraboloid(Vec3::Zero(), 1.0, Orientation::Inward);
  double worst = 0.0, worst_grad = 0.0;
  for (int i = 0; i < 60; ++i) {
    for (int k = 0; k < 120; ++k) {
      const double lat = -M_PI / 2 + 0.999 * M_PI * (i + 0.5) / 60;
      const double lon = 2 * M_PI * k / 120;
      const Vec3 r(std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat));
      const Vec3 n = -r;
      if (n.z() < -0.999) continue;
      const auto s = sample_to_isotropic({r, n});
      worst = std::max(worst, std::abs(s.f - c(s.x, s.y)) / (1.0 + std::abs(s.f)));
      worst_grad = std::max({worst_grad, std::abs(s.fx - s.x), std::abs(s.fy - s.y)});
    }
  }
  EXPECT_LT(worst, 1e-12);
  EXPECT_LT(worst_grad, 1e-9);
}

// fx, fy from a sample agree with finite differences of f along a sampled
// surface curve: parametrize a torus patch and differentiate along t.
TEST(SampleToIsotropic, GradientConsistentAlongCurve) {
  auto sample = [](double s, double t) {
    const double R0 = 2.0, r0 = 0.5;
    const Vec3 r((R0 + r0 * std::cos(t)) * std::cos(s), (R0 + r0 * std::cos(t)) * std::sin(s),
                 r0 * std::sin(t));
    const Vec3 n = -Vec3(std::cos(t) * std::cos(s), std::cos(t) * std::sin(s), std::sin(t));
    return sample_to_isotropic({r, n});
  };
  double prev_err = 1e9;
  for (double h : {1e-2, 1e-3, 1e-4}) {
    const auto a = sample(0.3, 0.2 - h), b = sample(0.3, 0.2 + h), m = sample(0.3, 0.2);
    const double df = b.f - a.f;
    const double pred = m.fx * (b.x - a.x) + m.fy * (b.y - a.y);
    const double err = std::abs(df - pred) / (2 * h);
    EXPECT_LT(err, prev_err);
    prev_err = err;
  }
  EXPECT_LT(prev_err, 1e-6);
}

TEST(ContactPoint, Examples) {
  Jet4 z;
  EXPECT_NEAR(isotropic_to_contact_point(0.7, -0.4, z).norm(), 0.0, 1e-15);
  Jet4 sphere;
  sphere.f = 0.5;
  EXPECT_NEAR((isotropic_to_contact_point(0, 0, sphere) - Vec3(0, 0, -1)).norm(), 0.0, 1e-15);
}

TEST(ContactPoint, TangencyOnAnalyticSurfaces) {
  std::mt19937_64 rng(5);
  for (const char* text : {"y^2/(x^2+y^2)", "sin(x)*cos(y)+x^3", "exp(0.3*x-y)+x*y"}) {
    const auto ast = parse_expression(text);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
      const double x = oracle::uniform(rng, 0.5, 2.0), y = oracle::uniform(rng, -1.5, 1.5);
      const Jet4 j = jet_of_expression(ast, x, y);
      Vec3 n;
      double h;
      oracle::plane_of(x, y, j.f, n, h);
      const Vec3 r = isotropic_to_contact_point(x, y, j);
      worst = std::max(worst, std::abs(n.dot(r) + h) / (1.0 + r.norm() + std::abs(h)));
    }
    EXPECT_LT(worst, 1e-10) << text;
  }
}

// The contact point is where neighboring planes of the family meet: it lies
// on the plane at (x, y) and on the planes at (x + d, y), (x, y + d) to O(d).
TEST(ContactPoint, IsEnvelopePoint) {
  const auto ast = parse_expression("0.3*x^2 + 0.1*x*y - 0.2*y^2 + x");
  const Jet4 j = jet_of_expression(ast, 0.4, 0.2);
  const Vec3 r = isotropic_to_contact_point(0.4, 0.2, j);
  const double d = 1e-6;
  for (auto [dx, dy] : {std::pair{d, 0.0}, std::pair{0.0, d}}) {
    Vec3 n;
    double h;
    oracle::plane_of(0.4 + dx, 0.2 + dy, evaluate(ast, 0.4 + dx, 0.2 + dy), n, h);
    EXPECT_LT(std::abs(n.dot(r) + h), 1e-10);
  }
}

TEST(Alignment, Examples) {
  std::vector<SurfaceSample> up(5, SurfaceSample{Vec3(1, 2, 3), Vec3(0, 0, 1)});
  auto a = align_to_mean_normal(up);
  EXPECT_NEAR((a.rotation - Mat3::Identity()).norm(), 0.0, 1e-15);

  std::vector<SurfaceSample> side(3, SurfaceSample{Vec3(0, 0, 0), Vec3(1, 0, 0)});
  a = align_to_mean_normal(side);
  const Mat3 expect = Eigen::AngleAxisd(-M_PI / 2, Vec3::UnitY()).toRotationMatrix();
  EXPECT_NEAR((a.rotation - expect).norm(), 0.0, 1e-14);
  EXPECT_NEAR((a.samples[0].n - Vec3(0, 0, 1)).norm(), 0.0, 1e-14);

  std::vector<SurfaceSample> balanced{{Vec3::Zero(), Vec3(0, 0, 1)}, {Vec3::Zero(), Vec3(0, 0, -1)}};
  try {
    align_to_mean_normal(balanced);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateMeanNormal);
  }
}

TEST(Alignment, RandomCloudsAlignedAndMinimal) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SurfaceSample> s;
    const Vec3 c = oracle::random_unit(rng, -1.0);
    for (int i = 0; i < 30; ++i) {
      Vec3 n = (c + 0.3 * oracle::random_unit(rng, -1.0)).normalized();
      s.push_back({Vec3(i, 0, 0), n});
    }
    const auto a = align_to_mean_normal(s);
    Vec3 mean = Vec3::Zero();
    for (const auto& t : a.samples) mean += t.n;
    EXPECT_NEAR((mean.normalized() - Vec3(0, 0, 1)).norm(), 0.0, 1e-12);
    EXPECT_NEAR((a.rotation * a.rotation.transpose() - Mat3::Identity()).norm(), 0.0, 1e-13);
    // Minimal rotation: its axis is orthogonal to both the mean and e3.
    Vec3 m0 = Vec3::Zero();
    for (const auto& t : s) m0 += t.n;
    const Eigen::AngleAxisd aa(a.rotation);
    if (aa.angle() > 1e-9) {
      EXPECT_NEAR(aa.axis().dot(m0.normalized()), 0.0, 1e-10);
      EXPECT_NEAR(aa.axis().z(), 0.0, 1e-10);
    }
  }
}
