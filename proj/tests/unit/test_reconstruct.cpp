#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "coneflank/error.hpp"
#include "coneflank/expr.hpp"
#include "coneflank/reconstruct.hpp"
#include "oracles.hpp"

using namespace coneflank;

namespace {

const double kS3 = std::sqrt(3.0);
const double kTheta30 = M_PI / 6;

JetProvider provider(const char* text) {
  auto ast = std::make_shared<ExprAst>(parse_expression(text));
  return [ast](double x, double y) { return jet_of_expression(*ast, x, y); };
}

Jet4 jet(const char* text, double x, double y) { return provider(text)(x, y); }

ToolParams cone(double theta) {
  ToolParams t;
  t.theta = theta;
  return t;
}

// Max |n.m + h| over planes sampled along the conic, relative to the scale.
double incidence_residual(const ConicCandidate& c, const Vec3& m) {
  double worst = 0.0;
  for (int k = 0; k < 32; ++k) {
    const double t = 2 * M_PI * k / 32;
    Eigen::Vector3d n;
    double h = 0;
    oracle::plane_of(c.px(t), c.py(t), c.pz(t), n, h);
    worst = std::max(worst, std::abs(n.dot(m) + h) / (1.0 + m.norm() + std::abs(h)));
  }
  return worst;
}

double angle(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

// (u, v) along direction phi satisfying the theta condition at (x, y).
Direction theta_direction(double x, double y, double phi, double theta) {
  const double s = x * x + y * y + 1, dx = std::cos(phi), dy = std::sin(phi);
  const double lam = s / (2 * std::tan(theta) - 2 * (x * dx + y * dy));
  return {lam * dx, lam * dy};
}

}  // namespace

TEST(ConeVertex, GeneratorExample) {
  const Jet4 j = jet("y^2/(x^2+y^2)", kS3, 0);
  const ConicCandidate c = make_conic(j, -kS3 / 2, 0, kTheta30);
  EXPECT_NEAR(c.z, 0, 1e-15);
  EXPECT_NEAR(c.a, 0, 1e-15);
  EXPECT_NEAR(c.b, 0.5, 1e-14);
  const Vec3 m = cone_vertex(c);
  EXPECT_LT(incidence_residual(c, m), 1e-13);
  EXPECT_LT((m - Vec3(-2 / kS3, 0, -2)).norm(), 1e-12);
}

TEST(ConeVertex, MirroredExample) {
  const Jet4 j = jet("x^2/(x^2+y^2)", 0, kS3);
  const ConicCandidate c = make_conic(j, 0, -kS3 / 2, kTheta30);
  const Vec3 m = cone_vertex(c);
  EXPECT_LT(incidence_residual(c, m), 1e-13);
  EXPECT_LT((m - Vec3(0, -2 / kS3, -2)).norm(), 1e-12);
}

TEST(ConeVertex, IncidenceOnRandomConics) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    ConicCandidate c;
    c.x = oracle::uniform(rng, -2, 2);
    c.y = oracle::uniform(rng, -2, 2);
    c.z = oracle::uniform(rng, -1, 1);
    c.a = oracle::uniform(rng, -1, 1);
    c.b = oracle::uniform(rng, -1, 1);
    c.theta = oracle::uniform(rng, 0.1, 1.4);
    const Direction w = theta_direction(c.x, c.y, oracle::uniform(rng, -M_PI, M_PI), c.theta);
    c.u = w.u;
    c.v = w.v;
    Vec3 m;
    try {
      m = cone_vertex(c);
    } catch (const Error&) {
      continue;
    }
    EXPECT_LT(incidence_residual(c, m), 1e-9);
  }
}

TEST(ConeVertex, ReparametrizationInvariant) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    ConicCandidate c;
    c.x = oracle::uniform(rng, -1, 1);
    c.y = oracle::uniform(rng, -1, 1);
    c.z = oracle::uniform(rng, -1, 1);
    c.a = oracle::uniform(rng, -1, 1);
    c.b = oracle::uniform(rng, -1, 1);
    c.u = oracle::uniform(rng, -1, 1);
    c.v = oracle::uniform(rng, -1, 1);
    const double t0 = oracle::uniform(rng, -3, 3);
    // Same conic with its parameter origin moved to t0.
    ConicCandidate d = c;
    d.x = c.px(t0);
    d.y = c.py(t0);
    d.z = c.pz(t0);
    d.u = c.x + c.u - d.x;
    d.v = c.y + c.v - d.y;
    d.a = c.a * std::cos(t0) + c.b * std::sin(t0);
    d.b = c.b * std::cos(t0) - c.a * std::sin(t0);
    for (double s : {0.3, 1.7}) {
      ASSERT_NEAR(d.px(s), c.px(t0 + s), 1e-12);
      ASSERT_NEAR(d.pz(s), c.pz(t0 + s), 1e-12);
    }
    Vec3 m1, m2;
    try {
      m1 = cone_vertex(c);
      m2 = cone_vertex(d);
    } catch (const Error&) {
      continue;
    }
    EXPECT_LT((m1 - m2).norm(), 1e-9 * (1 + m1.norm()));
  }
}

TEST(ConeVertex, ZeroDirection) {
  ConicCandidate c;
  c.x = 1;
  try {
    cone_vertex(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateDenominator);
  }
}

TEST(ConeAxis, GeneratorExample) {
  const Jet4 j = jet("y^2/(x^2+y^2)", kS3, 0);
  const ConicCandidate c = make_conic(j, -kS3 / 2, 0, kTheta30);
  const Vec3 a = cone_axis(c);
  EXPECT_LT((a - Vec3(kS3 / 2, 0, 0.5)).norm(), 1e-12);
  // Gaussian-image normals at t = 0 and t = pi.
  for (double t : {0.0, M_PI})
    EXPECT_NEAR(inverse_stereographic(c.px(t), c.py(t)).dot(a), 0.5, 1e-12);
  const Vec3 m = cone_vertex(c);
  EXPECT_NEAR(angle(a, Vec3::Zero() - m), kTheta30, 1e-12);
}

TEST(ConeAxis, CircumscribedConeOfSphere) {
  // Every conic in the unit-sphere paraboloid images a cone tangent to the
  // sphere, whose axis runs through the center.
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const double x = oracle::uniform(rng, -1.5, 1.5), y = oracle::uniform(rng, -1.5, 1.5);
    const double th = oracle::uniform(rng, 0.1, 1.4);
    const Direction w = theta_direction(x, y, oracle::uniform(rng, -M_PI, M_PI), th);
    const ConicCandidate c = make_conic(jet("0.5*(x^2+y^2)+0.5", x, y), w.u, w.v, th);
    Vec3 m, a;
    try {
      m = cone_vertex(c);
      a = cone_axis(c);
    } catch (const Error&) {
      continue;
    }
    EXPECT_LT(m.cross(a).norm(), 1e-8 * (1 + m.norm()));
    for (double t : {0.5, 1.5, 2.5})
      EXPECT_NEAR(inverse_stereographic(c.px(t), c.py(t)).dot(a), std::sin(th), 1e-8);
  }
}

TEST(ConeAxis, CoincidentProbes) {
  const ConicCandidate c = make_conic(jet("y^2/(x^2+y^2)", kS3, 0), -kS3 / 2, 0, kTheta30);
  try {
    cone_axis(c, {0.4, 0.4, 0.4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularSystem);
  }
}

TEST(ConeSide, Example) {
  const ConicCandidate c = make_conic(jet("y^2/(x^2+y^2)", kS3, 0), -kS3 / 2, 0, kTheta30);
  const Vec3 m = cone_vertex(c), r = Vec3::Zero();
  // n(x + 2u, y + 2v) = n(0, 0) = (0, 0, 1); (r - m).n = 2.
  EXPECT_EQ(cone_side(c, m, r), Side::PlusNormal);
  // The reflected contact point lies across the vertex.
  EXPECT_EQ(cone_side(c, m, 2 * m - r), Side::MinusNormal);
  try {
    cone_side(c, m, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AmbiguousSide);
  }
}

TEST(ToolLength, Examples) {
  const Vec3 m(-2 / kS3, 0, -2), r = Vec3::Zero();
  EXPECT_NEAR((m - r).norm(), 4 / kS3, 1e-15);
  EXPECT_TRUE(tool_length_check(m, r, {1, 3}));
  EXPECT_FALSE(tool_length_check(m, r, {0.1, 1}));
  try {
    tool_length_check(m, r, {2, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidBounds);
  }
}

TEST(DevelopableRuling, Examples) {
  auto t1 = integrate_ruling_developable(provider("x^2"), {0.3, 0.2}, {1e-3, 0.2});
  const auto& p = t1.points;
  EXPECT_NEAR(p[1][0] - p[0][0], 0, 1e-15);
  EXPECT_NEAR(p[1][1] - p[0][1], 1e-3, 1e-15);
  EXPECT_EQ(t1.straightness, 0.0);
  EXPECT_LT(t1.max_step_deviation, 0.1);

  auto t2 = integrate_ruling_developable(provider("(x+y)^2"), {0.3, 0.2}, {1e-3, 0.2});
  EXPECT_NEAR((t2.points[1][0] - t2.points[0][0]) + (t2.points[1][1] - t2.points[0][1]), 0,
              1e-15);
  EXPECT_LT(t2.straightness, 1e-10);

  // Graph of a cone: rulings run through the origin, (fx, fy) constant.
  const std::array<double, 2> seed{1.0, 0.5};
  auto t3 = integrate_ruling_developable(provider("sqrt(x^2+y^2)"), seed, {1e-3, 0.5});
  EXPECT_LT(t3.straightness, 1e-8);
  EXPECT_LT(t3.tangent_variation, 1e-8);
  for (const auto& q : t3.points)
    EXPECT_LT(std::abs(q[0] * seed[1] - q[1] * seed[0]), 1e-8);
}

TEST(DevelopableRuling, ZeroHessian) {
  try {
    integrate_ruling_developable(provider("x+2*y"), {0.1, 0.1}, {1e-3, 0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroHessian);
  }
}

TEST(RuledRuling, Examples) {
  auto t1 = integrate_ruling_ruled(provider("x*y"), {1, 1}, {1, 0}, {1e-3, 0.5});
  for (const auto& q : t1.points) EXPECT_EQ(q[1], 1.0);
  EXPECT_GT(t1.points.back()[0], 1.4);
  EXPECT_LT(t1.f_linearity, 1e-12);

  auto t2 = integrate_ruling_ruled(provider("y/x"), {1, 1}, {1, 1}, {1e-3, 0.5});
  EXPECT_LT(t2.straightness, 1e-9);
  EXPECT_LT(t2.f_linearity, 1e-9);

  try {
    integrate_ruling_ruled(provider("x^2+y^2"), {0.5, 0.5}, {1, 0}, {1e-3, 0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoRealRuling);
  }
}

TEST(IsotropicCircle, GeneratorCircles) {
  const auto jets = provider("y^2/(x^2+y^2)");
  // Circles of radius sqrt(3)/2 through the origin. Circles centered on a
  // coordinate axis carry a multiple root (mirror symmetry of f), so the
  // centers avoid the axes.
  const double rad = kS3 / 2;
  for (double beta : {0.4, 1.0, 2.5, -2.0}) {
    const double cx = rad * std::cos(beta), cy = rad * std::sin(beta);
    for (double alpha : {2.0, -2.2}) {
      const double sx = cx + rad * std::cos(beta + alpha), sy = cy + rad * std::sin(beta + alpha);
      const auto tr = integrate_isotropic_circle(jets, kTheta30, {sx, sy}, {cx - sx, cy - sy},
                                                 {1e-3, 0.4, {}});
      EXPECT_NEAR(tr.radius, rad, 1e-6);
      EXPECT_LT(std::hypot(tr.center[0], tr.center[1]) - tr.radius, 1e-6);
      EXPECT_LT(tr.circularity, 1e-6);
      EXPECT_LT(tr.f_consistency, 1e-8);
      EXPECT_LT(tr.max_step_deviation, 0.1);

      // Re-seeding from a produced point with the tracked root gives the same circle.
      const auto q = tr.points[tr.points.size() / 2];
      const auto again = integrate_isotropic_circle(
          jets, kTheta30, q, {tr.center[0] - q[0], tr.center[1] - q[1]}, {1e-3, 0.3, {}});
      EXPECT_LT(std::hypot(again.center[0] - tr.center[0], again.center[1] - tr.center[1]), 1e-6);
      EXPECT_NEAR(again.radius, tr.radius, 1e-6);
    }
  }
}

TEST(IsotropicCircle, MultipleRootGate) {
  // At x^2 + y^2 = 3 the generator root is triple; along the circle centered
  // at (sqrt(3)/2, 0) it stays multiple.
  const auto jets = provider("y^2/(x^2+y^2)");
  for (auto [sx, sy] : {std::pair{kS3, 0.0}, {kS3 / 2 + kS3 / 2 * std::cos(2.0), kS3 / 2 * std::sin(2.0)}}) {
    try {
      integrate_isotropic_circle(jets, kTheta30, {sx, sy}, {kS3 / 2 - sx, -sy});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MultipleRoot);
    }
  }
}

TEST(IsotropicCircle, ParaboloidOfSphere) {
  const auto jets = provider("0.5*(x^2+y^2)+0.5");
  std::mt19937_64 rng(14);
  for (int i = 0; i < 5; ++i) {
    const double th = oracle::uniform(rng, 0.2, 1.2);
    const double x = oracle::uniform(rng, -1, 1), y = oracle::uniform(rng, -1, 1);
    const Direction w = theta_direction(x, y, oracle::uniform(rng, -M_PI, M_PI), th);
    const auto tr = integrate_isotropic_circle(jets, th, {x, y}, w, {1e-3, 0.3, {}});
    EXPECT_LT(tr.f_consistency, 1e-8);
    EXPECT_LT(tr.circularity, 1e-8);
    EXPECT_NEAR(tr.center[0], x + w.u, 1e-6);
    EXPECT_NEAR(tr.center[1], y + w.v, 1e-6);
  }
}

TEST(BuildCone, GeneratorExample) {
  const auto jets = provider("y^2/(x^2+y^2)");
  const ConeBuild b = build_cone_at(kS3, 0, jets, cone(kTheta30), ToolBounds{1, 3});
  ASSERT_FALSE(b.cones.empty());
  EXPECT_LE(b.cones.size(), 6u);
  bool found = false;
  for (const ConeSpec& c : b.cones) {
    if ((c.vertex - Vec3(-2 / kS3, 0, -2)).norm() < 1e-8) {
      found = true;
      EXPECT_LT((c.axis - Vec3(kS3 / 2, 0, 0.5)).norm(), 1e-8);
      EXPECT_LT(c.contact.norm(), 1e-12);
      EXPECT_TRUE(c.feasible);
      EXPECT_EQ(c.side, Side::PlusNormal);
      EXPECT_NEAR(c.tangency_radius, 2 / kS3, 1e-8);
    }
  }
  EXPECT_TRUE(found);
}

TEST(BuildCone, InvariantsOnExactEnvelope) {
  const auto jets = provider("y^2/(x^2+y^2)");
  std::mt19937_64 rng(15);
  int exact = 0;
  for (int i = 0; i < 50; ++i) {
    const double r = std::sqrt(oracle::uniform(rng, 0.5, 5)), phi = oracle::uniform(rng, -M_PI, M_PI);
    const double x = r * std::cos(phi), y = r * std::sin(phi);
    const ConeBuild b = build_cone_at(x, y, jets, cone(kTheta30));
    EXPECT_LE(b.cones.size(), 6u);
    for (const ConeSpec& c : b.cones) {
      const Vec3 d = c.contact - c.vertex;
      EXPECT_LE(std::abs(c.normal.dot(d)), 1e-8 * d.norm());
      EXPECT_NEAR(angle(c.axis, d), kTheta30, 1e-6);
      EXPECT_NEAR(c.axis.norm(), 1.0, 1e-14);
      // Generator circles lie in the graph: the conic is contained.
      if (std::abs(c.c3) < 1e-9) {
        const auto f = [&](double a, double bb) { return a * a == 0 && bb == 0 ? 0.0 : bb * bb / (a * a + bb * bb); };
        const ContactOrder o = contact_order_estimate(c.conic, f);
        EXPECT_TRUE(o.contained);
        ++exact;
      }
    }
  }
  EXPECT_GT(exact, 0);
}

TEST(BuildCone, PlaneJetIsEmpty) {
  const ConeBuild b = build_cone_at(jet("0.3*x - y + 2", 0.2, 0.4), cone(kTheta30));
  EXPECT_TRUE(b.cones.empty());
  EXPECT_EQ(b.reason, "identically-zero");
}

TEST(BuildCone, MissingTheta) {
  try {
    build_cone_at(jet("x*y", 1, 1), ToolParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}
