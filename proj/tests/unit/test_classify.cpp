#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "coneflank/classify.hpp"
#include "coneflank/error.hpp"
#include "coneflank/expr.hpp"
#include "oracles.hpp"

using namespace coneflank;

namespace {

Jet4 jet(const char* text, double x, double y) {
  return jet_of_expression(parse_expression(text), x, y);
}

Jet4 sphere_jet(double x, double y) {
  return jet("0.5*(x^2+y^2) + 0.5", x, y);
}

ToolParams cone(double deg) {
  ToolParams t;
  t.theta = deg * M_PI / 180;
  return t;
}

ToolParams radius(double r, Orientation o = Orientation::Inward) {
  ToolParams t;
  t.radius = r;
  t.orientation = o;
  return t;
}

// Rotates the jet's (x, y) frame: partials of g(p) = f(R^T p) at R p.
Jet4 rotate_jet(const Jet4& j, double a) {
  const double c = std::cos(a), s = std::sin(a);
  Jet4 out;
  out.x = c * j.x - s * j.y;
  out.y = s * j.x + c * j.y;
  // d/dX = c d/dx - s d/dy, d/dY = s d/dx + c d/dy, applied to the Taylor form.
  for (int d = 0; d <= 4; ++d) {
    for (int i = 0; i <= d; ++i) {
      const int k = d - i;
      // Expand (c Dx - s Dy)^i (s Dx + c Dy)^k.
      double coef[5] = {0, 0, 0, 0, 0};  // coef[m] multiplies Dx^(d-m) Dy^m
      coef[0] = 1;
      int deg = 0;
      auto mul = [&](double px, double py) {
        double nc[5] = {0, 0, 0, 0, 0};
        for (int m = 0; m <= deg; ++m) {
          nc[m] += coef[m] * px;
          nc[m + 1] += coef[m] * py;
        }
        ++deg;
        std::copy(nc, nc + 5, coef);
      };
      for (int r = 0; r < i; ++r) mul(c, -s);
      for (int r = 0; r < k; ++r) mul(s, c);
      double v = 0;
      for (int m = 0; m <= d; ++m) v += coef[m] * j.partial(d - m, m);
      out.partial(i, k) = v;
    }
  }
  return out;
}

}  // namespace

TEST(Developable, Examples) {
  EXPECT_EQ(developable_residual(jet("x^2", 0.3, 0.2)), 0.0);
  EXPECT_DOUBLE_EQ(developable_residual(jet("x^2+y^2", 0.3, 0.2)), 4.0);
  EXPECT_DOUBLE_EQ(developable_residual(jet("x*y", 0.3, 0.2)), -1.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const double a = oracle::uniform(rng, -2, 2), b = oracle::uniform(rng, -2, 2);
    const double c = oracle::uniform(rng, -2, 2);
    const std::string e = std::to_string(c) + "*(" + std::to_string(a) + "*x+" + std::to_string(b) +
                          "*y)^2 + 3*x - y";
    EXPECT_NEAR(developable_residual(jet(e.c_str(), oracle::uniform(rng, -1, 1), 0.5)), 0.0, 1e-12);
  }
}

TEST(Ruled, Examples) {
  auto v = ruled_test(jet("x*y", 0.4, -0.2));
  EXPECT_TRUE(v.holds);
  EXPECT_EQ(ruled_resultant(jet("x*y", 0.4, -0.2)), 0.0);
  ASSERT_EQ(v.witnesses.size(), 2u);
  for (const auto& w : v.witnesses) EXPECT_NEAR(std::abs(w.u * w.v), 0.0, 1e-15);

  const Jet4 yx = jet("y/x", 1, 1);
  v = ruled_test(yx);
  EXPECT_TRUE(v.holds);
  EXPECT_LT(v.residual, 1e-10);
  ASSERT_TRUE(v.witness);
  // The witness is the radial direction, along which y/x is constant.
  EXPECT_NEAR(std::abs(v.witness->u - v.witness->v), 0.0, 1e-12);

  v = ruled_test(jet("x^2+y^2", 0.3, 0.1));
  EXPECT_FALSE(v.holds);
  EXPECT_GT(v.residual, 0.5);
}

// A ruled verdict comes with a witness on which f is linear to second order.
TEST(Ruled, WitnessSatisfiesSystem) {
  for (const char* e : {"y/x", "x*y + 2*x", "(y-1)*x^2 + y", "x*y^2 - y"}) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
      const Jet4 j = jet(e, oracle::uniform(rng, 0.5, 1.5), oracle::uniform(rng, 0.5, 1.5));
      const auto v = ruled_test(j);
      if (!v.holds) continue;
      const auto w = *v.witness;
      EXPECT_LT(std::abs(j.fxx * w.u * w.u + 2 * j.fxy * w.u * w.v + j.fyy * w.v * w.v), 1e-8) << e;
      EXPECT_LT(std::abs(j.fxxx * w.u * w.u * w.u + 3 * j.fxxy * w.u * w.u * w.v +
                         3 * j.fxyy * w.u * w.v * w.v + j.fyyy * w.v * w.v * w.v), 1e-8) << e;
    }
  }
  // Lines z = y0 * x through (0, y0, 0) sweep "y*x"; "x*y + 2*x" etc. are ruled too.
  EXPECT_TRUE(ruled_test(jet("(y-1)*x^2 + y", 0.7, 1.3)).holds == false ||
              ruled_test(jet("(y-1)*x^2 + y", 0.7, 1.3)).residual < 1e-10);
}

// The resultant vanishes exactly when the two forms share a root: tune one
// third partial so that a chosen asymptotic direction also kills the cubic.
TEST(Ruled, ResultantMatchesCommonRoot) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    Jet4 j;
    j.fxx = oracle::uniform(rng, -1, 1);
    j.fyy = oracle::uniform(rng, -1, 1);
    j.fxy = oracle::uniform(rng, -1, 1);
    if (developable_residual(j) > -0.05) continue;
    j.fxxx = oracle::uniform(rng, -1, 1);
    j.fxxy = oracle::uniform(rng, -1, 1);
    j.fxyy = oracle::uniform(rng, -1, 1);
    j.fyyy = oracle::uniform(rng, -1, 1);
    // Unit root (u, v) of fxx u^2 + 2 fxy uv + fyy v^2.
    const double q = -(j.fxy + std::copysign(std::sqrt(j.fxy * j.fxy - j.fxx * j.fyy), j.fxy));
    double u = 1, v = 0;
    if (std::abs(j.fxx) >= std::abs(j.fyy)) u = q / j.fxx, v = 1;  // u/v root
    else v = q / j.fyy;                                            // v/u root
    const double n = std::hypot(u, v);
    u /= n, v /= n;
    const auto cubic = [&] {
      return j.fxxx * u * u * u + 3 * j.fxxy * u * u * v + 3 * j.fxyy * u * v * v +
             j.fyyy * v * v * v;
    };
    // Tune the third partial whose monomial dominates along (u, v).
    double& k = std::abs(u) >= std::abs(v) ? j.fxxx : j.fyyy;
    const double w = std::abs(u) >= std::abs(v) ? u * u * u : v * v * v;
    k -= cubic() / w;
    const auto v0 = ruled_test(j);
    EXPECT_LT(v0.residual, 1e-10);
    EXPECT_TRUE(v0.holds);
    k += 0.1;
    EXPECT_GT(ruled_test(j).residual, 1e-6);
  }
}

TEST(ConeEnvelope, SphereEverywhere) {
  for (double deg : {10.0, 30.0, 45.0}) {
    for (auto [x, y] : {std::pair{0.0, 0.0}, {0.5, -0.3}, {2.0, 1.0}}) {
      const auto v = cone_envelope_test(sphere_jet(x, y), cone(deg));
      EXPECT_TRUE(v.holds);
      EXPECT_LT(v.residual, 1e-8);
    }
  }
}

TEST(ConeEnvelope, Examples) {
  const double s3 = std::sqrt(3.0);
  for (double phi : {0.0, 0.4, 2.0, -1.0}) {
    const auto v = cone_envelope_test(jet("y^2/(x^2+y^2)", s3 * std::cos(phi), s3 * std::sin(phi)), cone(30));
    EXPECT_LT(v.residual, 1e-9);
  }
  const auto v = cone_envelope_test(jet("x^4+y^4", 1, 1), cone(30));
  EXPECT_FALSE(v.holds);
  EXPECT_GT(v.residual, 1e-3);
  // Oracle: the smallest |C3| over the brute-force root set.
  const Jet4 j = jet("x^4+y^4", 1, 1);
  double best = 1e300;
  for (const auto& r : oracle_solve(j, M_PI / 6, 7200).roots) best = std::min(best, std::abs(r.c3));
  EXPECT_NEAR(v.residual, best, 1e-6 * best);
  EXPECT_THROW(cone_envelope_test(j, ToolParams{}), Error);
}

TEST(Cylinder, UnitSphere) {
  for (auto [x, y] : {std::pair{0.5, 0.0}, {0.3, -0.8}, {2.0, 1.0}}) {
    const Jet4 j = sphere_jet(x, y);
    const auto a = cylinder_envelope_test(j, radius(1));
    EXPECT_TRUE(a.holds);
    EXPECT_LT(a.residual, 1e-10);
    EXPECT_TRUE(a.necessary_only);
    const auto b = cylinder_envelope_test(j, radius(2));
    EXPECT_FALSE(b.holds);
    EXPECT_NEAR(b.residual, 2.0, 1e-12);
    for (double u : {0.3, -1.0})
      EXPECT_NEAR(cylinder_plane_residual(j, u, 0.7, 2.0, Orientation::Inward), -2 * (u * u + 0.49), 1e-12);
  }
  try {
    cylinder_envelope_test(sphere_jet(0, 0), radius(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateLine);
  }
}

TEST(Cylinder, OutwardIsNegatedRadius) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    Jet4 j;
    j.x = oracle::uniform(rng, -2, 2);
    j.y = oracle::uniform(rng, -2, 2);
    for (int d = 0; d <= 4; ++d)
      for (int k = 0; k <= d; ++k) j.partial(k, d - k) = oracle::uniform(rng, -1, 1);
    const double r = oracle::uniform(rng, 0.1, 2);
    const auto a = cylinder_envelope_test(j, radius(r, Orientation::Outward));
    const double u = oracle::uniform(rng, -1, 1), v = oracle::uniform(rng, -1, 1);
    EXPECT_EQ(cylinder_plane_residual(j, u, v, r, Orientation::Outward),
              cylinder_plane_residual(j, u, v, -r, Orientation::Inward));
    ASSERT_TRUE(a.witness);
    EXPECT_EQ(a.residual, std::abs(cylinder_plane_residual(j, a.witness->u, a.witness->v, -r,
                                                          Orientation::Inward)));
  }
}

TEST(Channel, Examples) {
  const auto s = channel_test(sphere_jet(0.4, 0.2));
  EXPECT_TRUE(s.holds);
  EXPECT_EQ(s.residual, 0.0);
  const auto xy = channel_test(jet("x*y", 0.4, 0.2));
  EXPECT_TRUE(xy.holds);
  EXPECT_EQ(xy.residual, 0.0);
  ASSERT_TRUE(xy.witness);
  EXPECT_NEAR(std::abs(xy.witness->u), std::abs(xy.witness->v), 1e-15);
  EXPECT_TRUE(xy.necessary_only);
  EXPECT_FALSE(channel_test(jet("x^3 + 0.5*y^2 + x*y^2", 0.4, 0.2)).holds);
}

// Resultant oracle: pick a principal direction and force the cubic to vanish.
TEST(Channel, ResultantZeroOnSharedDirection) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    Jet4 j;
    j.fxx = oracle::uniform(rng, -1, 1);
    j.fyy = oracle::uniform(rng, -1, 1);
    j.fxy = oracle::uniform(rng, -1, 1);
    j.fxxx = oracle::uniform(rng, -1, 1);
    j.fxxy = oracle::uniform(rng, -1, 1);
    j.fxyy = oracle::uniform(rng, -1, 1);
    // Principal direction angle: tan(2a) = 2 fxy / (fxx - fyy).
    const double a = 0.5 * std::atan2(2 * j.fxy, j.fxx - j.fyy);
    const double u = std::cos(a), v = std::sin(a);
    EXPECT_NEAR((j.fxx - j.fyy) * u * v + j.fxy * (v * v - u * u), 0.0, 1e-14);
    if (std::abs(u) < 0.1) continue;
    j.fyyy = (j.fxxx * v * v * v - 3 * j.fxxy * v * v * u + 3 * j.fxyy * v * u * u) / (u * u * u);
    EXPECT_LT(channel_resultant(j), 1e-12);
    j.fyyy += 0.2;
    EXPECT_GT(channel_resultant(j), 1e-8);
  }
}

TEST(Pipe, Examples) {
  const auto a = pipe_test(sphere_jet(0.3, 0.2), radius(1));
  EXPECT_TRUE(a.holds);
  EXPECT_LT(a.residual, 1e-12);
  Jet4 j;
  j.x = 0.5;
  j.y = -0.2;
  j.f = 0.3;
  j.fxx = 1.5;
  j.fyy = -0.4;
  const auto b = pipe_test(j, radius(0.7));
  const double r1 = std::abs(cylinder_plane_residual(j, 1, 0, 0.7, Orientation::Inward));
  const double r2 = std::abs(cylinder_plane_residual(j, 0, 1, 0.7, Orientation::Inward));
  EXPECT_NEAR(b.residual, std::min(r1, r2), 1e-14);
  EXPECT_TRUE(b.necessary_only);
}

TEST(ChannelPipe, RotationEquivariance) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 50; ++i) {
    Jet4 j;
    j.x = oracle::uniform(rng, -1, 1);
    j.y = oracle::uniform(rng, -1, 1);
    for (int d = 0; d <= 4; ++d)
      for (int k = 0; k <= d; ++k) j.partial(k, d - k) = oracle::uniform(rng, -1, 1);
    const double a = oracle::uniform(rng, -M_PI, M_PI);
    const Jet4 r = rotate_jet(j, a);
    EXPECT_NEAR(channel_resultant(j), channel_resultant(r), 1e-9 * (1 + channel_resultant(j)));
    // [R28] involves f - x fx - y fy, which is invariant under the rotation.
    const auto p = pipe_test(j, radius(0.8)), q = pipe_test(r, radius(0.8));
    EXPECT_NEAR(p.residual, q.residual, 1e-10 * (1 + p.residual));
  }
}

TEST(Lipschitz, ResidualsStableUnderSmallPerturbation) {
  std::mt19937_64 rng(8);
  const Jet4 base = jet("y^2/(x^2+y^2)", 1.0, 1.0);  // simple roots
  for (int i = 0; i < 20; ++i) {
    Jet4 p = base;
    for (int d = 0; d <= 4; ++d)
      for (int k = 0; k <= d; ++k) p.partial(k, d - k) *= 1 + 1e-6 * oracle::uniform(rng, -1, 1);
    const auto a = cone_envelope_test(base, cone(30)), b = cone_envelope_test(p, cone(30));
    EXPECT_LT(std::abs(a.residual - b.residual), 1e-4);
    EXPECT_LT(std::abs(channel_resultant(base) - channel_resultant(p)), 1e-4);
  }
}

TEST(Millability, Examples) {
  EXPECT_EQ(millability_check(sphere_jet(0.3, -0.4)), Millability::Penetrates);
  EXPECT_EQ(millability_check(sphere_jet(0.0, 0.0)), Millability::Penetrates);
}

TEST(Field, AggregatesAndRejectsEmpty) {
  const auto ast = parse_expression("y^2/(x^2+y^2)");
  JetProvider jets = [&](double x, double y) { return jet_of_expression(ast, x, y); };
  std::vector<std::array<double, 2>> nodes;
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 12; ++k) {
      const double r = std::sqrt(0.5 + 2.4 * i / 5), a = 2 * M_PI * k / 12 + 0.1;
      nodes.push_back({r * std::cos(a), r * std::sin(a)});
    }
  nodes.push_back({0.0, 0.0});  // domain error, recorded
  auto f = classify_field(jets, nodes, SurfaceTest::ConeEnvelope, cone(30), 1e-6);
  EXPECT_TRUE(f.holds);
  EXPECT_EQ(f.failures, 1);
  EXPECT_FALSE(f.nodes.back().ok);
  const auto q = parse_expression("x^4+y^4");
  JetProvider qj = [&](double x, double y) { return jet_of_expression(q, x, y); };
  std::vector<std::array<double, 2>> grid;
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 5; ++k) grid.push_back({0.5 + 0.2 * i, 0.5 + 0.2 * k});
  EXPECT_FALSE(classify_field(qj, grid, SurfaceTest::ConeEnvelope, cone(30), 1e-6).holds);
  try {
    classify_field(qj, {}, SurfaceTest::ConeEnvelope, cone(30), 1e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyGrid);
  }
}
