#include "coneflank/classify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <Eigen/Dense>

#include "coneflank/error.hpp"
#include "coneflank/poly.hpp"

namespace coneflank {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Direction unit(double u, double v) {
  const double l = std::hypot(u, v);
  return {u / l, v / l};
}

// Real directions of a u^2 + b uv + c v^2 = 0. Empty when there are none;
// `all` is set when the form vanishes identically.
std::vector<Direction> quadratic_directions(double a, double b, double c, bool& all) {
  all = false;
  std::vector<Direction> out;
  if (a == 0.0 && b == 0.0 && c == 0.0) {
    all = true;
    return out;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return out;
  const bool swap = std::abs(c) > std::abs(a);
  const double lead = swap ? c : a, tail = swap ? a : c;
  if (lead == 0.0) {
    // a = c = 0: b uv = 0.
    return {{1.0, 0.0}, {0.0, 1.0}};
  }
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  std::vector<double> roots{q / lead};
  if (q != 0.0) roots.push_back(tail / q);
  for (double t : roots) out.push_back(swap ? unit(1.0, t) : unit(t, 1.0));
  return out;
}

// Real directions of c0 u^3 + c1 u^2 v + c2 u v^2 + c3 v^3 = 0.
std::vector<Direction> cubic_directions(double c0, double c1, double c2, double c3) {
  std::vector<Direction> out;
  const double m = std::max({std::abs(c0), std::abs(c1), std::abs(c2), std::abs(c3)});
  if (m == 0.0) return out;
  for (const RealRoot& r : real_roots(Polynomial{c3, c2, c1, c0})) out.push_back(unit(r.t, 1.0));
  if (std::abs(c0) <= 1e-14 * m) out.push_back({1.0, 0.0});
  return out;
}

double rs_cubic(const Jet4& j, double u, double v) {
  return j.fxxx * u * u * u + 3.0 * j.fxxy * u * u * v + 3.0 * j.fxyy * u * v * v +
         j.fyyy * v * v * v;
}
double rs_cubic_scale(const Jet4& j) {
  return std::max({std::abs(j.fxxx), std::abs(j.fxxy), std::abs(j.fxyy), std::abs(j.fyyy)});
}

double hessian_norm(const Jet4& j) {
  return std::max({std::abs(j.fxx), std::abs(j.fxy), std::abs(j.fyy)});
}

// Channel quadratic (principal directions) and cubic, as binary forms.
std::array<double, 3> channel_q(const Jet4& j) { return {-j.fxy, j.fxx - j.fyy, j.fxy}; }
std::array<double, 4> channel_c(const Jet4& j) {
  return {-j.fyyy, 3.0 * j.fxyy, -3.0 * j.fxxy, j.fxxx};
}
double channel_cubic(const Jet4& j, double u, double v) {
  const auto c = channel_c(j);
  return c[0] * u * u * u + c[1] * u * u * v + c[2] * u * v * v + c[3] * v * v * v;
}

// sqrt(sum a_k^2 / binom(n, k)); unchanged when (u, v) is rotated.
double bombieri_norm(std::span<const double> c) {
  const std::size_t n = c.size() - 1;
  double binom = 1.0, s = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    s += c[k] * c[k] / binom;
    binom = binom * static_cast<double>(n - k) / static_cast<double>(k + 1);
  }
  return std::sqrt(s);
}

// Symmetric matrix M with cylinder_plane_residual(w) = w^T M w.
Eigen::Matrix2d cylinder_form(const Jet4& j, double radius, Orientation o) {
  const double r = o == Orientation::Inward ? radius : -radius;
  const double s = j.x * j.x + j.y * j.y + 1.0;
  const double k = 2.0 * (j.f - j.x * j.fx - j.y * j.fy - r);
  Eigen::Matrix2d m;
  m << k + s * j.fyy, -s * j.fxy, -s * j.fxy, k + s * j.fxx;
  return m;
}

// Smallest |w^T M w| over unit w.
double min_abs_on_circle(const Eigen::Matrix2d& m, Direction& argmin) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(1);
  if (lo <= 0.0 && hi >= 0.0) {
    // Interpolate between the eigenvectors to hit zero.
    const Eigen::Vector2d a = es.eigenvectors().col(0), b = es.eigenvectors().col(1);
    const double t = hi > 0.0 ? std::atan(std::sqrt(-lo / hi)) : M_PI / 2;
    const Eigen::Vector2d w = std::cos(t) * a + std::sin(t) * b;
    argmin = {w(0), w(1)};
    return std::abs(w.dot(m * w));
  }
  const Eigen::Vector2d w = std::abs(lo) < std::abs(hi) ? es.eigenvectors().col(0)
                                                        : es.eigenvectors().col(1);
  argmin = {w(0), w(1)};
  return std::min(std::abs(lo), std::abs(hi));
}

double require_radius(const ToolParams& tool) {
  if (!tool.radius || !(*tool.radius > 0.0))
    throw Error(ErrorCode::ConfigError, "this test needs a positive tool radius");
  return *tool.radius;
}

}  // namespace

std::string_view to_string(SurfaceTest t) {
  switch (t) {
    case SurfaceTest::Developable: return "developable";
    case SurfaceTest::Ruled: return "ruled";
    case SurfaceTest::ConeEnvelope: return "cone-envelope";
    case SurfaceTest::CylinderEnvelope: return "cylinder-envelope";
    case SurfaceTest::Channel: return "channel";
    case SurfaceTest::Pipe: return "pipe";
  }
  return "unknown";
}

SurfaceTest surface_test_from_string(std::string_view s) {
  for (SurfaceTest t : {SurfaceTest::Developable, SurfaceTest::Ruled, SurfaceTest::ConeEnvelope,
                        SurfaceTest::CylinderEnvelope, SurfaceTest::Channel, SurfaceTest::Pipe})
    if (to_string(t) == s) return t;
  if (s == "cone") return SurfaceTest::ConeEnvelope;
  if (s == "cylinder") return SurfaceTest::CylinderEnvelope;
  throw Error(ErrorCode::ConfigError, "unknown test '" + std::string(s) + "'");
}

std::string_view to_string(Millability m) {
  switch (m) {
    case Millability::Penetrates: return "penetrates";
    case Millability::Candidate: return "candidate";
    case Millability::Excluded: return "excluded-by-(*)";
  }
  return "unknown";
}

double developable_residual(const Jet4& j) { return j.fxx * j.fyy - j.fxy * j.fxy; }

double ruled_resultant(const Jet4& j) {
  const double fxx = j.fxx, fxy = j.fxy, fyy = j.fyy;
  const double fxxx = j.fxxx, fxxy = j.fxxy, fxyy = j.fxyy, fyyy = j.fyyy;
  return fyy * fyy * fyy * fxxx * fxxx + 6 * fyy * fxxx * fyyy * fxy * fxx -
         6 * fyy * fyy * fxxx * fxyy * fxx - 6 * fyyy * fxy * fxx * fxx * fxyy +
         9 * fyy * fxyy * fxyy * fxx * fxx - 6 * fxy * fyy * fyy * fxxy * fxxx +
         12 * fxy * fxy * fxxy * fyyy * fxx - 18 * fxy * fyy * fxxy * fxyy * fxx +
         12 * fyy * fxyy * fxy * fxy * fxxx - 8 * fyyy * fxy * fxy * fxy * fxxx +
         9 * fxx * fyy * fyy * fxxy * fxxy - 6 * fyy * fxxy * fyyy * fxx * fxx +
         fyyy * fyyy * fxx * fxx * fxx;
}

ClassVerdict ruled_test(const Jet4& j, double tol) {
  ClassVerdict out;
  out.test = SurfaceTest::Ruled;
  const double qn = hessian_norm(j), cn = rs_cubic_scale(j);
  const double denom = qn * qn * qn * cn * cn;
  const double rr = denom > 0.0 ? std::abs(ruled_resultant(j)) / denom : 0.0;
  const double k = developable_residual(j);
  const double kn = qn > 0.0 ? std::max(0.0, k) / (qn * qn) : 0.0;
  out.residual = rr + kn;

  bool all = false;
  std::vector<Direction> dirs = quadratic_directions(j.fxx, 2.0 * j.fxy, j.fyy, all);
  if (all) dirs = cubic_directions(j.fxxx, 3.0 * j.fxxy, 3.0 * j.fxyy, j.fyyy);
  if (all && dirs.empty()) dirs = {{1.0, 0.0}};
  double best = kInf;
  for (const Direction& d : dirs) {
    const double c = std::abs(rs_cubic(j, d.u, d.v));
    if (c <= 1e-8 * std::max(1.0, cn)) out.witnesses.push_back(d);
    if (c < best) {
      best = c;
      out.witness = d;
    }
  }
  out.holds = out.residual <= tol && out.witness.has_value();
  return out;
}

ClassVerdict cone_envelope_test(const Jet4& j, const ToolParams& tool, double tol,
                                const SolveOptions& opt) {
  if (!tool.theta || !(*tool.theta > 0.0 && *tool.theta < M_PI / 2))
    throw Error(ErrorCode::ConfigError, "cone test needs an opening angle in (0, 90) degrees");
  ClassVerdict out;
  out.test = SurfaceTest::ConeEnvelope;
  const SolveReport rep = solve_hyperosculating(j, *tool.theta, opt);
  const auto& cands = rep.identically_zero ? rep.family : rep.roots;
  out.residual = kInf;
  for (const ContactRoot& r : cands) {
    if (std::abs(r.c3) <= tol) out.witnesses.push_back({r.u, r.v});
    if (std::abs(r.c3) < out.residual) {
      out.residual = std::abs(r.c3);
      out.witness = Direction{r.u, r.v};
      out.jacobian = r.jacobian;
    }
  }
  out.holds = out.residual <= tol;
  return out;
}

double cylinder_plane_residual(const Jet4& j, double u, double v, double radius,
                               Orientation orientation) {
  const double r = orientation == Orientation::Inward ? radius : -radius;
  const double s = j.x * j.x + j.y * j.y + 1.0;
  return 2.0 * (u * u + v * v) * (j.f - j.x * j.fx - j.y * j.fy - r) +
         s * (j.fxx * v * v - 2.0 * j.fxy * u * v + j.fyy * u * u);
}

ClassVerdict cylinder_envelope_test(const Jet4& j, const ToolParams& tool, double tol) {
  const double radius = require_radius(tool);
  ClassVerdict out;
  out.test = SurfaceTest::CylinderEnvelope;
  out.necessary_only = true;
  const double x = j.x, y = j.y;
  const double r2 = x * x + y * y;
  if (r2 < 1e-24)
    throw Error(ErrorCode::DegenerateLine, "no great-circle conic passes through (0, 0)");
  const double s = r2 + 1.0;
  // (u, v) = p0 + t d is the line x^2+y^2+1+2xu+2yv = 0.
  const double p0u = -s * x / (2.0 * r2), p0v = -s * y / (2.0 * r2);
  const double rn = std::sqrt(r2);
  const double du = -y / rn, dv = x / rn;
  const Polynomial u{p0u, du}, v{p0v, dv};
  const Polynomial c2 = j.fxxx * (v * v * v) - 3.0 * j.fxxy * (v * v * u) +
                        3.0 * j.fxyy * (v * u * u) - j.fyyy * (u * u * u) +
                        3.0 * (j.fxx - j.fyy) * (u * v) + 3.0 * j.fxy * (v * v - u * u);
  const double scale = std::max(1.0, j.curvature_scale()) * std::pow(1.0 + s / rn, 3);
  out.residual = kInf;
  if (c2.max_abs_coeff() <= 1e-12 * scale) {
    Direction w;
    out.residual = min_abs_on_circle(cylinder_form(j, radius, tool.orientation), w);
    out.witness = w;
  } else {
    for (const RealRoot& r : real_roots(c2.trimmed(1e-14))) {
      const Direction w = unit(p0u + r.t * du, p0v + r.t * dv);
      const double res = std::abs(cylinder_plane_residual(j, w.u, w.v, radius, tool.orientation));
      if (res <= tol) out.witnesses.push_back(w);
      if (res < out.residual) {
        out.residual = res;
        out.witness = w;
      }
    }
  }
  out.holds = out.residual <= tol;
  return out;
}

double channel_resultant(const Jet4& j) {
  const auto q = channel_q(j);
  const auto c = channel_c(j);
  const double qn = bombieri_norm(q), cn = bombieri_norm(c);
  if (qn == 0.0 || cn == 0.0) return 0.0;
  Eigen::Matrix<double, 5, 5> m = Eigen::Matrix<double, 5, 5>::Zero();
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) m(r, r + k) = q[static_cast<std::size_t>(k)] / qn;
  for (int r = 0; r < 2; ++r)
    for (int k = 0; k < 4; ++k) m(3 + r, r + k) = c[static_cast<std::size_t>(k)] / cn;
  return std::abs(m.determinant());
}

ClassVerdict channel_test(const Jet4& j, double tol) {
  ClassVerdict out;
  out.test = SurfaceTest::Channel;
  out.necessary_only = true;
  out.residual = channel_resultant(j);
  const auto q = channel_q(j);
  const auto c = channel_c(j);
  bool all = false;
  std::vector<Direction> dirs = quadratic_directions(q[0], q[1], q[2], all);
  if (all) dirs = cubic_directions(c[0], c[1], c[2], c[3]);
  if (dirs.empty()) dirs = {{1.0, 0.0}};
  const double cn = std::max(bombieri_norm(c), 1e-300);
  double best = kInf;
  for (const Direction& d : dirs) {
    const double r = std::abs(channel_cubic(j, d.u, d.v)) / cn;
    if (r <= std::max(tol, 1e-12)) out.witnesses.push_back(d);
    if (r < best) {
      best = r;
      out.witness = d;
    }
  }
  out.holds = out.residual <= tol;
  return out;
}

ClassVerdict pipe_test(const Jet4& j, const ToolParams& tool, double tol) {
  const double radius = require_radius(tool);
  ClassVerdict out;
  out.test = SurfaceTest::Pipe;
  out.necessary_only = true;
  const auto q = channel_q(j);
  bool all = false;
  const std::vector<Direction> dirs = quadratic_directions(q[0], q[1], q[2], all);
  out.residual = kInf;
  if (all) {
    Direction w;
    out.residual = min_abs_on_circle(cylinder_form(j, radius, tool.orientation), w);
    out.witness = w;
  }
  for (const Direction& d : dirs) {
    const double r = std::abs(cylinder_plane_residual(j, d.u, d.v, radius, tool.orientation));
    if (r <= tol) out.witnesses.push_back(d);
    if (r < out.residual) {
      out.residual = r;
      out.witness = d;
    }
  }
  out.holds = out.residual <= tol;
  return out;
}

Millability millability_check(const Jet4& j, double tol) {
  const double x = j.x, y = j.y;
  const double h = 1e-3 * std::max(1.0, std::hypot(x, y));
  auto point = [&](double dx, double dy) {
    Jet4 k;
    k.f = j.taylor_value(dx, dy);
    const auto g = j.taylor_gradient(dx, dy);
    k.fx = g[0];
    k.fy = g[1];
    return isotropic_to_contact_point(x + dx, y + dy, k);
  };
  auto normal = [&](double dx, double dy) { return inverse_stereographic(x + dx, y + dy); };
  auto stencil = [&](auto&& g, double ex, double ey) {
    return Vec3((-g(2 * h * ex, 2 * h * ey) + 8.0 * g(h * ex, h * ey) - 8.0 * g(-h * ex, -h * ey) +
                 g(-2 * h * ex, -2 * h * ey)) / (12.0 * h));
  };
  const Vec3 rx = stencil(point, 1, 0), ry = stencil(point, 0, 1);
  const Vec3 nx = stencil(normal, 1, 0), ny = stencil(normal, 0, 1);
  const double l = -rx.dot(nx);
  const double m = -0.5 * (rx.dot(ny) + ry.dot(nx));
  const double n = -ry.dot(ny);
  const double det = l * n - m * m;
  if (!std::isfinite(det) || std::abs(det) <= tol * (l * l + 2.0 * m * m + n * n))
    return Millability::Excluded;
  return det > 0.0 ? Millability::Penetrates : Millability::Candidate;
}

ClassVerdict run_test(SurfaceTest test, const Jet4& j, const ToolParams& tool, double tol) {
  switch (test) {
    case SurfaceTest::Developable: {
      ClassVerdict v;
      v.test = test;
      v.residual = std::abs(developable_residual(j));
      v.holds = v.residual <= tol;
      if (hessian_norm(j) > 0.0) {
        // Kernel of the Hessian, the ruling direction.
        const double a = std::hypot(j.fyy, j.fxy), b = std::hypot(j.fxx, j.fxy);
        v.witness = a >= b ? unit(j.fyy, -j.fxy) : unit(-j.fxy, j.fxx);
      }
      return v;
    }
    case SurfaceTest::Ruled: return ruled_test(j, tol);
    case SurfaceTest::ConeEnvelope: return cone_envelope_test(j, tool, tol);
    case SurfaceTest::CylinderEnvelope: return cylinder_envelope_test(j, tool, tol);
    case SurfaceTest::Channel: return channel_test(j, tol);
    case SurfaceTest::Pipe: return pipe_test(j, tool, tol);
  }
  throw Error(ErrorCode::ConfigError, "unknown test");
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(q * static_cast<double>(values.size()));
  const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(values.size()))) - 1;
  return values[idx];
}

FieldSummary classify_field(const JetProvider& jets, std::span<const std::array<double, 2>> nodes,
                            SurfaceTest test, const ToolParams& tool, double tol) {
  if (nodes.empty()) throw Error(ErrorCode::EmptyGrid, "no grid nodes");
  if (test == SurfaceTest::ConeEnvelope && !tool.theta)
    throw Error(ErrorCode::ConfigError, "cone test needs --theta");
  if ((test == SurfaceTest::CylinderEnvelope || test == SurfaceTest::Pipe) && !tool.radius)
    throw Error(ErrorCode::ConfigError, "this test needs --radius");
  FieldSummary out;
  out.nodes.resize(nodes.size());
  // Nodes are independent; workers fill disjoint slots, the reduce below is ordered.
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < nodes.size(); i = next++) {
      FieldNode& node = out.nodes[i];
      node.x = nodes[i][0];
      node.y = nodes[i][1];
      try {
        node.verdict = run_test(test, jets(node.x, node.y), tool, tol);
        node.residual = node.verdict->residual;
        node.ok = true;
      } catch (const Error& e) {
        node.error = e.what();
        node.residual = kInf;
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), (nodes.size() + 15) / 16);
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < n_threads; ++k) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  std::vector<double> residuals;
  for (const FieldNode& n : out.nodes) {
    if (n.ok) residuals.push_back(n.residual);
    else ++out.failures;
  }
  if (!residuals.empty()) {
    out.p50 = percentile(residuals, 0.5);
    out.p95 = percentile(residuals, 0.95);
    out.max = *std::max_element(residuals.begin(), residuals.end());
    out.holds = out.p95 <= tol;
  } else {
    out.p50 = out.p95 = out.max = kInf;
  }
  return out;
}

}  // namespace coneflank
