#include "coneflank/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coneflank/error.hpp"

namespace coneflank {

namespace {

using P2 = std::array<double, 2>;

constexpr double kMaxTurn = 30.0 * M_PI / 180.0;

P2 add(P2 a, P2 b, double s) { return {a[0] + s * b[0], a[1] + s * b[1]}; }
double dot(P2 a, P2 b) { return a[0] * b[0] + a[1] * b[1]; }
double norm(P2 a) { return std::hypot(a[0], a[1]); }
P2 unit(P2 a) {
  const double n = norm(a);
  return {a[0] / n, a[1] / n};
}
double angle_between(P2 a, P2 b) {
  return std::atan2(std::abs(a[0] * b[1] - a[1] * b[0]), dot(a, b));
}

// One classical Runge-Kutta step; `field` may depend on the step's
// reference direction, which stays fixed across the four stages.
template <class Field>
P2 rk4(P2 p, double h, Field&& field) {
  const P2 k1 = field(p);
  const P2 k2 = field(add(p, k1, h / 2));
  const P2 k3 = field(add(p, k2, h / 2));
  const P2 k4 = field(add(p, k3, h));
  return {p[0] + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
          p[1] + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
}

int step_count(double step, double length) {
  if (!(step > 0.0) || !(length > 0.0))
    throw Error(ErrorCode::ConfigError, "trace step and length must be positive");
  return std::max(1, static_cast<int>(std::lround(length / step)));
}

double chord_deviation(const std::vector<P2>& pts) {
  const P2 a = pts.front(), b = pts.back();
  const P2 d = {b[0] - a[0], b[1] - a[1]};
  const double len = norm(d);
  double worst = 0.0;
  for (const P2& p : pts) {
    const P2 e = {p[0] - a[0], p[1] - a[1]};
    const double dist = len > 0.0 ? std::abs(e[0] * d[1] - e[1] * d[0]) / len : norm(e);
    worst = std::max(worst, dist);
  }
  return worst;
}

double step_deviation(const std::vector<P2>& pts, double step) {
  double worst = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double s = norm({pts[i][0] - pts[i - 1][0], pts[i][1] - pts[i - 1][1]});
    worst = std::max(worst, std::abs(s / step - 1.0));
  }
  return worst;
}

// Max residual of the least-squares line through (s_i, f_i).
double linear_fit_deviation(const std::vector<double>& s, const std::vector<double>& f) {
  const std::size_t n = s.size();
  if (n < 3) return 0.0;
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = s[i];
    b(i) = f[i];
  }
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(b);
  return (a * c - b).cwiseAbs().maxCoeff();
}

std::vector<double> arc_lengths(const std::vector<P2>& pts) {
  std::vector<double> s(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i)
    s[i] = s[i - 1] + norm({pts[i][0] - pts[i - 1][0], pts[i][1] - pts[i - 1][1]});
  return s;
}

double hessian_scale(const Jet4& j) {
  return std::max({std::abs(j.fxx), std::abs(j.fxy), std::abs(j.fyy)});
}

// Kernel direction of the Hessian, sign-aligned with `ref`.
P2 hessian_kernel(const Jet4& j, P2 ref) {
  Eigen::Matrix2d h;
  h << j.fxx, j.fxy, j.fxy, j.fyy;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h);
  const int k = std::abs(es.eigenvalues()(0)) <= std::abs(es.eigenvalues()(1)) ? 0 : 1;
  P2 d = {es.eigenvectors()(0, k), es.eigenvectors()(1, k)};
  d = unit(d);
  if (dot(d, ref) < 0.0) d = {-d[0], -d[1]};
  return d;
}

// Unit asymptotic directions (both signs) of fxx u^2 + 2 fxy uv + fyy v^2.
std::vector<P2> asymptotic_directions(const Jet4& j) {
  const double k = j.fxx * j.fyy - j.fxy * j.fxy;
  const double scale = std::max(hessian_scale(j), 1e-300);
  if (k > 1e-12 * scale * scale)
    throw Error(ErrorCode::NoRealRuling, "positive Gaussian curvature, no real asymptotic direction");
  std::vector<P2> out;
  if (hessian_scale(j) == 0.0) return out;
  const double disc = std::sqrt(std::max(0.0, -k));
  const auto push = [&](P2 d) {
    d = unit(d);
    out.push_back(d);
    out.push_back({-d[0], -d[1]});
  };
  if (j.fxx == 0.0 && j.fyy == 0.0) {  // 2 fxy uv
    push({1.0, 0.0});
    push({0.0, 1.0});
  } else if (std::abs(j.fxx) >= std::abs(j.fyy)) {
    // u / v roots of fxx t^2 + 2 fxy t + fyy.
    const double q = -(j.fxy + std::copysign(disc, j.fxy));
    push({q / j.fxx, 1.0});
    if (q != 0.0) push({j.fyy / q, 1.0});
    else push({1.0, 0.0});
  } else {
    const double q = -(j.fxy + std::copysign(disc, j.fxy));
    push({1.0, q / j.fyy});
    if (q != 0.0) push({1.0, j.fxx / q});
    else push({0.0, 1.0});
  }
  return out;
}

double ruling_cubic(const Jet4& j, P2 d) {
  const double u = d[0], v = d[1];
  const double c = j.fxxx * u * u * u + 3 * j.fxxy * u * u * v + 3 * j.fxyy * u * v * v +
                   j.fyyy * v * v * v;
  const double s = std::abs(j.fxxx) + 3 * std::abs(j.fxxy) + 3 * std::abs(j.fxyy) +
                   std::abs(j.fyyy);
  return s > 0.0 ? std::abs(c) / s : 0.0;
}

// Branch within 30 degrees of ref with the smallest normalized cubic.
P2 pick_ruling(const Jet4& j, P2 ref) {
  const auto dirs = asymptotic_directions(j);
  const P2* best = nullptr;
  double best_c = std::numeric_limits<double>::infinity(), best_a = best_c;
  for (const P2& d : dirs) {
    const double a = angle_between(d, ref);
    if (a > kMaxTurn) continue;
    const double c = ruling_cubic(j, d);
    if (c < best_c - 1e-12 || (std::abs(c - best_c) <= 1e-12 && a < best_a)) {
      best = &d;
      best_c = c;
      best_a = a;
    }
  }
  if (!best) throw Error(ErrorCode::BranchJump, "no ruling continues within 30 degrees");
  return *best;
}

// Parameter t at which the conic's top view passes through p.
double conic_parameter(const ConicCandidate& c, P2 p) {
  const double cx = c.x + c.u, cy = c.y + c.v;
  const double dx = p[0] - cx, dy = p[1] - cy, w2 = c.u * c.u + c.v * c.v;
  const double s = (c.v * dx - c.u * dy) / w2;
  const double co = -(c.u * dx + c.v * dy) / w2;
  return std::atan2(s, co);
}

struct Tracked {
  P2 w{0.0, 0.0};
  double jacobian = 0.0;
};

// Solution of the theta condition along the direction of w closest to w;
// used when every direction satisfies the hyperosculation cubic.
P2 project_theta(P2 p, P2 w, double theta) {
  const double s = p[0] * p[0] + p[1] * p[1] + 1.0, t = std::tan(theta);
  const P2 d = unit(w);
  const double pd = dot(p, d);
  P2 best = w;
  double best_err = std::numeric_limits<double>::infinity();
  for (double sign : {1.0, -1.0}) {
    const double den = sign * 2.0 * t - 2.0 * pd;
    if (den == 0.0) continue;
    const double lam = s / den;
    const P2 cand = {lam * d[0], lam * d[1]};
    const double err = norm({cand[0] - w[0], cand[1] - w[1]});
    if (err < best_err) {
      best_err = err;
      best = cand;
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(Side s) { return s == Side::PlusNormal ? "+normal" : "-normal"; }

Vec3 cone_vertex(const ConicCandidate& c) {
  const double x = c.x, y = c.y, z = c.z, u = c.u, v = c.v, a = c.a, b = c.b;
  const double w2 = u * u + v * v;
  const double l = x * x + y * y + 1.0 + 2.0 * u * x + 2.0 * v * y;
  const double lscale = x * x + y * y + 1.0 + 2.0 * std::abs(u * x) + 2.0 * std::abs(v * y);
  if (!(w2 > 0.0) || std::abs(l) <= 1e-14 * lscale)
    throw Error(ErrorCode::DegenerateDenominator, "vertex denominator vanishes");
  const double p = a * v + b * u, q = b * v - a * u;
  const Vec3 num((x * x - y * y - 1.0) * p + 2.0 * x * y * q - 2.0 * w2 * (u * z + x * z + a * y),
                 (y * y - x * x - 1.0) * q + 2.0 * x * y * p - 2.0 * w2 * (v * z + y * z - a * x),
                 2.0 * x * p + 2.0 * y * q - 2.0 * w2 * z);
  return num / (w2 * l);
}

Vec3 cone_axis(const ConicCandidate& c, std::array<double, 3> probes) {
  Mat3 n;
  for (int i = 0; i < 3; ++i) n.row(i) = inverse_stereographic(c.px(probes[i]), c.py(probes[i]));
  Eigen::JacobiSVD<Mat3> svd(n, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto sv = svd.singularValues();
  if (!(sv(2) > 1e-10 * sv(0)))
    throw Error(ErrorCode::SingularSystem, "probe normals are nearly dependent");
  const Vec3 a = svd.solve(Vec3::Constant(std::sin(c.theta)));
  return a.normalized();
}

Side cone_side(const ConicCandidate& c, const Vec3& m, const Vec3& r) {
  const Vec3 n2 = inverse_stereographic(c.x + 2.0 * c.u, c.y + 2.0 * c.v);
  const Vec3 d = r - m;
  const double s = n2.dot(d);
  if (!(std::abs(s) > 1e-10 * d.norm()))
    throw Error(ErrorCode::AmbiguousSide, "grazing configuration, side undecided");
  return s > 0.0 ? Side::PlusNormal : Side::MinusNormal;
}

bool tool_length_check(const Vec3& m, const Vec3& r, const ToolBounds& b) {
  if (!(b.r_min >= 0.0) || !(b.r_min < b.r_max))
    throw Error(ErrorCode::InvalidBounds, "tool bounds need 0 <= r_min < r_max");
  const double d = (m - r).norm();
  return b.r_min <= d && d <= b.r_max;
}

CurveTrace integrate_ruling_developable(const JetProvider& jets, std::array<double, 2> seed,
                                        const TraceOptions& opt) {
  const int n = step_count(opt.step, opt.length);
  const Jet4 j0 = jets(seed[0], seed[1]);
  const double scale = std::max({1.0, std::abs(j0.fx), std::abs(j0.fy)});
  if (hessian_scale(j0) <= 1e-12 * scale)
    throw Error(ErrorCode::ZeroHessian, "all second partials vanish at the seed");
  // Prefer the sign of (fyy, -fxy); fall back to a positive second component.
  P2 ref = {j0.fyy, -j0.fxy};
  if (norm(ref) <= 1e-12 * hessian_scale(j0)) ref = {0.0, 1.0};
  ref = hessian_kernel(j0, ref);

  CurveTrace tr;
  tr.step = opt.step;
  P2 p = seed;
  tr.points.push_back(p);
  tr.f.push_back(j0.f);
  for (int k = 0; k < n; ++k) {
    const P2 r = ref;
    p = rk4(p, opt.step, [&](P2 q) { return hessian_kernel(jets(q[0], q[1]), r); });
    const Jet4 j = jets(p[0], p[1]);
    ref = hessian_kernel(j, ref);
    tr.points.push_back(p);
    tr.f.push_back(j.f);
    tr.tangent_variation =
        std::max(tr.tangent_variation, std::hypot(j.fx - j0.fx, j.fy - j0.fy));
  }
  tr.straightness = chord_deviation(tr.points);
  tr.f_linearity = linear_fit_deviation(arc_lengths(tr.points), tr.f);
  tr.max_step_deviation = step_deviation(tr.points, opt.step);
  return tr;
}

CurveTrace integrate_ruling_ruled(const JetProvider& jets, std::array<double, 2> seed,
                                  Direction branch, const TraceOptions& opt) {
  const int n = step_count(opt.step, opt.length);
  if (branch.u == 0.0 && branch.v == 0.0)
    throw Error(ErrorCode::ConfigError, "branch selector must be a nonzero direction");
  const Jet4 j0 = jets(seed[0], seed[1]);
  P2 ref = pick_ruling(j0, unit({branch.u, branch.v}));

  CurveTrace tr;
  tr.step = opt.step;
  P2 p = seed;
  tr.points.push_back(p);
  tr.f.push_back(j0.f);
  for (int k = 0; k < n; ++k) {
    const P2 r = ref;
    p = rk4(p, opt.step, [&](P2 q) { return pick_ruling(jets(q[0], q[1]), r); });
    const Jet4 j = jets(p[0], p[1]);
    ref = pick_ruling(j, ref);
    tr.points.push_back(p);
    tr.f.push_back(j.f);
  }
  tr.straightness = chord_deviation(tr.points);
  tr.f_linearity = linear_fit_deviation(arc_lengths(tr.points), tr.f);
  tr.max_step_deviation = step_deviation(tr.points, opt.step);
  return tr;
}

CurveTrace integrate_isotropic_circle(const JetProvider& jets, double theta,
                                      std::array<double, 2> seed, Direction root,
                                      const CircleTraceOptions& opt) {
  const int n = step_count(opt.step, opt.length);
  if (root.u == 0.0 && root.v == 0.0)
    throw Error(ErrorCode::ConfigError, "root selector must be a nonzero direction");

  // Root at q closest to the prediction w_pred; gated on multiplicity.
  const auto track = [&](P2 q, P2 w_pred, double tol) {
    const Jet4 j = jets(q[0], q[1]);
    const SolveReport rep = solve_hyperosculating(j, theta, opt.solve);
    if (rep.identically_zero) return Tracked{project_theta(q, w_pred, theta), 0.0};
    const ContactRoot* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const ContactRoot& r : rep.roots) {
      const double d = norm({r.u - w_pred[0], r.v - w_pred[1]});
      if (d < best_d) {
        best_d = d;
        best = &r;
      }
    }
    if (!best || best_d > tol * std::max(norm(w_pred), 1e-3))
      throw Error(ErrorCode::RootLost, "no hyperosculating root continues the tracked one");
    if (best->multiple)
      throw Error(ErrorCode::MultipleRoot, "tracked root is a multiple root");
    return Tracked{{best->u, best->v}, best->jacobian};
  };

  const Tracked t0 = track(seed, {root.u, root.v}, 0.1);
  const Jet4 j0 = jets(seed[0], seed[1]);
  const ConicCandidate conic = make_conic(j0, t0.w[0], t0.w[1], theta);

  CurveTrace tr;
  tr.step = opt.step;
  P2 p = seed;
  P2 center = {seed[0] + t0.w[0], seed[1] + t0.w[1]};
  tr.points.push_back(p);
  tr.f.push_back(j0.f);
  for (int k = 0; k < n; ++k) {
    const P2 c = center;
    const auto field = [&](P2 q) {
      const Tracked t = track(q, {c[0] - q[0], c[1] - q[1]}, 0.05);
      return unit({t.w[1], -t.w[0]});
    };
    p = rk4(p, opt.step, field);
    const Tracked t = track(p, {c[0] - p[0], c[1] - p[1]}, 0.05);
    center = {p[0] + t.w[0], p[1] + t.w[1]};
    const double f = jets(p[0], p[1]).f;
    tr.points.push_back(p);
    tr.f.push_back(f);
  }
  for (std::size_t i = 0; i < tr.points.size(); ++i) {
    const double tp = conic_parameter(conic, tr.points[i]);
    tr.f_consistency = std::max(tr.f_consistency, std::abs(tr.f[i] - conic.pz(tp)));
  }
  const auto fit = fit_circle(tr.points);
  tr.center = {fit[0], fit[1]};
  tr.radius = fit[2];
  for (const P2& q : tr.points)
    tr.circularity =
        std::max(tr.circularity, std::abs(norm({q[0] - fit[0], q[1] - fit[1]}) - fit[2]));
  tr.straightness = chord_deviation(tr.points);
  tr.max_step_deviation = step_deviation(tr.points, opt.step);
  return tr;
}

std::array<double, 3> fit_circle(const std::vector<std::array<double, 2>>& pts) {
  if (pts.size() < 3) throw Error(ErrorCode::TooFewSamples, "circle fit needs 3 points");
  // Centered and scaled for conditioning; x^2 + y^2 + D x + E y + F = 0.
  double mx = 0.0, my = 0.0;
  for (const P2& p : pts) mx += p[0], my += p[1];
  mx /= pts.size(), my /= pts.size();
  double sc = 0.0;
  for (const P2& p : pts) sc = std::max(sc, std::hypot(p[0] - mx, p[1] - my));
  if (sc == 0.0) throw Error(ErrorCode::IllConditioned, "circle fit on coincident points");
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = (pts[i][0] - mx) / sc, y = (pts[i][1] - my) / sc;
    a(i, 0) = x;
    a(i, 1) = y;
    a(i, 2) = 1.0;
    b(i) = -(x * x + y * y);
  }
  const Eigen::Vector3d s = a.colPivHouseholderQr().solve(b);
  const double cx = -s(0) / 2, cy = -s(1) / 2;
  const double r = std::sqrt(std::max(0.0, cx * cx + cy * cy - s(2)));
  return {mx + sc * cx, my + sc * cy, sc * r};
}

ConeBuild build_cone_at(const Jet4& j, const ToolParams& tool,
                        const std::optional<ToolBounds>& bounds, const SolveOptions& opt) {
  if (!tool.theta || !(*tool.theta > 0.0 && *tool.theta < M_PI / 2))
    throw Error(ErrorCode::ConfigError, "cone reconstruction needs an opening angle in (0, 90) degrees");
  if (bounds && !(bounds->r_min >= 0.0 && bounds->r_min < bounds->r_max))
    throw Error(ErrorCode::InvalidBounds, "tool bounds need 0 <= r_min < r_max");
  const double theta = *tool.theta;
  ConeBuild out;
  out.report = solve_hyperosculating(j, theta, opt);
  if (out.report.identically_zero) {
    out.reason = "identically-zero";
    return out;
  }
  if (out.report.roots.empty()) {
    out.reason = "no-real-roots";
    return out;
  }
  const Vec3 r = isotropic_to_contact_point(j.x, j.y, j);
  const Vec3 n = inverse_stereographic(j.x, j.y);
  for (const ContactRoot& root : out.report.roots) {
    try {
      ConeSpec cs;
      cs.conic = make_conic(j, root.u, root.v, theta);
      cs.vertex = cone_vertex(cs.conic);
      cs.axis = cone_axis(cs.conic);
      // Both nappes share the normals; orient toward the one through r.
      if (cs.axis.dot(r - cs.vertex) < 0.0) cs.axis = -cs.axis;
      cs.theta = theta;
      cs.contact = r;
      cs.normal = n;
      cs.side = cone_side(cs.conic, cs.vertex, r);
      cs.distance = (r - cs.vertex).norm();
      // A vertex on the contact point has no defined ruling or tangency circle.
      if (cs.distance <= 1e-9 * (1.0 + r.norm())) {
        out.dropped.push_back({root.u, root.v, "vertex-at-contact"});
        continue;
      }
      cs.tangency_radius = cs.distance * std::sin(theta);
      cs.feasible = bounds ? tool_length_check(cs.vertex, r, *bounds) : true;
      cs.u = root.u;
      cs.v = root.v;
      cs.c3 = root.c3;
      cs.jacobian = root.jacobian;
      out.cones.push_back(cs);
    } catch (const Error& e) {
      out.dropped.push_back({root.u, root.v, std::string(to_string(e.code()))});
    }
  }
  return out;
}

ConeBuild build_cone_at(double x, double y, const JetProvider& jets, const ToolParams& tool,
                        const std::optional<ToolBounds>& bounds, const SolveOptions& opt) {
  return build_cone_at(jets(x, y), tool, bounds, opt);
}

}  // namespace coneflank
