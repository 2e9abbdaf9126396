#include "coneflank/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include "coneflank/error.hpp"

namespace coneflank {

namespace {

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

// JSON has no infinities; they are written as null.
Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::array<double, 4> domain_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::ConfigError, "domain needs 4 numbers");
  std::array<double, 4> d{};
  for (std::size_t i = 0; i < 4; ++i) d[i] = j.at(i).get<double>();
  if (!(d[0] < d[1]) || !(d[2] < d[3])) throw Error(ErrorCode::ConfigError, "empty domain");
  return d;
}

GridSpec grid_from_json(const Json& j) {
  GridSpec g;
  g.nu = j.value("nu", g.nu);
  g.nv = j.value("nv", g.nv);
  if (j.contains("domain")) g.domain = domain_from_json(j.at("domain"));
  if (g.nu < 1 || g.nv < 1) throw Error(ErrorCode::EmptyGrid, "grid needs at least 1x1 nodes");
  return g;
}

Json grid_to_json(const GridSpec& g) {
  return {{"nu", g.nu}, {"nv", g.nv},
          {"domain", Json::array({g.domain[0], g.domain[1], g.domain[2], g.domain[3]})}};
}

// Uniform bucket grid over isotropic (x, y) for nearest-neighbor queries.
class PointGrid {
 public:
  explicit PointGrid(const std::vector<IsotropicSample>& pts) : pts_(pts) {
    if (pts.empty()) return;
    x0_ = x1_ = pts[0].x;
    y0_ = y1_ = pts[0].y;
    for (const auto& p : pts) {
      x0_ = std::min(x0_, p.x), x1_ = std::max(x1_, p.x);
      y0_ = std::min(y0_, p.y), y1_ = std::max(y1_, p.y);
    }
    const double side = std::max({x1_ - x0_, y1_ - y0_, 1e-300});
    n_ = std::clamp(static_cast<int>(std::sqrt(static_cast<double>(pts.size()))), 1, 2048);
    cell_ = side / n_ * (1.0 + 1e-12);
    cells_.resize(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_));
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[index(pts[i].x, pts[i].y)].push_back(i);
  }

  /// Distance from (x, y) to the nearest point; `distinct` ignores points at
  /// distance 0.
  double nearest(double x, double y, bool distinct = false) const {
    double best = std::numeric_limits<double>::infinity();
    if (pts_.empty()) return best;
    const int cx = clampi((x - x0_) / cell_), cy = clampi((y - y0_) / cell_);
    // Rings of cells until the ring's inner distance exceeds the best hit.
    for (int ring = 0; ring <= n_; ++ring) {
      if (ring > 0) {
        const double gap = (ring - 1) * cell_ + std::min({x - (x0_ + cx * cell_), x0_ + (cx + 1) * cell_ - x,
                                                          y - (y0_ + cy * cell_), y0_ + (cy + 1) * cell_ - y});
        if (gap > best) break;
      }
      for (int i = cx - ring; i <= cx + ring; ++i)
        for (int k = cy - ring; k <= cy + ring; ++k) {
          if (std::max(std::abs(i - cx), std::abs(k - cy)) != ring) continue;
          if (i < 0 || k < 0 || i >= n_ || k >= n_) continue;
          for (std::size_t idx : cells_[static_cast<std::size_t>(i) * n_ + static_cast<std::size_t>(k)])
            {
              const double d = std::hypot(pts_[idx].x - x, pts_[idx].y - y);
              if (d > 0.0 || !distinct) best = std::min(best, d);
            }
        }
    }
    return best;
  }

 private:
  int clampi(double v) const { return std::clamp(static_cast<int>(std::floor(v)), 0, n_ - 1); }
  std::size_t index(double x, double y) const {
    return static_cast<std::size_t>(clampi((x - x0_) / cell_)) * n_ + static_cast<std::size_t>(clampi((y - y0_) / cell_));
  }

  const std::vector<IsotropicSample>& pts_;
  double x0_ = 0, x1_ = 0, y0_ = 0, y1_ = 0, cell_ = 1;
  int n_ = 1;
  std::vector<std::vector<std::size_t>> cells_;
};

// Median distance to the nearest other point.
double median_spacing(const std::vector<IsotropicSample>& pts) {
  if (pts.size() < 2) return 0.0;
  const PointGrid grid(pts);
  std::vector<double> nn(pts.size());
  // Coincident images (e.g. mesh vertices sharing a tangent plane) do not count.
  for (std::size_t i = 0; i < pts.size(); ++i) nn[i] = grid.nearest(pts[i].x, pts[i].y, true);
  std::erase_if(nn, [](double d) { return !std::isfinite(d); });
  return nn.empty() ? 0.0 : percentile(nn, 0.5);
}

ConeSpec rotate_cone(ConeSpec c, const Mat3& to_design) {
  c.vertex = to_design * c.vertex;
  c.axis = to_design * c.axis;
  c.contact = to_design * c.contact;
  c.normal = to_design * c.normal;
  return c;
}

double line_angle(const Vec3& a, const Vec3& b) {
  const double t = std::atan2(a.cross(b).norm(), a.dot(b));
  return std::min(t, M_PI - t);
}

}  // namespace

SurfaceSource source_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw Error(ErrorCode::ConfigError, "surface source needs a \"kind\"");
  const std::string kind = j.at("kind").get<std::string>();
  SurfaceSource s;
  if (kind == "isotropic-expr") {
    s.kind = SurfaceSource::Kind::IsotropicExpr;
    s.f = parse_expression(j.at("f").get<std::string>());
  } else if (kind == "parametric") {
    s.kind = SurfaceSource::Kind::Parametric;
    const std::array<std::string, 2> vars{"s", "t"};
    s.parametric.x = parse_expression(j.at("x").get<std::string>(), vars);
    s.parametric.y = parse_expression(j.at("y").get<std::string>(), vars);
    s.parametric.z = parse_expression(j.at("z").get<std::string>(), vars);
    const double o = j.value("orientation", 1.0);
    if (o != 1.0 && o != -1.0) throw Error(ErrorCode::ConfigError, "orientation must be 1 or -1");
    s.parametric.orientation = o;
    if (j.contains("domain")) s.parametric.domain = domain_from_json(j.at("domain"));
  } else if (kind == "cloud") {
    s.kind = SurfaceSource::Kind::Cloud;
    for (const Json& p : j.at("points")) {
      if (!p.is_array() || p.size() != 6)
        throw Error(ErrorCode::ConfigError, "cloud points are [px, py, pz, nx, ny, nz]");
      SurfaceSample smp;
      smp.r = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
      const Vec3 n(p[3].get<double>(), p[4].get<double>(), p[5].get<double>());
      if (!(n.norm() > 0.0)) throw Error(ErrorCode::DegenerateNormal, "zero normal in cloud");
      smp.n = n.normalized();
      s.cloud.push_back(smp);
    }
  } else {
    throw Error(ErrorCode::ConfigError, "unknown surface kind '" + kind + "'");
  }
  return s;
}

Json source_to_json(const SurfaceSource& s) {
  switch (s.kind) {
    case SurfaceSource::Kind::IsotropicExpr:
      return {{"kind", "isotropic-expr"}, {"f", s.f.source}};
    case SurfaceSource::Kind::Parametric: {
      const auto& p = s.parametric;
      return {{"kind", "parametric"},
              {"x", p.x.source},
              {"y", p.y.source},
              {"z", p.z.source},
              {"orientation", p.orientation},
              {"domain", Json::array({p.domain[0], p.domain[1], p.domain[2], p.domain[3]})}};
    }
    case SurfaceSource::Kind::Cloud: {
      Json pts = Json::array();
      for (const auto& c : s.cloud)
        pts.push_back({c.r.x(), c.r.y(), c.r.z(), c.n.x(), c.n.y(), c.n.z()});
      return {{"kind", "cloud"}, {"points", pts}};
    }
  }
  return {};
}

SurfaceSource source_from_argument(const std::string& arg) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(arg, ec)) {
    std::ifstream in(arg);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + arg);
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::IoError, arg + ": " + e.what());
    }
    return source_from_json(j);
  }
  SurfaceSource s;
  s.f = parse_expression(arg);
  return s;
}

std::vector<std::array<double, 2>> grid_nodes(const GridSpec& g) {
  if (g.nu < 1 || g.nv < 1) throw Error(ErrorCode::EmptyGrid, "grid needs at least 1x1 nodes");
  std::vector<std::array<double, 2>> out;
  out.reserve(static_cast<std::size_t>(g.nu) * static_cast<std::size_t>(g.nv));
  const auto lerp = [](double a, double b, int i, int n) {
    return n == 1 ? 0.5 * (a + b) : a + (b - a) * i / (n - 1);
  };
  for (int i = 0; i < g.nu; ++i)
    for (int k = 0; k < g.nv; ++k)
      out.push_back({lerp(g.domain[0], g.domain[1], i, g.nu), lerp(g.domain[2], g.domain[3], k, g.nv)});
  return out;
}

SampleSet sample_parametric(const ParametricSource& src, const GridSpec& grid) {
  SampleSet out;
  out.rows = grid.nu;
  out.cols = grid.nv;
  const auto nodes = grid_nodes(grid);
  for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
    const auto [s, t] = nodes[idx];
    try {
      const Jet4 x = jet_of_expression(src.x, s, t);
      const Jet4 y = jet_of_expression(src.y, s, t);
      const Jet4 z = jet_of_expression(src.z, s, t);
      const Vec3 ps(x.fx, y.fx, z.fx), pt(x.fy, y.fy, z.fy);
      const Vec3 c = ps.cross(pt);
      if (!(c.norm() > 1e-12 * ps.norm() * pt.norm()) || !(c.norm() > 0.0))
        throw Error(ErrorCode::DegenerateNormal, "parallel chart partials");
      out.samples.push_back({Vec3(x.f, y.f, z.f), src.orientation * c.normalized()});
      out.grid_index.push_back(static_cast<int>(idx));
    } catch (const Error& e) {
      out.failures.push_back({s, t, "sample", e.what()});
    }
  }
  return out;
}

std::vector<SurfaceSample> perturb_normals(std::span<const SurfaceSample> samples,
                                           const PerturbSpec& spec) {
  if (!(spec.r >= 0.0)) throw Error(ErrorCode::NegativeNoise, "noise magnitude must be >= 0");
  std::mt19937_64 rng(spec.seed);
  std::vector<SurfaceSample> out(samples.begin(), samples.end());
  for (SurfaceSample& s : out) {
    // 53 high bits to a double in [0, 1).
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const double phi = -M_PI + 2.0 * M_PI * unit;
    if (spec.r == 0.0) continue;
    const Vec3& n = s.n;
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(n(i)) < std::abs(n(k))) k = i;
    const Vec3 e = Vec3::Unit(k);
    const Vec3 d1 = (e - e.dot(n) * n).normalized();
    const Vec3 d2 = n.cross(d1);
    s.n = (n + spec.r * std::cos(phi) * d1 + spec.r * std::sin(phi) * d2).normalized();
  }
  return out;
}

JetProvider expression_jets(const ExprAst& f) {
  auto ast = std::make_shared<ExprAst>(f);
  return [ast](double x, double y) { return jet_of_expression(*ast, x, y); };
}

CloudModel build_cloud_model(std::span<const SurfaceSample> samples, bool align,
                             const ScatterFitConfig& fit) {
  CloudModel m;
  std::vector<SurfaceSample> work(samples.begin(), samples.end());
  if (align) {
    Alignment a = align_to_mean_normal(samples);
    m.rotation = a.rotation;
    work = std::move(a.samples);
  }
  auto iso = std::make_shared<std::vector<IsotropicSample>>();
  for (std::size_t i = 0; i < work.size(); ++i) {
    try {
      iso->push_back(sample_to_isotropic(work[i]));
    } catch (const Error& e) {
      m.dropped.push_back("sample " + std::to_string(i) + ": " + e.what());
    }
  }
  m.iso = *iso;
  m.spacing = median_spacing(*iso);
  m.jets = [iso, fit](double x, double y) { return fit_jet_scattered(*iso, x, y, fit).jet; };
  return m;
}

std::vector<SurfaceSample> envelope_samples(const JetProvider& jets,
                                            std::span<const std::array<double, 2>> pts) {
  std::vector<SurfaceSample> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    const Jet4 j = jets(p[0], p[1]);
    out.push_back({isotropic_to_contact_point(p[0], p[1], j), inverse_stereographic(p[0], p[1])});
  }
  return out;
}

double default_tolerance(SurfaceTest t) {
  switch (t) {
    case SurfaceTest::Developable: return 1e-10;
    case SurfaceTest::Ruled: return 1e-10;
    default: return 1e-6;
  }
}

AnalysisConfig config_from_json(const Json& j) {
  AnalysisConfig c;
  if (!j.contains("source")) throw Error(ErrorCode::ConfigError, "config needs a \"source\"");
  c.source = source_from_json(j.at("source"));
  if (j.contains("test")) c.test = surface_test_from_string(j.at("test").get<std::string>());
  if (j.contains("theta_deg")) c.tool.theta = j.at("theta_deg").get<double>() * M_PI / 180.0;
  if (j.contains("radius")) c.tool.radius = j.at("radius").get<double>();
  if (j.contains("orientation")) {
    const std::string o = j.at("orientation").get<std::string>();
    if (o == "inward") c.tool.orientation = Orientation::Inward;
    else if (o == "outward") c.tool.orientation = Orientation::Outward;
    else throw Error(ErrorCode::ConfigError, "orientation is inward or outward");
  }
  if (j.contains("tol")) c.tol = j.at("tol").get<double>();
  if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
  c.auto_domain = j.value("auto_domain", false);
  if (j.contains("sample_grid")) c.sample_grid = grid_from_json(j.at("sample_grid"));
  if (j.contains("annulus")) {
    const Json& a = j.at("annulus");
    c.annulus = std::array<double, 2>{a.at(0).get<double>(), a.at(1).get<double>()};
  }
  if (j.contains("cone_points"))
    for (const Json& p : j.at("cone_points"))
      c.cone_points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  if (j.contains("bounds"))
    c.bounds = ToolBounds{j.at("bounds").at(0).get<double>(), j.at("bounds").at(1).get<double>()};
  c.millability = j.value("millability", false);
  if (j.contains("perturb"))
    c.perturb = PerturbSpec{j.at("perturb").at("r").get<double>(),
                            j.at("perturb").value("seed", std::uint64_t{0})};
  c.align = j.value("align", true);
  if (j.contains("fit")) {
    const Json& f = j.at("fit");
    c.fit.k = f.value("k", c.fit.k);
    c.fit.bandwidth = f.value("bandwidth", c.fit.bandwidth);
    c.fit.condition_cap = f.value("condition_cap", c.fit.condition_cap);
    c.fit.use_gradients = f.value("use_gradients", c.fit.use_gradients);
    c.fit.degree = f.value("degree", c.fit.degree);
  }
  return c;
}

Json config_to_json(const AnalysisConfig& c) {
  Json j;
  j["source"] = source_to_json(c.source);
  if (c.test) j["test"] = std::string(to_string(*c.test));
  if (c.tool.theta) j["theta_deg"] = *c.tool.theta * 180.0 / M_PI;
  if (c.tool.radius) j["radius"] = *c.tool.radius;
  j["orientation"] = c.tool.orientation == Orientation::Inward ? "inward" : "outward";
  if (c.tol) j["tol"] = *c.tol;
  j["grid"] = grid_to_json(c.grid);
  j["auto_domain"] = c.auto_domain;
  if (c.sample_grid) j["sample_grid"] = grid_to_json(*c.sample_grid);
  if (c.annulus) j["annulus"] = Json::array({(*c.annulus)[0], (*c.annulus)[1]});
  if (!c.cone_points.empty()) {
    Json pts = Json::array();
    for (const auto& p : c.cone_points) pts.push_back({p[0], p[1]});
    j["cone_points"] = pts;
  }
  if (c.bounds) j["bounds"] = Json::array({c.bounds->r_min, c.bounds->r_max});
  j["millability"] = c.millability;
  if (c.perturb) j["perturb"] = {{"r", c.perturb->r}, {"seed", c.perturb->seed}};
  j["align"] = c.align;
  j["fit"] = {{"k", c.fit.k},
              {"bandwidth", c.fit.bandwidth},
              {"condition_cap", c.fit.condition_cap},
              {"use_gradients", c.fit.use_gradients},
              {"degree", c.fit.degree}};
  return j;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Json cone_to_json(const ConeSpec& c) {
  return {{"vertex", vec_json(c.vertex)},
          {"axis", vec_json(c.axis)},
          {"theta_deg", c.theta * 180.0 / M_PI},
          {"contact", vec_json(c.contact)},
          {"normal", vec_json(c.normal)},
          {"side", std::string(to_string(c.side))},
          {"tangency_radius", c.tangency_radius},
          {"distance", c.distance},
          {"feasible", c.feasible},
          {"direction", Json::array({c.u, c.v})},
          {"c3", c.c3},
          {"jacobian", c.jacobian}};
}

Json solve_report_to_json(const SolveReport& r) {
  Json roots = Json::array();
  for (const ContactRoot& c : r.roots)
    roots.push_back({{"u", c.u},
                     {"v", c.v},
                     {"t", num(c.t)},
                     {"c1", c.c1},
                     {"c2", c.c2},
                     {"c3", c.c3},
                     {"jacobian", c.jacobian},
                     {"multiple", c.multiple},
                     {"at_infinity", c.at_infinity},
                     {"order4", c.order4}});
  return {{"roots", roots},
          {"degenerate_leading", r.degenerate_leading},
          {"identically_zero", r.identically_zero},
          {"family_samples", r.family.size()},
          {"coefficients", r.coefficients}};
}

Json trace_to_json(const CurveTrace& t) {
  Json pts = Json::array();
  for (const auto& p : t.points) pts.push_back({p[0], p[1]});
  return {{"points", pts},
          {"f", t.f},
          {"step", t.step},
          {"straightness", t.straightness},
          {"tangent_variation", t.tangent_variation},
          {"f_linearity", t.f_linearity},
          {"circularity", t.circularity},
          {"center", Json::array({t.center[0], t.center[1]})},
          {"radius", t.radius},
          {"f_consistency", t.f_consistency},
          {"max_step_deviation", t.max_step_deviation}};
}

SurfaceModel build_surface_model(const AnalysisConfig& config) {
  SurfaceModel sm;
  if (config.source.kind == SurfaceSource::Kind::IsotropicExpr) {
    if (config.perturb) throw Error(ErrorCode::ConfigError, "perturbation needs a sampled source");
    sm.jets = expression_jets(config.source.f);
    return sm;
  }
  if (config.source.kind == SurfaceSource::Kind::Parametric) {
    const GridSpec g = config.sample_grid.value_or(GridSpec{60, 60, config.source.parametric.domain});
    SampleSet set = sample_parametric(config.source.parametric, g);
    sm.sample_failures = std::move(set.failures);
    sm.samples = std::move(set.samples);
  } else {
    sm.samples = config.source.cloud;
  }
  if (config.perturb) sm.samples = perturb_normals(sm.samples, *config.perturb);
  sm.cloud = build_cloud_model(sm.samples, config.align, config.fit);
  sm.jets = sm.cloud->jets;
  sm.to_design = sm.cloud->rotation.transpose();
  return sm;
}

std::vector<std::array<double, 2>> analysis_nodes(const AnalysisConfig& config, const SurfaceModel& sm) {
  std::optional<PointGrid> cloud_grid;
  if (sm.cloud) cloud_grid.emplace(sm.cloud->iso);
  GridSpec grid = config.grid;
  if (config.auto_domain && sm.cloud && !sm.cloud->iso.empty()) {
    auto& d = grid.domain;
    d = {sm.cloud->iso[0].x, sm.cloud->iso[0].x, sm.cloud->iso[0].y, sm.cloud->iso[0].y};
    for (const auto& q : sm.cloud->iso) {
      d[0] = std::min(d[0], q.x), d[1] = std::max(d[1], q.x);
      d[2] = std::min(d[2], q.y), d[3] = std::max(d[3], q.y);
    }
  }
  std::vector<std::array<double, 2>> nodes;
  for (const auto& p : grid_nodes(grid)) {
    const double r2 = p[0] * p[0] + p[1] * p[1];
    if (config.annulus && (r2 < (*config.annulus)[0] || r2 > (*config.annulus)[1])) continue;
    // Sampled sources: skip nodes outside the sampled region.
    if (cloud_grid && cloud_grid->nearest(p[0], p[1]) > 3.0 * sm.cloud->spacing) continue;
    nodes.push_back(p);
  }
  return nodes;
}

Report run_analysis(const AnalysisConfig& config) {
  Report rep;
  Json& body = rep.body;
  const Json cfg = config_to_json(config);
  body["schema"] = kReportSchema;
  body["version"] = kVersion;
  body["config"] = cfg;
  body["input_hash"] = hex64(fnv1a64(cfg.dump()));
  body["errors"] = Json::array();
  const auto fail = [&](const std::string& stage, const std::string& msg) {
    body["errors"].push_back({{"stage", stage}, {"message", msg}});
    rep.exit_code = 1;
    rep.verdict = "error";
    body["verdict"] = rep.verdict;
    return rep;
  };

  // Stage: source -> jets.
  SurfaceModel sm;
  try {
    sm = build_surface_model(config);
  } catch (const Error& e) {
    return fail("source", e.what());
  }
  for (const NodeFailure& f : sm.sample_failures)
    body["errors"].push_back({{"stage", "sample"}, {"s", f.s}, {"t", f.t}, {"message", f.error}});
  if (sm.cloud) {
    for (const std::string& d : sm.cloud->dropped)
      body["errors"].push_back({{"stage", "isotropic"}, {"message", d}});
    body["samples"] = {{"count", sm.cloud->iso.size()}, {"spacing", sm.cloud->spacing}};
  }
  const JetProvider& jets = sm.jets;
  const Mat3& to_design = sm.to_design;

  bool have_verdict = false, holds = true;
  std::string verdict;

  // Stage: classification over the isotropic grid.
  if (config.test) {
    try {
      const auto nodes = analysis_nodes(config, sm);
      const double tol = config.tol.value_or(default_tolerance(*config.test));
      const FieldSummary s = classify_field(jets, nodes, *config.test, config.tool, tol);
      Json pts = Json::array();
      std::map<std::string, int> mill;
      for (const FieldNode& n : s.nodes) {
        Json rec = {{"x", n.x}, {"y", n.y}, {"ok", n.ok}, {"residual", num(n.residual)}};
        if (n.verdict) {
          rec["holds"] = n.verdict->holds;
          if (n.verdict->witness)
            rec["witness"] = Json::array({n.verdict->witness->u, n.verdict->witness->v});
        }
        if (!n.error.empty()) rec["error"] = n.error;
        if (config.millability && n.ok) {
          try {
            const std::string m(to_string(millability_check(jets(n.x, n.y))));
            rec["millability"] = m;
            ++mill[m];
          } catch (const Error& e) {
            rec["millability_error"] = e.what();
          }
        }
        pts.push_back(rec);
      }
      body["points"] = pts;
      const bool necessary = *config.test == SurfaceTest::CylinderEnvelope ||
                             *config.test == SurfaceTest::Channel || *config.test == SurfaceTest::Pipe;
      body["summary"] = {{"test", std::string(to_string(*config.test))},
                         {"tol", tol},
                         {"nodes", s.nodes.size()},
                         {"failures", s.failures},
                         {"p50", num(s.p50)},
                         {"p95", num(s.p95)},
                         {"max", num(s.max)},
                         {"holds", s.holds},
                         {"necessary_only", necessary}};
      if (config.millability) {
        std::string top;
        int best = -1;
        for (const auto& [k, v] : mill)
          if (v > best) best = v, top = k;
        body["millability"] = {{"flag", top}, {"counts", mill}};
      }
      have_verdict = true;
      holds = s.holds;
      verdict = std::string(s.holds ? "holds" : "fails") + " (" + std::string(to_string(*config.test)) + ")";
    } catch (const Error& e) {
      return fail(e.code() == ErrorCode::ConfigError ? "config" : "classify", e.what());
    }
  }

  // Stage: cone reconstruction at requested points.
  if (!config.cone_points.empty()) {
    if (!config.tool.theta) return fail("config", "cone reconstruction needs --theta");
    Json cones = Json::array();
    int produced = 0;
    for (const auto& p : config.cone_points) {
      Json rec = {{"x", p[0]}, {"y", p[1]}};
      try {
        const ConeBuild b = build_cone_at(p[0], p[1], jets, config.tool, config.bounds);
        Json list = Json::array();
        for (const ConeSpec& c : b.cones) list.push_back(cone_to_json(rotate_cone(c, to_design)));
        produced += static_cast<int>(b.cones.size());
        rec["cones"] = list;
        Json dropped = Json::array();
        for (const DroppedRoot& d : b.dropped)
          dropped.push_back({{"direction", Json::array({d.u, d.v})}, {"reason", d.reason}});
        rec["dropped"] = dropped;
        if (!b.reason.empty()) rec["reason"] = b.reason;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::InvalidBounds)
          return fail("config", e.what());
        rec["error"] = e.what();
        body["errors"].push_back({{"stage", "cones"}, {"message", e.what()}});
      }
      cones.push_back(rec);
    }
    body["cones"] = cones;
    if (!have_verdict) {
      have_verdict = true;
      holds = produced > 0;
      verdict = produced > 0 ? "holds (cones)" : "fails (cones)";
    }
  }

  if (!have_verdict) return fail("config", "nothing to do: give a test or cone points");
  rep.verdict = verdict;
  rep.exit_code = holds ? 0 : 2;
  body["verdict"] = verdict;
  return rep;
}

std::string report_to_csv(const Report& r) {
  std::ostringstream out;
  out.precision(17);
  const Json& b = r.body;
  const std::string test = b.contains("summary") ? b["summary"]["test"].get<std::string>() : "";
  out << "x,y,test,ok,holds,residual,error\n";
  if (b.contains("points")) {
    for (const Json& p : b["points"]) {
      out << p["x"].get<double>() << ',' << p["y"].get<double>() << ',' << test << ','
          << (p["ok"].get<bool>() ? 1 : 0) << ',' << (p.value("holds", false) ? 1 : 0) << ',';
      if (p["residual"].is_number()) out << p["residual"].get<double>();
      out << ',';
      if (p.contains("error")) {
        std::string e = p["error"].get<std::string>();
        std::replace(e.begin(), e.end(), ',', ';');
        out << e;
      }
      out << '\n';
    }
  }
  return out.str();
}

std::vector<StabilityLevel> stability_experiment(
    const ExprAst& f, const std::function<std::vector<Direction>(double, double)>& generators,
    const StabilityConfig& cfg) {
  if (cfg.stencil < 4) throw Error(ErrorCode::ConfigError, "stencil needs at least 4 samples per side");
  const JetProvider exact = expression_jets(f);
  ToolParams tool;
  tool.theta = cfg.theta;
  ScatterFitConfig fit;
  fit.k = cfg.stencil * cfg.stencil;
  fit.bandwidth = 2.0;
  fit.degree = cfg.degree;
  fit.use_gradients = cfg.use_gradients;

  std::vector<StabilityLevel> out;
  for (double r : cfg.noise) {
    StabilityLevel level;
    level.r = r;
    std::vector<double> errors;
    for (std::size_t i = 0; i < cfg.points.size(); ++i) {
      const auto [px, py] = cfg.points[i];
      std::vector<std::array<double, 2>> local;
      const double half = 0.5 * (cfg.stencil - 1);
      for (int a = 0; a < cfg.stencil; ++a)
        for (int b = 0; b < cfg.stencil; ++b)
          local.push_back({px + (a - half) * cfg.spacing, py + (b - half) * cfg.spacing});
      try {
        // Same draws at every noise level, so only the magnitude changes.
        const auto samples = perturb_normals(envelope_samples(exact, local), {r, cfg.seed + i});
        std::vector<IsotropicSample> iso;
        for (const auto& s : samples) iso.push_back(sample_to_isotropic(s));
        const Jet4 j = fit_jet_scattered(iso, px, py, fit).jet;
        const ConeBuild b = build_cone_at(j, tool);
        level.cone_counts.push_back(static_cast<int>(b.cones.size()));
        const Jet4 je = exact(px, py);
        const Vec3 re = isotropic_to_contact_point(px, py, je);
        for (const Direction& g : generators(px, py)) {
          const Vec3 ruling = re - cone_vertex(make_conic(je, g.u, g.v, cfg.theta));
          double best = M_PI / 2;
          for (const ConeSpec& c : b.cones)
            best = std::min(best, line_angle(ruling, c.contact - c.vertex));
          errors.push_back(best);
        }
      } catch (const Error&) {
        ++level.failures;
        level.cone_counts.push_back(0);
      }
    }
    if (!errors.empty()) {
      level.median_error = percentile(errors, 0.5);
      level.max_error = *std::max_element(errors.begin(), errors.end());
    }
    out.push_back(level);
  }
  return out;
}

ObjWriter::ObjWriter(std::ostream& out) : out_(out) { out_.precision(17); }

void ObjWriter::cone_frustum(const ConeSpec& c, double d0, double d1, int sides, double phase) {
  const Vec3 a = c.axis.normalized();
  const Vec3 b1 = a.unitOrthogonal(), b2 = a.cross(b1);
  const double ct = std::cos(c.theta), st = std::sin(c.theta);
  // Normals agree with the surface normal on the contact ruling.
  const Vec3 radial = (c.contact - c.vertex) - (c.contact - c.vertex).dot(a) * a;
  double sign = 1.0;
  if (radial.norm() > 0.0 && (st * a - ct * radial.normalized()).dot(c.normal) < 0.0) sign = -1.0;
  const int base = vertices_, nbase = normals_;
  for (double d : {d0, d1})
    for (int k = 0; k < sides; ++k) {
      const double phi = phase + 2.0 * M_PI * k / sides;
      const Vec3 e = std::cos(phi) * b1 + std::sin(phi) * b2;
      const Vec3 p = c.vertex + d * (ct * a + st * e);
      const Vec3 n = sign * (st * a - ct * e).normalized();
      out_ << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
      out_ << "vn " << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
    }
  vertices_ += 2 * sides;
  normals_ += 2 * sides;
  for (int k = 0; k < sides; ++k) {
    const int k1 = (k + 1) % sides;
    const int q[4] = {k, k1, sides + k1, sides + k};
    out_ << 'f';
    for (int v : q) out_ << ' ' << base + v + 1 << "//" << nbase + v + 1;
    out_ << '\n';
  }
}

void ObjWriter::polyline(std::span<const Vec3> pts) {
  if (pts.size() < 2) return;
  for (const Vec3& p : pts) out_ << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  out_ << 'l';
  for (std::size_t i = 0; i < pts.size(); ++i) out_ << ' ' << vertices_ + static_cast<int>(i) + 1;
  out_ << '\n';
  vertices_ += static_cast<int>(pts.size());
}

void ObjWriter::quad_grid(std::span<const std::optional<Vec3>> pts, int rows, int cols) {
  std::vector<int> index(pts.size(), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!pts[i]) continue;
    const Vec3& p = *pts[i];
    out_ << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    index[i] = ++vertices_;
  }
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) {
      const std::size_t q[4] = {static_cast<std::size_t>(r * cols + c),
                                static_cast<std::size_t>(r * cols + c + 1),
                                static_cast<std::size_t>((r + 1) * cols + c + 1),
                                static_cast<std::size_t>((r + 1) * cols + c)};
      if (!index[q[0]] || !index[q[1]] || !index[q[2]] || !index[q[3]]) continue;
      out_ << "f " << index[q[0]] << ' ' << index[q[1]] << ' ' << index[q[2]] << ' ' << index[q[3]]
           << '\n';
    }
}

std::vector<SurfaceSample> read_obj_cloud(std::istream& in) {
  std::vector<Vec3> v, vn;
  std::map<int, int> normal_of;  // vertex index -> normal index, from face corners
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v" || tag == "vn") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw Error(ErrorCode::IoError, "malformed OBJ line: " + line);
      (tag == "v" ? v : vn).emplace_back(x, y, z);
    } else if (tag == "f") {
      std::string corner;
      while (ls >> corner) {
        const auto p1 = corner.find('/');
        if (p1 == std::string::npos) continue;
        const auto p2 = corner.find('/', p1 + 1);
        if (p2 == std::string::npos) continue;
        normal_of[std::stoi(corner.substr(0, p1))] = std::stoi(corner.substr(p2 + 1));
      }
    }
  }
  std::vector<SurfaceSample> out;
  for (const auto& [vi, ni] : normal_of) {
    if (vi < 1 || vi > static_cast<int>(v.size()) || ni < 1 || ni > static_cast<int>(vn.size()))
      throw Error(ErrorCode::IoError, "OBJ face index out of range");
    out.push_back({v[static_cast<std::size_t>(vi - 1)], vn[static_cast<std::size_t>(ni - 1)].normalized()});
  }
  return out;
}

}  // namespace coneflank
