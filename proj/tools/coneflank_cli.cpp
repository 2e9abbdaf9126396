#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coneflank/error.hpp"
#include "coneflank/pipeline.hpp"

using namespace coneflank;

namespace {

constexpr int kExitHolds = 0;
constexpr int kExitError = 1;
constexpr int kExitFails = 2;

struct Options {
  std::string surface;
  std::string config;
  std::optional<double> theta_deg;
  std::optional<double> radius;
  std::string orientation = "inward";
  std::vector<double> bounds;
  std::string grid;
  std::vector<double> domain;
  std::string sample_grid;
  std::vector<double> annulus;
  std::optional<double> tol;
  std::uint64_t seed = 0;
  std::optional<double> noise;
  std::string format = "json";
  std::string obj;
  std::string output;
  std::string test;
  bool millability = false;
  bool no_align = false;
  bool no_gradients = false;
  std::optional<int> fit_degree;
  std::optional<int> fit_k;
  std::vector<std::vector<double>> at;
  std::string kind = "circle";
  std::vector<double> direction;
  double step = 1e-3;
  double length = 0.5;
};

std::array<int, 2> parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw Error(ErrorCode::ConfigError, "grid must look like NxM");
  try {
    std::size_t a = 0, b = 0;
    const int n = std::stoi(text.substr(0, x), &a);
    const int m = std::stoi(text.substr(x + 1), &b);
    if (a != x || b != text.size() - x - 1) throw std::invalid_argument(text);
    if (n < 1 || m < 1) throw Error(ErrorCode::EmptyGrid, "grid needs at least 1x1 nodes");
    return {n, m};
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::ConfigError, "grid must look like NxM");
  }
}

std::array<double, 4> as_domain(const std::vector<double>& v) {
  if (v.size() != 4 || !(v[0] < v[1]) || !(v[2] < v[3]))
    throw Error(ErrorCode::ConfigError, "domain must be x0,x1,y0,y1 with x0 < x1 and y0 < y1");
  return {v[0], v[1], v[2], v[3]};
}

AnalysisConfig make_config(const Options& o) {
  AnalysisConfig c;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + o.config);
    try {
      c = config_from_json(Json::parse(in));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ConfigError, o.config + ": " + e.what());
    }
  }
  if (!o.surface.empty()) c.source = source_from_argument(o.surface);
  else if (o.config.empty()) throw Error(ErrorCode::ConfigError, "--surface is required");
  if (o.theta_deg) c.tool.theta = *o.theta_deg * M_PI / 180.0;
  if (o.radius) c.tool.radius = *o.radius;
  if (o.orientation == "outward") c.tool.orientation = Orientation::Outward;
  else if (o.orientation == "inward") c.tool.orientation = Orientation::Inward;
  else throw Error(ErrorCode::ConfigError, "--orientation is inward or outward");
  if (!o.bounds.empty()) {
    if (o.bounds.size() != 2) throw Error(ErrorCode::ConfigError, "--bounds is rmin,rmax");
    c.bounds = ToolBounds{o.bounds[0], o.bounds[1]};
  }
  if (!o.grid.empty()) {
    const auto g = parse_grid(o.grid);
    c.grid.nu = g[0];
    c.grid.nv = g[1];
  }
  if (!o.domain.empty()) c.grid.domain = as_domain(o.domain);
  else if (c.source.kind != SurfaceSource::Kind::IsotropicExpr && o.config.empty()) c.auto_domain = true;
  if (!o.sample_grid.empty()) {
    const auto g = parse_grid(o.sample_grid);
    const auto dom = c.source.kind == SurfaceSource::Kind::Parametric ? c.source.parametric.domain
                                                                      : c.grid.domain;
    c.sample_grid = GridSpec{g[0], g[1], dom};
  }
  if (!o.annulus.empty()) {
    if (o.annulus.size() != 2) throw Error(ErrorCode::ConfigError, "--annulus is r0,r1 (squared radii)");
    c.annulus = std::array<double, 2>{o.annulus[0], o.annulus[1]};
  }
  if (o.tol) c.tol = *o.tol;
  if (o.noise) c.perturb = PerturbSpec{*o.noise, o.seed};
  if (!o.test.empty()) c.test = surface_test_from_string(o.test);
  if (o.millability) c.millability = true;
  if (o.no_align) c.align = false;
  if (o.no_gradients) c.fit.use_gradients = false;
  if (o.fit_degree) c.fit.degree = *o.fit_degree;
  if (o.fit_k) c.fit.k = *o.fit_k;
  for (const auto& p : o.at) {
    if (p.size() != 2) throw Error(ErrorCode::ConfigError, "--at is x,y");
    c.cone_points.push_back({p[0], p[1]});
  }
  return c;
}

void emit(const Options& o, const std::string& text) {
  if (o.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(o.output);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + o.output);
  out << text;
}

std::string csv_join(std::initializer_list<double> v) {
  std::ostringstream s;
  s.precision(17);
  bool first = true;
  for (double d : v) {
    if (!first) s << ',';
    s << d;
    first = false;
  }
  return s.str();
}

Vec3 vec(const Json& j) { return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()}; }

std::ofstream open_obj(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

// Frustum extent: the tool bounds when given, else half to 1.5 times the
// contact distance.
std::array<double, 2> frustum_range(const ConeSpec& c, const std::optional<ToolBounds>& b) {
  if (b) return {b->r_min, b->r_max};
  return {0.5 * c.distance, 1.5 * c.distance};
}

ConeSpec cone_from_json(const Json& j) {
  ConeSpec c;
  c.vertex = vec(j["vertex"]);
  c.axis = vec(j["axis"]);
  c.theta = j["theta_deg"].get<double>() * M_PI / 180.0;
  c.contact = vec(j["contact"]);
  c.normal = vec(j["normal"]);
  c.distance = j["distance"].get<double>();
  return c;
}

int cmd_classify(const Options& o) {
  AnalysisConfig c = make_config(o);
  if (!c.test) throw Error(ErrorCode::ConfigError, "--test is required");
  const Report r = run_analysis(c);
  emit(o, o.format == "csv" ? report_to_csv(r) : r.body.dump(2) + "\n");
  return r.exit_code;
}

int cmd_solve(const Options& o) {
  const AnalysisConfig c = make_config(o);
  if (!c.tool.theta) throw Error(ErrorCode::ConfigError, "--theta is required");
  if (c.cone_points.empty()) throw Error(ErrorCode::ConfigError, "--at is required");
  const SurfaceModel sm = build_surface_model(c);
  Json out = Json::array();
  std::ostringstream csv;
  csv.precision(17);
  csv << "x,y,u,v,t,c1,c2,c3,jacobian,multiple,at_infinity,order4\n";
  bool any = false;
  for (const auto& p : c.cone_points) {
    const SolveReport rep = solve_hyperosculating(sm.jets(p[0], p[1]), *c.tool.theta);
    Json rec = solve_report_to_json(rep);
    rec["x"] = p[0];
    rec["y"] = p[1];
    out.push_back(rec);
    for (const ContactRoot& r : rep.roots) {
      any = any || r.order4;
      csv << csv_join({p[0], p[1], r.u, r.v, r.t, r.c1, r.c2, r.c3, r.jacobian}) << ','
          << r.multiple << ',' << r.at_infinity << ',' << r.order4 << '\n';
    }
  }
  emit(o, o.format == "csv" ? csv.str() : out.dump(2) + "\n");
  return any ? kExitHolds : kExitFails;
}

int cmd_cones(const Options& o) {
  AnalysisConfig c = make_config(o);
  if (c.cone_points.empty()) throw Error(ErrorCode::ConfigError, "--at is required");
  const Report r = run_analysis(c);
  if (o.format == "csv") {
    std::ostringstream csv;
    csv.precision(17);
    csv << "x,y,vertex_x,vertex_y,vertex_z,axis_x,axis_y,axis_z,theta_deg,contact_x,contact_y,contact_z,"
           "side,tangency_radius,distance,feasible,u,v,c3\n";
    for (const Json& rec : r.body.value("cones", Json::array()))
      for (const Json& k : rec.value("cones", Json::array())) {
        const Vec3 m = vec(k["vertex"]), a = vec(k["axis"]), q = vec(k["contact"]);
        csv << csv_join({rec["x"], rec["y"], m.x(), m.y(), m.z(), a.x(), a.y(), a.z(), k["theta_deg"],
                         q.x(), q.y(), q.z()})
            << ',' << k["side"].get<std::string>() << ','
            << csv_join({k["tangency_radius"], k["distance"]}) << ',' << k["feasible"].get<bool>() << ','
            << csv_join({k["direction"][0], k["direction"][1], k["c3"]}) << '\n';
      }
    emit(o, csv.str());
  } else {
    emit(o, r.body.dump(2) + "\n");
  }
  if (!o.obj.empty() && r.body.contains("cones")) {
    std::ofstream f = open_obj(o.obj);
    ObjWriter w(f);
    for (const Json& rec : r.body["cones"])
      for (const Json& k : rec.value("cones", Json::array())) {
        const ConeSpec cs = cone_from_json(k);
        const auto range = frustum_range(cs, c.bounds);
        w.cone_frustum(cs, range[0], range[1]);
      }
  }
  return r.exit_code;
}

int cmd_trace(const Options& o) {
  const AnalysisConfig c = make_config(o);
  if (c.cone_points.size() != 1) throw Error(ErrorCode::ConfigError, "trace needs exactly one --at seed");
  if (o.direction.size() != 2) throw Error(ErrorCode::ConfigError, "--direction u,v is required");
  const SurfaceModel sm = build_surface_model(c);
  const Direction d{o.direction[0], o.direction[1]};
  CurveTrace t;
  if (o.kind == "developable") {
    t = integrate_ruling_developable(sm.jets, c.cone_points[0], {o.step, o.length});
  } else if (o.kind == "ruled") {
    t = integrate_ruling_ruled(sm.jets, c.cone_points[0], d, {o.step, o.length});
  } else if (o.kind == "circle") {
    if (!c.tool.theta) throw Error(ErrorCode::ConfigError, "circle traces need --theta");
    CircleTraceOptions opt;
    opt.step = o.step;
    opt.length = o.length;
    t = integrate_isotropic_circle(sm.jets, *c.tool.theta, c.cone_points[0], d, opt);
  } else {
    throw Error(ErrorCode::ConfigError, "--kind is developable, ruled or circle");
  }
  if (o.format == "csv") {
    std::ostringstream csv;
    csv.precision(17);
    csv << "x,y,f\n";
    for (std::size_t i = 0; i < t.points.size(); ++i)
      csv << csv_join({t.points[i][0], t.points[i][1], t.f[i]}) << '\n';
    emit(o, csv.str());
  } else {
    Json out = trace_to_json(t);
    out["kind"] = o.kind;
    emit(o, out.dump(2) + "\n");
  }
  if (!o.obj.empty()) {
    // Design-space curve: contact points of the traced planes.
    std::vector<Vec3> pts;
    for (const auto& p : t.points)
      pts.push_back(sm.to_design * isotropic_to_contact_point(p[0], p[1], sm.jets(p[0], p[1])));
    std::ofstream f = open_obj(o.obj);
    ObjWriter w(f);
    w.polyline(pts);
  }
  return kExitHolds;
}

int cmd_perturb(const Options& o) {
  AnalysisConfig c = make_config(o);
  if (!o.noise) throw Error(ErrorCode::ConfigError, "--noise is required");
  std::vector<SurfaceSample> samples;
  switch (c.source.kind) {
    case SurfaceSource::Kind::IsotropicExpr: {
      // Exact envelope samples on the isotropic grid.
      const auto nodes = grid_nodes(c.grid);
      samples = envelope_samples(expression_jets(c.source.f), nodes);
      break;
    }
    case SurfaceSource::Kind::Parametric:
      samples = sample_parametric(c.source.parametric,
                                  c.sample_grid.value_or(GridSpec{c.grid.nu, c.grid.nv, c.source.parametric.domain}))
                    .samples;
      break;
    case SurfaceSource::Kind::Cloud:
      samples = c.source.cloud;
      break;
  }
  samples = perturb_normals(samples, {*o.noise, o.seed});
  if (o.format == "csv") {
    std::ostringstream csv;
    csv.precision(17);
    csv << "px,py,pz,nx,ny,nz\n";
    for (const auto& s : samples)
      csv << csv_join({s.r.x(), s.r.y(), s.r.z(), s.n.x(), s.n.y(), s.n.z()}) << '\n';
    emit(o, csv.str());
  } else {
    SurfaceSource out;
    out.kind = SurfaceSource::Kind::Cloud;
    out.cloud = std::move(samples);
    emit(o, source_to_json(out).dump() + "\n");
  }
  return kExitHolds;
}

int cmd_export(const Options& o) {
  AnalysisConfig c = make_config(o);
  if (o.obj.empty()) throw Error(ErrorCode::ConfigError, "--obj is required");
  std::ofstream f = open_obj(o.obj);
  ObjWriter w(f);
  Json summary = {{"obj", o.obj}};
  // Surface as a quad grid in design space.
  std::vector<std::optional<Vec3>> grid;
  if (c.source.kind == SurfaceSource::Kind::Parametric) {
    const GridSpec g{c.grid.nu, c.grid.nv, o.domain.empty() ? c.source.parametric.domain : c.grid.domain};
    for (const auto& p : grid_nodes(g)) {
      try {
        grid.emplace_back(Vec3(evaluate(c.source.parametric.x, p[0], p[1]),
                               evaluate(c.source.parametric.y, p[0], p[1]),
                               evaluate(c.source.parametric.z, p[0], p[1])));
      } catch (const Error&) {
        grid.emplace_back(std::nullopt);
      }
    }
  } else if (c.source.kind == SurfaceSource::Kind::IsotropicExpr) {
    const JetProvider jets = expression_jets(c.source.f);
    for (const auto& p : grid_nodes(c.grid)) {
      try {
        grid.emplace_back(isotropic_to_contact_point(p[0], p[1], jets(p[0], p[1])));
      } catch (const Error&) {
        grid.emplace_back(std::nullopt);
      }
    }
  }
  if (!grid.empty()) w.quad_grid(grid, c.grid.nu, c.grid.nv);
  summary["surface_nodes"] = grid.size();

  // Cones at the requested points, with the characteristic curve of each.
  int cones = 0, curves = 0;
  if (!c.cone_points.empty()) {
    if (!c.tool.theta) throw Error(ErrorCode::ConfigError, "cones need --theta");
    const SurfaceModel sm = build_surface_model(c);
    for (const auto& p : c.cone_points) {
      const ConeBuild b = build_cone_at(p[0], p[1], sm.jets, c.tool, c.bounds);
      for (const ConeSpec& k : b.cones) {
        ConeSpec d = k;
        d.vertex = sm.to_design * k.vertex;
        d.axis = sm.to_design * k.axis;
        d.contact = sm.to_design * k.contact;
        d.normal = sm.to_design * k.normal;
        const auto range = frustum_range(d, c.bounds);
        w.cone_frustum(d, range[0], range[1]);
        ++cones;
        CircleTraceOptions opt;
        opt.step = o.step;
        opt.length = o.length;
        try {
          const CurveTrace t = integrate_isotropic_circle(sm.jets, *c.tool.theta, p, {k.u, k.v}, opt);
          std::vector<Vec3> pts;
          for (const auto& q : t.points)
            pts.push_back(sm.to_design * isotropic_to_contact_point(q[0], q[1], sm.jets(q[0], q[1])));
          w.polyline(pts);
          ++curves;
        } catch (const Error&) {
          // Multiple or lost roots end no curve; the cone is still written.
        }
      }
    }
  }
  summary["cones"] = cones;
  summary["curves"] = curves;
  emit(o, summary.dump(2) + "\n");
  return kExitHolds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cone-envelope detection and hyperosculating cone reconstruction"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options o;

  const auto common = [&o](CLI::App* sub) {
    sub->add_option("--surface", o.surface, "Isotropic expression f(x,y) or a JSON source file");
    sub->add_option("--config", o.config, "JSON analysis config; flags override its fields");
    sub->add_option("--theta", o.theta_deg, "Cone opening angle in degrees");
    sub->add_option("--radius", o.radius, "Cylinder or pipe radius");
    sub->add_option("--orientation", o.orientation, "Tool orientation: inward or outward");
    sub->add_option("--bounds", o.bounds, "Tool length bounds rmin,rmax")->delimiter(',');
    sub->add_option("--grid", o.grid, "Grid nodes NxM");
    sub->add_option("--domain", o.domain, "Grid domain x0,x1,y0,y1")->delimiter(',');
    sub->add_option("--sample-grid", o.sample_grid, "Parametric sampling grid NxM");
    sub->add_option("--tol", o.tol, "Test tolerance");
    sub->add_option("--seed", o.seed, "Perturbation seed (mt19937_64)");
    sub->add_option("--noise", o.noise, "Normal perturbation magnitude r >= 0");
    sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--obj", o.obj, "OBJ output path");
    sub->add_option("-o,--output", o.output, "Write the report here instead of stdout");
    sub->add_flag("--no-align", o.no_align, "Keep sampled data in its own frame");
    sub->add_flag("--no-gradients", o.no_gradients, "Fit sampled jets from plane values only");
    sub->add_option("--fit-degree", o.fit_degree, "Local fit degree, 4 to 8");
    sub->add_option("--fit-k", o.fit_k, "Neighbors per local fit");
  };
  const auto points = [&o](CLI::App* sub) {
    sub->add_option("--at", o.at, "Isotropic point x,y (repeatable)")->delimiter(',')->expected(2)
        ->allow_extra_args(false);
  };

  auto* classify = app.add_subcommand("classify", "Run a surface test over an isotropic grid");
  common(classify);
  classify->add_option("--test", o.test,
                       "developable, ruled, cone-envelope, cylinder-envelope, channel or pipe");
  classify->add_option("--annulus", o.annulus, "Keep nodes with r0 <= x^2+y^2 <= r1")->delimiter(',');
  classify->add_flag("--millability", o.millability, "Add the millability flag");
  points(classify);

  auto* solve = app.add_subcommand("solve", "Hyperosculating directions at isotropic points");
  common(solve);
  points(solve);

  auto* cones = app.add_subcommand("cones", "Hyperosculating cones at isotropic points");
  common(cones);
  points(cones);

  auto* trace = app.add_subcommand("trace", "Integral curve from a seed point");
  common(trace);
  points(trace);
  trace->add_option("--kind", o.kind, "developable, ruled or circle");
  trace->add_option("--direction", o.direction, "Root or branch direction u,v")->delimiter(',');
  trace->add_option("--step", o.step, "Arc-length step");
  trace->add_option("--length", o.length, "Arc length to trace");

  auto* perturb = app.add_subcommand("perturb", "Perturb sample normals; prints a cloud source");
  common(perturb);

  auto* exp = app.add_subcommand("export", "OBJ of the surface, cones and characteristic curves");
  common(exp);
  points(exp);
  exp->add_option("--step", o.step, "Arc-length step of the characteristic traces");
  exp->add_option("--length", o.length, "Arc length of the characteristic traces");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitHolds : kExitError;
  }

  try {
    if (*classify) return cmd_classify(o);
    if (*solve) return cmd_solve(o);
    if (*cones) return cmd_cones(o);
    if (*trace) return cmd_trace(o);
    if (*perturb) return cmd_perturb(o);
    if (*exp) return cmd_export(o);
  } catch (const Error& e) {
    Json err = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << Json({{"error", "internal"}, {"message", e.what()}}).dump() << "\n";
    return kExitError;
  }
  return kExitError;
}
