#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "coneflank/error.hpp"
#include "coneflank/pipeline.hpp"

namespace py = pybind11;
using namespace coneflank;

namespace {

// Report records cross the boundary as plain Python objects via JSON text.
py::object to_py(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Json from_py(const py::object& o) {
  return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

ToolParams tool_params(std::optional<double> theta_deg, std::optional<double> radius,
                       const std::string& orientation) {
  ToolParams t;
  if (theta_deg) t.theta = *theta_deg * M_PI / 180.0;
  t.radius = radius;
  if (orientation == "outward") t.orientation = Orientation::Outward;
  else if (orientation != "inward") throw Error(ErrorCode::ConfigError, "orientation is inward or outward");
  return t;
}

Json jet_json(const Jet4& j) {
  Json d = Json::object();
  for (int n = 0; n <= 4; ++n)
    for (int i = n; i >= 0; --i) {
      std::string key = "f";
      key.append(static_cast<std::size_t>(i), 'x');
      key.append(static_cast<std::size_t>(n - i), 'y');
      d[key] = j.partial(i, n - i);
    }
  return d;
}

std::vector<SurfaceSample> samples_from(const std::vector<std::array<double, 6>>& pts) {
  std::vector<SurfaceSample> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back({Vec3(p[0], p[1], p[2]), Vec3(p[3], p[4], p[5])});
  return out;
}

}  // namespace

PYBIND11_MODULE(_coneflank, m) {
  m.doc() = "Cone-envelope detection and hyperosculating cone reconstruction";
  m.attr("__version__") = kVersion;

  // Messages start with the error code name, e.g. "RootLost: ...".
  py::register_exception<Error>(m, "ConeflankError", PyExc_RuntimeError);

  m.def(
      "jet",
      [](const std::string& f, double x, double y) { return to_py(jet_json(jet_of_expression(parse_expression(f), x, y))); },
      py::arg("f"), py::arg("x"), py::arg("y"), "Exact 4-jet of f(x, y) as a dict of partials.");

  m.def(
      "plane_to_isotropic",
      [](std::array<double, 3> n, double h) {
        const IsotropicPoint q = plane_to_isotropic({Vec3(n[0], n[1], n[2]), h});
        return std::array<double, 3>{q.x, q.y, q.z};
      },
      py::arg("normal"), py::arg("h"), "Isotropic point of the oriented plane n.p + h = 0.");

  m.def(
      "isotropic_to_plane",
      [](std::array<double, 3> q) {
        const OrientedPlane p = isotropic_to_plane({q[0], q[1], q[2]});
        return py::make_tuple(std::array<double, 3>{p.n.x(), p.n.y(), p.n.z()}, p.h);
      },
      py::arg("point"), "Oriented plane (normal, h) of an isotropic point.");

  m.def(
      "solve",
      [](const std::string& f, double x, double y, double theta_deg) {
        return to_py(solve_report_to_json(
            solve_hyperosculating(jet_of_expression(parse_expression(f), x, y), theta_deg * M_PI / 180.0)));
      },
      py::arg("f"), py::arg("x"), py::arg("y"), py::arg("theta_deg"),
      "Hyperosculating directions of the graph of f at (x, y).");

  m.def(
      "classify",
      [](const std::string& f, const std::string& test, double x, double y, std::optional<double> theta_deg,
         std::optional<double> radius, std::optional<double> tol, const std::string& orientation) {
        const SurfaceTest t = surface_test_from_string(test);
        const ClassVerdict v = run_test(t, jet_of_expression(parse_expression(f), x, y),
                                        tool_params(theta_deg, radius, orientation),
                                        tol.value_or(default_tolerance(t)));
        Json out = {{"test", std::string(to_string(v.test))},
                    {"holds", v.holds},
                    {"residual", v.residual},
                    {"necessary_only", v.necessary_only}};
        if (v.witness) out["witness"] = {v.witness->u, v.witness->v};
        return to_py(out);
      },
      py::arg("f"), py::arg("test"), py::arg("x"), py::arg("y"), py::arg("theta_deg") = py::none(),
      py::arg("radius") = py::none(), py::arg("tol") = py::none(), py::arg("orientation") = "inward",
      "Run one surface test on the jet of f at (x, y).");

  m.def(
      "cones",
      [](const std::string& f, double x, double y, double theta_deg, std::optional<std::array<double, 2>> bounds) {
        std::optional<ToolBounds> b;
        if (bounds) b = ToolBounds{(*bounds)[0], (*bounds)[1]};
        const ConeBuild cb = build_cone_at(x, y, expression_jets(parse_expression(f)),
                                           tool_params(theta_deg, std::nullopt, "inward"), b);
        Json out = Json::array();
        for (const ConeSpec& c : cb.cones) out.push_back(cone_to_json(c));
        return to_py(out);
      },
      py::arg("f"), py::arg("x"), py::arg("y"), py::arg("theta_deg"), py::arg("bounds") = py::none(),
      "Hyperosculating cones at (x, y), sorted by |c3|.");

  m.def(
      "trace_circle",
      [](const std::string& f, double theta_deg, std::array<double, 2> seed, std::array<double, 2> direction,
         double step, double length) {
        CircleTraceOptions opt;
        opt.step = step;
        opt.length = length;
        return to_py(trace_to_json(integrate_isotropic_circle(expression_jets(parse_expression(f)),
                                                              theta_deg * M_PI / 180.0, seed,
                                                              {direction[0], direction[1]}, opt)));
      },
      py::arg("f"), py::arg("theta_deg"), py::arg("seed"), py::arg("direction"), py::arg("step") = 1e-3,
      py::arg("length") = 0.5, "Isotropic circle traced from a seed along the nearest root.");

  m.def(
      "perturb_normals",
      [](const std::vector<std::array<double, 6>>& pts, double r, std::uint64_t seed) {
        std::vector<std::array<double, 6>> out;
        for (const auto& s : perturb_normals(samples_from(pts), {r, seed}))
          out.push_back({s.r.x(), s.r.y(), s.r.z(), s.n.x(), s.n.y(), s.n.z()});
        return out;
      },
      py::arg("points"), py::arg("r"), py::arg("seed") = 0,
      "Perturb unit normals of [px, py, pz, nx, ny, nz] rows by magnitude r.");

  m.def(
      "run_analysis",
      [](const py::object& config) {
        const Report r = run_analysis(config_from_json(from_py(config)));
        return py::make_tuple(to_py(r.body), r.exit_code);
      },
      py::arg("config"), "Run a JSON-style analysis config; returns (report, exit_code).");
}
