#pragma once

// Surface sources, sampling, the normal-perturbation harness, end-to-end
// analysis reports and OBJ export.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "coneflank/classify.hpp"
#include "coneflank/expr.hpp"
#include "coneflank/fit.hpp"
#include "coneflank/isomap.hpp"
#include "coneflank/reconstruct.hpp"

namespace coneflank {

using Json = nlohmann::json;

inline constexpr const char* kReportSchema = "cone-flank/1";
inline constexpr const char* kVersion = "0.1.0";

/// Design-space chart (X, Y, Z)(s, t); normals are sign * (P_s x P_t).
struct ParametricSource {
  ExprAst x, y, z;
  double orientation = 1.0;
  std::array<double, 4> domain{0.0, 1.0, 0.0, 1.0};  // s0, s1, t0, t1
};

struct SurfaceSource {
  enum class Kind { IsotropicExpr, Parametric, Cloud };
  Kind kind = Kind::IsotropicExpr;
  ExprAst f;                        // isotropic graph z = f(x, y)
  ParametricSource parametric;
  std::vector<SurfaceSample> cloud;
};

/// {"kind": "isotropic-expr", "f": ...} | {"kind": "parametric", "x", "y",
/// "z", "orientation": 1|-1, "domain": [s0, s1, t0, t1]} | {"kind": "cloud",
/// "points": [[px, py, pz, nx, ny, nz], ...]}.
SurfaceSource source_from_json(const Json& j);
Json source_to_json(const SurfaceSource& s);
/// A path to a JSON source file, or else an isotropic expression.
SurfaceSource source_from_argument(const std::string& arg);

struct GridSpec {
  int nu = 20, nv = 20;
  std::array<double, 4> domain{-1.0, 1.0, -1.0, 1.0};
};

/// Node (u_i, v_j) of the grid; endpoints included.
std::vector<std::array<double, 2>> grid_nodes(const GridSpec& g);

struct NodeFailure {
  double s = 0.0, t = 0.0;
  std::string stage;
  std::string error;
};

struct SampleSet {
  std::vector<SurfaceSample> samples;
  std::vector<NodeFailure> failures;
  std::vector<int> grid_index;  // sample -> row-major grid node
  int rows = 0, cols = 0;
};

/// Positions and unit normals on a parameter grid. Nodes with a vanishing
/// cross product are skipped and recorded as DegenerateNormal.
SampleSet sample_parametric(const ParametricSource& src, const GridSpec& grid);

struct PerturbSpec {
  double r = 0.0;
  std::uint64_t seed = 0;
};

/// n -> (n + r cos(phi) d1 + r sin(phi) d2) / |...| with phi uniform on
/// [-pi, pi] from a seeded mt19937_64. Throws NegativeNoise when r < 0.
std::vector<SurfaceSample> perturb_normals(std::span<const SurfaceSample> samples,
                                           const PerturbSpec& spec);

/// Isotropic images of oriented samples plus a fitted jet provider.
struct CloudModel {
  Mat3 rotation = Mat3::Identity();
  std::vector<IsotropicSample> iso;
  std::vector<std::string> dropped;  // samples too close to the excluded normal
  double spacing = 0.0;              // median nearest-neighbor distance in the isotropic plane
  JetProvider jets;
};

CloudModel build_cloud_model(std::span<const SurfaceSample> samples, bool align,
                             const ScatterFitConfig& fit = {});

JetProvider expression_jets(const ExprAst& f);

struct AnalysisConfig {
  SurfaceSource source;
  std::optional<SurfaceTest> test;
  ToolParams tool;
  std::optional<double> tol;
  GridSpec grid;                                  // isotropic grid of classified nodes
  bool auto_domain = false;                       // sampled sources: grid over the samples' bounding box
  std::optional<GridSpec> sample_grid;            // parametric sampling grid
  std::optional<std::array<double, 2>> annulus;   // keep nodes with r0 <= x^2 + y^2 <= r1
  std::vector<std::array<double, 2>> cone_points; // isotropic points for cone reconstruction
  std::optional<ToolBounds> bounds;
  bool millability = false;
  std::optional<PerturbSpec> perturb;
  bool align = true;
  ScatterFitConfig fit;
};

AnalysisConfig config_from_json(const Json& j);
Json config_to_json(const AnalysisConfig& c);

double default_tolerance(SurfaceTest t);

/// Jets of a configured source. Sampled sources carry their cloud model;
/// isotropic coordinates then live in the aligned frame and `to_design`
/// rotates results back.
struct SurfaceModel {
  JetProvider jets;
  Mat3 to_design = Mat3::Identity();
  std::optional<CloudModel> cloud;
  std::vector<SurfaceSample> samples;  // design space, after perturbation
  std::vector<NodeFailure> sample_failures;
};

SurfaceModel build_surface_model(const AnalysisConfig& config);

/// Grid nodes kept for analysis: inside the annulus when given and, for
/// sampled sources, within three sample spacings of a sample. With
/// auto_domain the grid spans the isotropic samples' bounding box.
std::vector<std::array<double, 2>> analysis_nodes(const AnalysisConfig& config, const SurfaceModel& sm);

struct Report {
  Json body;
  int exit_code = 1;  // 0 holds, 2 fails, 1 error
  std::string verdict;
};

/// source -> (alignment) -> jets -> tests and cones -> Report. Stage errors
/// are recorded with their stage tag; the body holds no timestamps.
Report run_analysis(const AnalysisConfig& config);

std::string report_to_csv(const Report& r);

std::uint64_t fnv1a64(std::string_view data);

Json cone_to_json(const ConeSpec& c);
Json solve_report_to_json(const SolveReport& r);
Json trace_to_json(const CurveTrace& t);

/// Oriented samples (contact point, normal) of the design surface whose
/// isotropic image is the graph of f, at the given isotropic points.
std::vector<SurfaceSample> envelope_samples(const JetProvider& jets,
                                            std::span<const std::array<double, 2>> pts);

struct StabilityConfig {
  double theta = M_PI / 6;
  std::vector<std::array<double, 2>> points;  // tested isotropic points
  std::vector<double> noise{0.0, 0.01, 0.05, 0.1};
  std::uint64_t seed = 1;
  int stencil = 9;          // local samples per side around each tested point
  double spacing = 2e-3;    // isotropic spacing of the local samples
  int degree = 6;           // local fit degree
  bool use_gradients = true;  // Hermite gradient equations in the fit
};

struct StabilityLevel {
  double r = 0.0;
  double median_error = 0.0;  // radians, between recovered and exact generator rulings
  double max_error = 0.0;
  std::vector<int> cone_counts;  // cones emitted per tested point
  int failures = 0;
};

/// Perturbation harness on an exact envelope: sample, perturb normals, map
/// back, fit jets, reconstruct cones and compare with the exact generators.
std::vector<StabilityLevel> stability_experiment(const ExprAst& f,
                                                 const std::function<std::vector<Direction>(double, double)>& generators,
                                                 const StabilityConfig& cfg);

/// OBJ writer in design-space coordinates.
class ObjWriter {
 public:
  explicit ObjWriter(std::ostream& out);
  /// Cone frustum between distances d0 and d1 from the vertex, 64-gon, with
  /// vertex normals oriented like the contact normal. `phase` rotates the
  /// ring start about the axis.
  void cone_frustum(const ConeSpec& c, double d0, double d1, int sides = 64, double phase = 0.0);
  void polyline(std::span<const Vec3> pts);
  /// Row-major rows x cols grid of points as quads; nullopt entries are holes.
  void quad_grid(std::span<const std::optional<Vec3>> pts, int rows, int cols);

 private:
  std::ostream& out_;
  int vertices_ = 0;
  int normals_ = 0;
};

/// Vertices paired with their `vn` normals (index-aligned).
std::vector<SurfaceSample> read_obj_cloud(std::istream& in);

}  // namespace coneflank
