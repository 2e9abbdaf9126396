#pragma once

// Design-space reconstruction: cone positions from isotropic circles, and
// integral curves (rulings, isotropic circles) of the fields defined by the
// classification equations.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "coneflank/classify.hpp"
#include "coneflank/contact.hpp"
#include "coneflank/isomap.hpp"

namespace coneflank {

enum class Side { PlusNormal, MinusNormal };
std::string_view to_string(Side s);

struct ToolBounds {
  double r_min = 0.0;
  double r_max = 0.0;
};

struct ConeSpec {
  Vec3 vertex = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();  // unit, pointing from the vertex into the nappe touching r
  double theta = 0.0;
  Vec3 contact = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // oriented surface normal at the contact point
  Side side = Side::PlusNormal;
  double tangency_radius = 0.0;  // distance from the contact point to the axis
  double distance = 0.0;         // |contact - vertex|
  bool feasible = true;          // within the tool bounds, when bounds were given
  double u = 0.0, v = 0.0;       // isotropic direction of the generating root
  double c3 = 0.0;
  double jacobian = 0.0;
  ConicCandidate conic;
};

struct CurveTrace {
  std::vector<std::array<double, 2>> points;
  std::vector<double> f;
  double step = 0.0;
  double straightness = 0.0;  // max distance from the chord (rulings)
  double tangent_variation = 0.0;  // max |(fx, fy) - (fx, fy)(seed)| (developable)
  double f_linearity = 0.0;  // max |f - best linear fit in arc length| (ruled)
  double circularity = 0.0;  // max |dist to fitted center - fitted radius|
  std::array<double, 2> center{0.0, 0.0};
  double radius = 0.0;
  double f_consistency = 0.0;  // max |f - z(t)| against the seed conic
  double max_step_deviation = 0.0;  // max | |p_k+1 - p_k| / step - 1 |
};

/// Vertex of the cone whose image is the conic; closed form in the conic's
/// coefficients. Throws DegenerateDenominator when (u, v) = 0 or the
/// denominator x^2+y^2+1+2ux+2vy vanishes.
Vec3 cone_vertex(const ConicCandidate& c);

/// Axis a with n(t_i).a = sin(theta) for the Gaussian-image normals at the
/// three probe parameters. Throws SingularSystem for (nearly) dependent
/// probes.
Vec3 cone_axis(const ConicCandidate& c,
               std::array<double, 3> probes = {0.0, 2.0943951023931957, 4.1887902047863905});

/// Side of the tangent plane at r that the cone borders upon.
Side cone_side(const ConicCandidate& c, const Vec3& m, const Vec3& r);

/// r_min <= |m - r| <= r_max. Throws InvalidBounds unless 0 <= r_min < r_max.
bool tool_length_check(const Vec3& m, const Vec3& r, const ToolBounds& b);

struct TraceOptions {
  double step = 1e-3;
  double length = 0.1;
};

/// Integral curve of the unit kernel direction of the Hessian, by RK4.
CurveTrace integrate_ruling_developable(const JetProvider& jets, std::array<double, 2> seed,
                                        const TraceOptions& opt);

/// Integral curve of the ruling field of a negatively curved graph. The
/// branch is the asymptotic direction closest to `branch` at the seed and
/// is continued by angular continuity (at most 30 degrees per step).
CurveTrace integrate_ruling_ruled(const JetProvider& jets, std::array<double, 2> seed,
                                  Direction branch, const TraceOptions& opt);

struct CircleTraceOptions {
  double step = 1e-3;
  double length = 0.5;
  SolveOptions solve;
};

/// Integral curve of the field (v, -u) of the hyperosculating root nearest
/// to `root` at the seed, tracked continuously through the circle center
/// (x + u, y + v). Throws MultipleRoot when the tracked root becomes
/// multiple and RootLost when no root continues the previous one.
CurveTrace integrate_isotropic_circle(const JetProvider& jets, double theta,
                                      std::array<double, 2> seed, Direction root,
                                      const CircleTraceOptions& opt = {});

struct DroppedRoot {
  double u = 0.0, v = 0.0;
  std::string reason;
};

struct ConeBuild {
  std::vector<ConeSpec> cones;  // sorted by |c3| ascending
  std::vector<DroppedRoot> dropped;
  std::string reason;  // set when no root could be produced at all
  SolveReport report;
};

/// All hyperosculating cones at (x, y): solve, osculate, vertex, axis, contact
/// point, side and tool length. Requires tool.theta.
ConeBuild build_cone_at(double x, double y, const JetProvider& jets, const ToolParams& tool,
                        const std::optional<ToolBounds>& bounds = std::nullopt,
                        const SolveOptions& opt = {});
ConeBuild build_cone_at(const Jet4& j, const ToolParams& tool,
                        const std::optional<ToolBounds>& bounds = std::nullopt,
                        const SolveOptions& opt = {});

/// Least-squares (algebraic) circle through 2-D points: center and radius.
std::array<double, 3> fit_circle(const std::vector<std::array<double, 2>>& pts);

}  // namespace coneflank
