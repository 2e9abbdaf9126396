#pragma once

// Per-point tests for the surface classes that are limits of, or relatives
// of, envelopes of congruent rotational cones. Each test reads a 4-jet of
// the isotropic graph function f.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coneflank/contact.hpp"
#include "coneflank/isomap.hpp"
#include "coneflank/jet.hpp"

namespace coneflank {

enum class SurfaceTest { Developable, Ruled, ConeEnvelope, CylinderEnvelope, Channel, Pipe };

std::string_view to_string(SurfaceTest t);
SurfaceTest surface_test_from_string(std::string_view s);

struct Direction {
  double u = 0.0, v = 0.0;
};

struct ClassVerdict {
  SurfaceTest test = SurfaceTest::Developable;
  bool holds = false;
  double residual = 0.0;  // >= 0; compared against the test tolerance
  std::optional<Direction> witness;
  std::vector<Direction> witnesses;  // every direction meeting the defining equations
  /// Only the forward implication holds for cylinders, channels and pipes,
  /// so a passing test there is a necessary condition.
  bool necessary_only = false;
  double jacobian = 0.0;  // cone test: multiplicity function at the witness
};

struct ToolParams {
  std::optional<double> theta;   // cone opening angle, radians
  std::optional<double> radius;  // cylinder / sphere radius
  Orientation orientation = Orientation::Inward;
};

/// Gaussian-curvature numerator of the graph.
double developable_residual(const Jet4& j);

/// 13-term resultant of the ruling system (quadratic and cubic in (u, v)).
double ruled_resultant(const Jet4& j);

ClassVerdict ruled_test(const Jet4& j, double tol = 1e-10);
ClassVerdict cone_envelope_test(const Jet4& j, const ToolParams& tool, double tol = 1e-6,
                                const SolveOptions& opt = {});
/// Plane condition for the isotropic image of a cylinder of radius R; R is
/// negated for outward orientation. Homogeneous of degree 2 in (u, v).
double cylinder_plane_residual(const Jet4& j, double u, double v, double radius,
                               Orientation orientation);
ClassVerdict cylinder_envelope_test(const Jet4& j, const ToolParams& tool, double tol = 1e-6);
/// Resultant of the principal-direction quadratic and the cubic of the
/// channel system, divided by |q|^3 |c|^2 (Bombieri norms of the forms,
/// so the value is scale-free and invariant under rotations of (u, v)).
double channel_resultant(const Jet4& j);
ClassVerdict channel_test(const Jet4& j, double tol = 1e-6);
ClassVerdict pipe_test(const Jet4& j, const ToolParams& tool, double tol = 1e-6);

enum class Millability { Penetrates, Candidate, Excluded };
std::string_view to_string(Millability m);

/// Sign of the design-space Gaussian curvature of the patch reconstructed
/// from the jet around its contact point.
Millability millability_check(const Jet4& j, double tol = 1e-8);

using JetProvider = std::function<Jet4(double, double)>;

struct FieldNode {
  double x = 0.0, y = 0.0;
  double residual = 0.0;
  bool ok = false;
  std::string error;  // set when the jet or the test failed at this node
  std::optional<ClassVerdict> verdict;
};

struct FieldSummary {
  std::vector<FieldNode> nodes;
  double p50 = 0.0, p95 = 0.0, max = 0.0;
  int failures = 0;
  bool holds = false;  // p95 of the residuals at successful nodes below tol
};

ClassVerdict run_test(SurfaceTest test, const Jet4& j, const ToolParams& tool, double tol);

FieldSummary classify_field(const JetProvider& jets, std::span<const std::array<double, 2>> nodes,
                            SurfaceTest test, const ToolParams& tool, double tol);

/// Nearest-rank percentile of unsorted values, q in [0, 1].
double percentile(std::vector<double> values, double q);

}  // namespace coneflank
