#pragma once

#include <span>

#include "coneflank/isomap.hpp"
#include "coneflank/jet.hpp"

namespace coneflank {

struct ScatterFitConfig {
  int k = 36;                    // neighbors; at least the coefficient count
  int degree = 4;                // local polynomial degree, 4..8; the jet keeps orders <= 4
  double bandwidth = 1.0;        // Gaussian width as a multiple of the k-th distance
  double condition_cap = 1e8;
  bool use_gradients = true;     // add (fx, fy) as Hermite equations
};

struct FitDiagnostics {
  double condition = 0.0;
  double residual_rms = 0.0;
  double radius = 0.0;  // distance to the k-th neighbor
  int neighbors = 0;
};

struct FitResult {
  Jet4 jet;
  FitDiagnostics diagnostics;
};

/// Weighted least-squares polynomial fit centered at (qx, qy).
FitResult fit_jet_scattered(std::span<const IsotropicSample> samples, double qx,
                            double qy, const ScatterFitConfig& cfg = {});

}  // namespace coneflank
