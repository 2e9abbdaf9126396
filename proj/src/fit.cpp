#include "coneflank/fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "coneflank/error.hpp"

namespace coneflank {

namespace {

constexpr double kFactorial[] = {1.0, 1.0, 2.0, 6.0, 24.0};

struct Monomial {
  int i, j;
};

// Graded order: all monomials of total degree 0, then 1, up to `degree`.
std::vector<Monomial> monomials(int degree) {
  std::vector<Monomial> m;
  for (int d = 0; d <= degree; ++d)
    for (int j = 0; j <= d; ++j) m.push_back({d - j, j});
  return m;
}

double ipow(double b, int e) {
  double r = 1.0;
  for (int k = 0; k < e; ++k) r *= b;
  return r;
}

}  // namespace

FitResult fit_jet_scattered(std::span<const IsotropicSample> samples, double qx,
                            double qy, const ScatterFitConfig& cfg) {
  if (cfg.degree < 4 || cfg.degree > 8) {
    throw Error(ErrorCode::ConfigError, "fit degree must be between 4 and 8");
  }
  const std::vector<Monomial> mono = monomials(cfg.degree);
  const int n_coeffs = static_cast<int>(mono.size());
  if (cfg.k < n_coeffs) {
    throw Error(ErrorCode::ConfigError,
                "neighbor count must be at least " + std::to_string(n_coeffs));
  }
  const auto k = static_cast<std::size_t>(cfg.k);
  if (samples.size() < k) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(samples.size()) +
                                              " samples, need " + std::to_string(k));
  }

  std::vector<std::pair<double, std::size_t>> dist(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double dx = samples[i].x - qx, dy = samples[i].y - qy;
    dist[i] = {dx * dx + dy * dy, i};
  }
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   dist.end());
  const double h = std::sqrt(dist[k - 1].first);
  if (!(h > 0.0)) throw Error(ErrorCode::IllConditioned, "all neighbors coincide");
  const double width = cfg.bandwidth * h;

  const int eq_per_sample = cfg.use_gradients ? 3 : 1;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(k) * eq_per_sample, n_coeffs);
  Eigen::VectorXd rhs(A.rows());
  Eigen::VectorXd weight(static_cast<Eigen::Index>(k));
  for (std::size_t s = 0; s < k; ++s) {
    const auto& p = samples[dist[s].second];
    const double xi = (p.x - qx) / h, eta = (p.y - qy) / h;
    const double w = std::sqrt(std::exp(-dist[s].first / (width * width)));
    weight(static_cast<Eigen::Index>(s)) = w;
    const Eigen::Index row = static_cast<Eigen::Index>(s) * eq_per_sample;
    for (int c = 0; c < n_coeffs; ++c) {
      const auto [i, j] = mono[static_cast<std::size_t>(c)];
      A(row, c) = w * ipow(xi, i) * ipow(eta, j);
      if (cfg.use_gradients) {
        A(row + 1, c) = i > 0 ? w * i * ipow(xi, i - 1) * ipow(eta, j) : 0.0;
        A(row + 2, c) = j > 0 ? w * j * ipow(xi, i) * ipow(eta, j - 1) : 0.0;
      }
    }
    rhs(row) = w * p.f;
    if (cfg.use_gradients) {
      rhs(row + 1) = w * h * p.fx;
      rhs(row + 2) = w * h * p.fy;
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv(0), smin = sv(sv.size() - 1);
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(cond <= cfg.condition_cap)) {
    throw Error(ErrorCode::IllConditioned,
                "condition number " + std::to_string(cond) + " exceeds cap");
  }
  const Eigen::VectorXd coef = svd.solve(rhs);

  FitResult out;
  out.jet.x = qx;
  out.jet.y = qy;
  // Monomials of degree <= 4 come first; higher ones only absorb truncation.
  for (int c = 0; c < 15; ++c) {
    const auto [i, j] = mono[static_cast<std::size_t>(c)];
    out.jet.partial(i, j) = coef(c) * kFactorial[i] * kFactorial[j] / ipow(h, i + j);
  }

  double ss = 0.0;
  for (std::size_t s = 0; s < k; ++s) {
    const Eigen::Index row = static_cast<Eigen::Index>(s) * eq_per_sample;
    const double w = weight(static_cast<Eigen::Index>(s));
    const double r = (A.row(row).dot(coef) - rhs(row)) / w;
    ss += r * r;
  }
  out.diagnostics.condition = cond;
  out.diagnostics.residual_rms = std::sqrt(ss / static_cast<double>(k));
  out.diagnostics.radius = h;
  out.diagnostics.neighbors = cfg.k;
  return out;
}

}  // namespace coneflank
