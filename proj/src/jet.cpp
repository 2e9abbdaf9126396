#include "coneflank/jet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coneflank {

namespace {

constexpr double kFactorial[] = {1.0, 1.0, 2.0, 6.0, 24.0};

double ipow(double base, int e) {
  double r = 1.0;
  for (int k = 0; k < e; ++k) r *= base;
  return r;
}

}  // namespace

double& Jet4::partial(int i, int j) {
  switch (i * 5 + j) {
    case 0: return f;
    case 5: return fx;
    case 1: return fy;
    case 10: return fxx;
    case 6: return fxy;
    case 2: return fyy;
    case 15: return fxxx;
    case 11: return fxxy;
    case 7: return fxyy;
    case 3: return fyyy;
    case 20: return fxxxx;
    case 16: return fxxxy;
    case 12: return fxxyy;
    case 8: return fxyyy;
    case 4: return fyyyy;
    default: break;
  }
  throw std::out_of_range("Jet4::partial: order above 4");
}

double Jet4::partial(int i, int j) const {
  return const_cast<Jet4*>(this)->partial(i, j);
}

Jet4 Jet4::shifted(double dx, double dy) const {
  Jet4 out;
  out.x = x + dx;
  out.y = y + dy;
  for (int p = 0; p <= 4; ++p) {
    for (int q = 0; p + q <= 4; ++q) {
      double acc = 0.0;
      for (int i = p; i <= 4; ++i) {
        for (int j = q; i + j <= 4; ++j) {
          acc += partial(i, j) * ipow(dx, i - p) * ipow(dy, j - q) /
                 (kFactorial[i - p] * kFactorial[j - q]);
        }
      }
      out.partial(p, q) = acc;
    }
  }
  return out;
}

double Jet4::taylor_value(double dx, double dy) const {
  return shifted(dx, dy).f;
}

std::array<double, 2> Jet4::taylor_gradient(double dx, double dy) const {
  const Jet4 s = shifted(dx, dy);
  return {s.fx, s.fy};
}

bool Jet4::all_finite() const {
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; i + j <= 4; ++j)
      if (!std::isfinite(partial(i, j))) return false;
  return std::isfinite(x) && std::isfinite(y);
}

double Jet4::curvature_scale() const {
  double s = 0.0;
  for (int d = 2; d <= 4; ++d)
    for (int j = 0; j <= d; ++j) s = std::max(s, std::abs(partial(d - j, j)));
  return s;
}

Jet4 operator+(const Jet4& a, const Jet4& b) {
  Jet4 out = a;
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; i + j <= 4; ++j) out.partial(i, j) += b.partial(i, j);
  return out;
}

Jet4 operator*(double s, const Jet4& a) {
  Jet4 out = a;
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; i + j <= 4; ++j) out.partial(i, j) *= s;
  return out;
}

}  // namespace coneflank
