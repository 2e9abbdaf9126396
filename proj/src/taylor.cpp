#include "coneflank/taylor.hpp"

#include <cmath>

#include "coneflank/error.hpp"

namespace coneflank {

namespace {

constexpr double kFactorial[] = {1.0, 1.0, 2.0, 6.0, 24.0};

[[noreturn]] void domain_error(const char* what) {
  throw Error(ErrorCode::DomainError, what);
}

}  // namespace

Taylor4 Taylor4::variable(int which, double base) {
  Taylor4 t(base);
  if (which == 0) {
    t.coeff(1, 0) = 1.0;
  } else {
    t.coeff(0, 1) = 1.0;
  }
  return t;
}

Taylor4& Taylor4::operator+=(const Taylor4& o) {
  for (std::size_t k = 0; k < kSize; ++k) c_[k] += o.c_[k];
  return *this;
}

Taylor4& Taylor4::operator-=(const Taylor4& o) {
  for (std::size_t k = 0; k < kSize; ++k) c_[k] -= o.c_[k];
  return *this;
}

Taylor4& Taylor4::operator*=(double s) {
  for (auto& v : c_) v *= s;
  return *this;
}

Taylor4 operator*(const Taylor4& a, const Taylor4& b) {
  Taylor4 r;
  for (int i1 = 0; i1 <= Taylor4::kDegree; ++i1) {
    for (int j1 = 0; i1 + j1 <= Taylor4::kDegree; ++j1) {
      const double ca = a.coeff(i1, j1);
      if (ca == 0.0) continue;
      for (int i2 = 0; i1 + j1 + i2 <= Taylor4::kDegree; ++i2) {
        for (int j2 = 0; i1 + j1 + i2 + j2 <= Taylor4::kDegree; ++j2) {
          r.coeff(i1 + i2, j1 + j2) += ca * b.coeff(i2, j2);
        }
      }
    }
  }
  return r;
}

Taylor4 Taylor4::compose(const std::array<double, 5>& derivs) const {
  Taylor4 tail = *this;
  tail.c_[0] = 0.0;
  Taylor4 result(derivs[0]);
  Taylor4 power(1.0);
  for (int k = 1; k <= kDegree; ++k) {
    power = power * tail;
    Taylor4 term = power;
    term *= derivs[static_cast<std::size_t>(k)] / kFactorial[k];
    result += term;
  }
  return result;
}

Jet4 Taylor4::to_jet(double x, double y) const {
  Jet4 j;
  j.x = x;
  j.y = y;
  for (int i = 0; i <= kDegree; ++i)
    for (int k = 0; i + k <= kDegree; ++k)
      j.partial(i, k) = coeff(i, k) * kFactorial[i] * kFactorial[k];
  return j;
}

Taylor4 reciprocal(const Taylor4& a) {
  const double v = a.value();
  if (v == 0.0) domain_error("division by zero");
  const double r = 1.0 / v;
  return a.compose({r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r,
                    24.0 * r * r * r * r * r});
}

Taylor4 operator/(const Taylor4& a, const Taylor4& b) { return a * reciprocal(b); }

Taylor4 ipow(const Taylor4& a, int n) {
  if (n < 0) return reciprocal(ipow(a, -n));
  Taylor4 result(1.0);
  Taylor4 base = a;
  while (n > 0) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return result;
}

Taylor4 sin(const Taylor4& a) {
  const double s = std::sin(a.value()), c = std::cos(a.value());
  return a.compose({s, c, -s, -c, s});
}

Taylor4 cos(const Taylor4& a) {
  const double s = std::sin(a.value()), c = std::cos(a.value());
  return a.compose({c, -s, -c, s, c});
}

Taylor4 tan(const Taylor4& a) {
  if (std::cos(a.value()) == 0.0) domain_error("tan at a pole");
  const double t = std::tan(a.value());
  const double s = 1.0 + t * t;
  return a.compose({t, s, 2.0 * t * s, s * (2.0 + 6.0 * t * t),
                    s * (16.0 * t + 24.0 * t * t * t)});
}

Taylor4 atan(const Taylor4& a) {
  const double v = a.value();
  const double q = 1.0 / (1.0 + v * v);
  return a.compose({std::atan(v), q, -2.0 * v * q * q,
                    (6.0 * v * v - 2.0) * q * q * q,
                    24.0 * v * (1.0 - v * v) * q * q * q * q});
}

Taylor4 sqrt(const Taylor4& a) {
  const double v = a.value();
  if (!(v > 0.0)) domain_error("sqrt of a non-positive value");
  const double s = std::sqrt(v);
  return a.compose({s, 0.5 / s, -0.25 / (v * s), 0.375 / (v * v * s),
                    -0.9375 / (v * v * v * s)});
}

Taylor4 exp(const Taylor4& a) {
  const double e = std::exp(a.value());
  return a.compose({e, e, e, e, e});
}

Taylor4 log(const Taylor4& a) {
  const double v = a.value();
  if (!(v > 0.0)) domain_error("log of a non-positive value");
  const double r = 1.0 / v;
  return a.compose({std::log(v), r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r});
}

}  // namespace coneflank
