#include "coneflank/poly.hpp"

#include <algorithm>
#include <cmath>

namespace coneflank {

int Polynomial::degree() const {
  for (int i = static_cast<int>(c_.size()) - 1; i >= 0; --i)
    if (c_[static_cast<std::size_t>(i)] != 0.0) return i;
  return -1;
}

double Polynomial::operator()(double t) const {
  double acc = 0.0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * t + *it;
  return acc;
}

double Polynomial::magnitude(double t) const {
  double acc = 0.0;
  const double at = std::abs(t);
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * at + std::abs(*it);
  return acc;
}

double Polynomial::max_abs_coeff() const {
  double m = 0.0;
  for (double c : c_) m = std::max(m, std::abs(c));
  return m;
}

Polynomial Polynomial::derivative() const {
  if (c_.size() <= 1) return Polynomial{};
  std::vector<double> d(c_.size() - 1);
  for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = static_cast<double>(i) * c_[i];
  return Polynomial(std::move(d));
}

Polynomial Polynomial::trimmed(double rel_tol) const {
  const double limit = rel_tol * max_abs_coeff();
  std::vector<double> c = c_;
  while (!c.empty() && std::abs(c.back()) <= limit) c.pop_back();
  return Polynomial(std::move(c));
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  std::vector<double> c(std::max(a.c_.size(), b.c_.size()), 0.0);
  for (std::size_t i = 0; i < a.c_.size(); ++i) c[i] += a.c_[i];
  for (std::size_t i = 0; i < b.c_.size(); ++i) c[i] += b.c_[i];
  return Polynomial(std::move(c));
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) {
  return a + (-1.0) * b;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.c_.empty() || b.c_.empty()) return Polynomial{};
  std::vector<double> c(a.c_.size() + b.c_.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.c_.size(); ++i)
    for (std::size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
  return Polynomial(std::move(c));
}

Polynomial operator*(double s, const Polynomial& a) {
  std::vector<double> c = a.c_;
  for (double& v : c) v *= s;
  return Polynomial(std::move(c));
}

namespace {

Polynomial normalized(const Polynomial& p) {
  const double m = p.max_abs_coeff();
  return m > 0.0 ? (1.0 / m) * p : p;
}

// Remainder of a / b; b must have a nonzero leading coefficient.
Polynomial remainder(const Polynomial& a, const Polynomial& b) {
  std::vector<double> r = a.coeffs();
  const auto& d = b.coeffs();
  const int db = b.degree();
  const double lead = d[static_cast<std::size_t>(db)];
  for (int k = static_cast<int>(r.size()) - 1; k >= db; --k) {
    const double q = r[static_cast<std::size_t>(k)] / lead;
    for (int i = 0; i <= db; ++i)
      r[static_cast<std::size_t>(k - db + i)] -= q * d[static_cast<std::size_t>(i)];
    r[static_cast<std::size_t>(k)] = 0.0;
  }
  r.resize(static_cast<std::size_t>(std::max(db, 0)));
  return Polynomial(std::move(r));
}

std::vector<Polynomial> sturm_chain(const Polynomial& p) {
  std::vector<Polynomial> chain{normalized(p), normalized(p.derivative())};
  while (chain.back().degree() > 0) {
    const Polynomial& a = chain[chain.size() - 2];
    const Polynomial& b = chain.back();
    // Rounding leaves tiny coefficients where exact arithmetic gives zero.
    Polynomial r = remainder(a, b).trimmed(0.0);
    std::vector<double> c = r.coeffs();
    for (double& v : c)
      if (std::abs(v) <= 1e-12) v = 0.0;
    r = Polynomial(std::move(c)).trimmed(0.0);
    if (r.degree() < 0) break;
    chain.push_back(normalized((-1.0) * r));
  }
  return chain;
}

int sign_changes(const std::vector<Polynomial>& chain, double t) {
  int changes = 0;
  double prev = 0.0;
  for (const auto& q : chain) {
    const double v = q(t);
    if (v == 0.0) continue;
    if (prev != 0.0 && (v > 0.0) != (prev > 0.0)) ++changes;
    prev = v;
  }
  return changes;
}

double cauchy_bound(const Polynomial& p) {
  const int n = p.degree();
  const double lead = std::abs(p.coeffs()[static_cast<std::size_t>(n)]);
  double m = 0.0;
  for (int i = 0; i < n; ++i) m = std::max(m, std::abs(p.coeffs()[static_cast<std::size_t>(i)]) / lead);
  return 1.0 + m;
}

double bisect(const Polynomial& p, double a, double b) {
  double fa = p(a);
  if (fa == 0.0) return a;
  if (p(b) == 0.0) return b;
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    const double fm = p(m);
    if (fm == 0.0) return m;
    if ((fm > 0.0) == (fa > 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

double argmin_abs(const Polynomial& p, double a, double b) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
    if (std::abs(p(c)) < std::abs(p(d))) {
      b = d;
    } else {
      a = c;
    }
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return 0.5 * (a + b);
}

void isolate(const Polynomial& p, const std::vector<Polynomial>& chain, double a,
             double b, int va, int vb, std::vector<RealRoot>& out) {
  const int count = va - vb;
  if (count <= 0) return;
  const double width = b - a;
  if (count == 1 || width <= 1e-14 * (1.0 + std::abs(a) + std::abs(b))) {
    const double fa = p(a), fb = p(b);
    if (fb == 0.0) {
      out.push_back({b, count > 1});
    } else if (fa != 0.0 && (fa > 0.0) != (fb > 0.0)) {
      out.push_back({bisect(p, a, b), count > 1});
    } else {
      out.push_back({argmin_abs(p, a, b), true});
    }
    return;
  }
  const double m = 0.5 * (a + b);
  const int vm = sign_changes(chain, m);
  isolate(p, chain, a, m, va, vm, out);
  isolate(p, chain, m, b, vm, vb, out);
}

}  // namespace

int sturm_count(const Polynomial& p, double a, double b) {
  const Polynomial q = p.trimmed(0.0);
  if (q.degree() <= 0) return 0;
  const auto chain = sturm_chain(q);
  return sign_changes(chain, a) - sign_changes(chain, b);
}

std::vector<RealRoot> real_roots(const Polynomial& p, double near_zero) {
  const Polynomial q = normalized(p.trimmed(0.0));
  std::vector<RealRoot> roots;
  const int n = q.degree();
  if (n <= 0) return roots;
  if (n == 1) {
    roots.push_back({-q.coeffs()[0] / q.coeffs()[1], false});
    return roots;
  }
  const auto chain = sturm_chain(q);
  const double bound = cauchy_bound(q);
  isolate(q, chain, -bound, bound, sign_changes(chain, -bound),
          sign_changes(chain, bound), roots);

  for (const RealRoot& c : real_roots(q.derivative(), near_zero)) {
    if (std::abs(q(c.t)) > near_zero * q.magnitude(c.t)) continue;
    bool known = false;
    for (RealRoot& r : roots) {
      if (std::abs(r.t - c.t) <= 1e-5 * (1.0 + std::abs(c.t))) {
        r.multiple = true;
        known = true;
      }
    }
    if (!known) roots.push_back({c.t, true});
  }
  std::sort(roots.begin(), roots.end(),
            [](const RealRoot& a, const RealRoot& b) { return a.t < b.t; });
  return roots;
}

}  // namespace coneflank
