#include "coneflank/contact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coneflank {

double ConicCandidate::px(double t) const {
  return x + v * std::sin(t) + u * (1.0 - std::cos(t));
}
double ConicCandidate::py(double t) const {
  return y - u * std::sin(t) + v * (1.0 - std::cos(t));
}
double ConicCandidate::pz(double t) const {
  return z + a * std::sin(t) + b * (1.0 - std::cos(t));
}

double ContactRoot::direction() const { return std::atan2(v, u); }

Osculation osculation_coeffs(double /*x*/, double /*y*/, const Jet4& j, double u,
                             double v) {
  Osculation o;
  o.z = j.f;
  o.a = j.fx * v - j.fy * u;
  o.b = j.fx * u + j.fy * v + j.fxx * v * v - 2.0 * j.fxy * u * v + j.fyy * u * u;
  return o;
}

ConicCandidate make_conic(const Jet4& j, double u, double v, double theta) {
  const Osculation o = osculation_coeffs(j.x, j.y, j, u, v);
  return {j.x, j.y, o.z, u, v, o.a, o.b, theta};
}

namespace {

double lin(double x, double y, double u, double v) {
  return x * x + y * y + 1.0 + 2.0 * x * u + 2.0 * y * v;
}

// Half of the gradient of theta_residual in (u, v).
void half_gradient(double x, double y, double u, double v, double theta, double& gu,
                   double& gv) {
  const double t2 = std::tan(theta) * std::tan(theta);
  const double l = lin(x, y, u, v);
  gu = 2.0 * x * l - 4.0 * u * t2;
  gv = 2.0 * y * l - 4.0 * v * t2;
}

void hyper_gradient(const Jet4& j, double u, double v, double& gu, double& gv) {
  const double d = j.fxx - j.fyy;
  gu = -3.0 * j.fxxy * v * v + 6.0 * j.fxyy * v * u - 3.0 * j.fyyy * u * u +
       3.0 * d * v - 6.0 * j.fxy * u;
  gv = 3.0 * j.fxxx * v * v - 6.0 * j.fxxy * u * v + 3.0 * j.fxyy * u * u +
       3.0 * d * u + 6.0 * j.fxy * v;
}

struct Residuals {
  double c1, c2;
  double s1, s2;
  double merit() const { return std::abs(c1) / s1 + std::abs(c2) / s2; }
};

Residuals residuals(const Jet4& j, double theta, double u, double v) {
  const double s2 = hyper_scale(j, u, v);
  return {theta_residual(j.x, j.y, u, v, theta), hyper_residual(j, u, v),
          std::max(theta_scale(j.x, j.y, u, v, theta), std::numeric_limits<double>::min()),
          std::max(s2, std::numeric_limits<double>::min())};
}

// Newton on (C1, C2); stops when the relative merit stops decreasing.
void newton_polish(const Jet4& j, double theta, double& u, double& v) {
  Residuals r = residuals(j, theta, u, v);
  for (int it = 0; it < 60; ++it) {
    double a11, a12, a21, a22;
    half_gradient(j.x, j.y, u, v, theta, a11, a12);
    a11 *= 2.0;
    a12 *= 2.0;
    hyper_gradient(j, u, v, a21, a22);
    const double det = a11 * a22 - a12 * a21;
    if (det == 0.0 || !std::isfinite(det)) return;
    const double du = (a22 * r.c1 - a12 * r.c2) / det;
    const double dv = (-a21 * r.c1 + a11 * r.c2) / det;
    const double nu = u - du, nv = v - dv;
    const Residuals nr = residuals(j, theta, nu, nv);
    if (!(nr.merit() < r.merit())) return;
    u = nu;
    v = nv;
    r = nr;
    if (r.merit() == 0.0) return;
  }
}

// Gauss-Newton on (C1, C2, J): at a multiple root J vanishes too, and the
// augmented system restores fast convergence.
void deflated_polish(const Jet4& j, double theta, double& u, double& v) {
  const double x = j.x, y = j.y;
  auto eval = [&](double uu, double vv, double out[3], double scale[3]) {
    out[0] = theta_residual(x, y, uu, vv, theta);
    out[1] = hyper_residual(j, uu, vv);
    out[2] = multiplicity_jacobian(x, y, j, uu, vv, theta);
    scale[0] = std::max(theta_scale(x, y, uu, vv, theta), 1e-300);
    scale[1] = std::max(hyper_scale(j, uu, vv), 1e-300);
    scale[2] = std::max(jacobian_scale(x, y, j, uu, vv, theta), 1e-300);
  };
  auto merit = [](const double r[3], const double s[3]) {
    return std::abs(r[0]) / s[0] + std::abs(r[1]) / s[1] + std::abs(r[2]) / s[2];
  };
  double r[3], s[3];
  eval(u, v, r, s);
  for (int it = 0; it < 60; ++it) {
    double g[3][2];
    half_gradient(x, y, u, v, theta, g[0][0], g[0][1]);
    g[0][0] *= 2.0;
    g[0][1] *= 2.0;
    hyper_gradient(j, u, v, g[1][0], g[1][1]);
    const double h = 1e-6 * (1.0 + std::hypot(u, v));
    g[2][0] = (multiplicity_jacobian(x, y, j, u + h, v, theta) -
               multiplicity_jacobian(x, y, j, u - h, v, theta)) / (2.0 * h);
    g[2][1] = (multiplicity_jacobian(x, y, j, u, v + h, theta) -
               multiplicity_jacobian(x, y, j, u, v - h, theta)) / (2.0 * h);
    // Normal equations of the row-scaled system.
    double n11 = 0, n12 = 0, n22 = 0, b1 = 0, b2 = 0;
    for (int k = 0; k < 3; ++k) {
      const double w = 1.0 / s[k];
      const double p = g[k][0] * w, q = g[k][1] * w, e = r[k] * w;
      n11 += p * p;
      n12 += p * q;
      n22 += q * q;
      b1 += p * e;
      b2 += q * e;
    }
    const double det = n11 * n22 - n12 * n12;
    if (!(std::abs(det) > 0.0) || !std::isfinite(det)) return;
    const double nu = u - (n22 * b1 - n12 * b2) / det;
    const double nv = v - (-n12 * b1 + n11 * b2) / det;
    double nr[3], ns[3];
    eval(nu, nv, nr, ns);
    if (!(merit(nr, ns) < merit(r, s))) return;
    u = nu;
    v = nv;
    std::copy(nr, nr + 3, r);
    std::copy(ns, ns + 3, s);
  }
}

void polish(const Jet4& j, double theta, double& u, double& v) {
  newton_polish(j, theta, u, v);
  const double jac = multiplicity_jacobian(j.x, j.y, j, u, v, theta);
  const double js = jacobian_scale(j.x, j.y, j, u, v, theta);
  if (js > 0.0 && std::abs(jac) <= 1e-3 * js) {
    double du = u, dv = v;
    deflated_polish(j, theta, du, dv);
    const Residuals before = residuals(j, theta, u, v);
    const Residuals after = residuals(j, theta, du, dv);
    if (after.merit() <= std::max(before.merit(), 1e-14)) {
      u = du;
      v = dv;
    }
  }
}

// Multiple roots of p are ill-conditioned, but a root of multiplicity m is
// a simple root of the (m-1)-th derivative. Raises the multiplicity while
// Newton on the next derivative stays close and the lower ones vanish.
struct Refined {
  double t = 0.0;
  int multiplicity = 1;
};

Refined refine_multiplicity(const Polynomial& p, double t0) {
  std::vector<Polynomial> d{p};
  for (int k = 0; k < 4; ++k) d.push_back(d.back().derivative());
  Refined best{t0, 1};
  for (int k = 1; k <= 3; ++k) {
    double t = t0;
    for (int it = 0; it < 50; ++it) {
      const double g = d[k + 1](t);
      if (g == 0.0 || !std::isfinite(g)) break;
      const double step = d[k](t) / g;
      t -= step;
      if (std::abs(step) <= 1e-16 * (1.0 + std::abs(t))) break;
    }
    if (!std::isfinite(t) || std::abs(t - t0) > 1e-3 * (1.0 + std::abs(t0))) break;
    bool vanish = true;
    for (int i = 0; i < k; ++i)
      vanish = vanish && std::abs(d[i](t)) <= 1e-13 * d[i].magnitude(t);
    if (!vanish) break;
    best = {t, k + 1};
  }
  return best;
}

bool accepted(const Jet4& j, double theta, const SolveOptions& opt, double u,
              double v) {
  if (!std::isfinite(u) || !std::isfinite(v) || (u == 0.0 && v == 0.0)) return false;
  const Residuals r = residuals(j, theta, u, v);
  return std::abs(r.c1) <= opt.root_tol * r.s1 && std::abs(r.c2) <= opt.root_tol * r.s2;
}

void add_unique(std::vector<ContactRoot>& roots, const ContactRoot& c) {
  for (ContactRoot& r : roots) {
    const double d = std::hypot(r.u - c.u, r.v - c.v);
    if (d <= 1e-7 * (1.0 + std::hypot(c.u, c.v))) {
      r.multiple = r.multiple || c.multiple;
      return;
    }
  }
  roots.push_back(c);
}

void sort_roots(std::vector<ContactRoot>& roots) {
  std::stable_sort(roots.begin(), roots.end(), [](const ContactRoot& a, const ContactRoot& b) {
    return std::abs(a.c3) < std::abs(b.c3);
  });
}

std::vector<ContactRoot> theta_family(const Jet4& j, double theta, const SolveOptions& opt) {
  std::vector<ContactRoot> fam;
  const double s = j.x * j.x + j.y * j.y + 1.0, tn = std::tan(theta);
  for (int k = 0; k < opt.family_samples; ++k) {
    const double phi = 2.0 * M_PI * k / opt.family_samples;
    const double e = tn - j.x * std::cos(phi) - j.y * std::sin(phi);
    if (std::abs(e) < 1e-12) continue;
    ContactRoot r;
    r.u = s / (2.0 * e) * std::cos(phi);
    r.v = s / (2.0 * e) * std::sin(phi);
    evaluate_root(j, theta, opt, r);
    fam.push_back(r);
  }
  return fam;
}

}  // namespace

double theta_residual(double x, double y, double u, double v, double theta) {
  const double l = lin(x, y, u, v);
  const double t = std::tan(theta);
  return l * l - 4.0 * t * t * (u * u + v * v);
}

double hyper_residual(const Jet4& j, double u, double v) {
  return j.fxxx * v * v * v - 3.0 * j.fxxy * v * v * u + 3.0 * j.fxyy * v * u * u -
         j.fyyy * u * u * u + 3.0 * (j.fxx - j.fyy) * u * v +
         3.0 * j.fxy * (v * v - u * u);
}

double order4_residual(const Jet4& j, double u, double v) {
  const double u2 = u * u, v2 = v * v;
  return j.fxxxx * v2 * v2 - 4.0 * j.fxxxy * v2 * v * u + 6.0 * j.fxxyy * v2 * u2 -
         4.0 * j.fxyyy * v * u2 * u + j.fyyyy * u2 * u2 + 6.0 * u * v2 * j.fxxx +
         6.0 * v * (v2 - 2.0 * u2) * j.fxxy + 6.0 * u * (u2 - 2.0 * v2) * j.fxyy +
         6.0 * u2 * v * j.fyyy + 3.0 * (u2 - v2) * (j.fxx - j.fyy) + 12.0 * u * v * j.fxy;
}

double multiplicity_jacobian(double x, double y, const Jet4& j, double u, double v,
                             double theta) {
  double tu, tv;
  half_gradient(x, y, u, v, theta, tu, tv);
  return j.fxxx * v * v * tu + j.fxxy * v * (v * tv - 2.0 * u * tu) +
         j.fxyy * u * (u * tu - 2.0 * v * tv) + j.fyyy * u * u * tv +
         (j.fxx - j.fyy) * (u * tu - v * tv) + 2.0 * j.fxy * (u * tv + v * tu);
}

double theta_scale(double x, double y, double u, double v, double theta) {
  const double l = x * x + y * y + 1.0 + 2.0 * std::abs(x * u) + 2.0 * std::abs(y * v);
  const double t = std::tan(theta);
  return l * l + 4.0 * t * t * (u * u + v * v);
}

double hyper_scale(const Jet4& j, double u, double v) {
  const double au = std::abs(u), av = std::abs(v);
  return std::abs(j.fxxx) * av * av * av + 3.0 * std::abs(j.fxxy) * av * av * au +
         3.0 * std::abs(j.fxyy) * av * au * au + std::abs(j.fyyy) * au * au * au +
         3.0 * std::abs(j.fxx - j.fyy) * au * av + 3.0 * std::abs(j.fxy) * (au * au + av * av);
}

double jacobian_scale(double x, double y, const Jet4& j, double u, double v,
                      double theta) {
  const double t2 = std::tan(theta) * std::tan(theta);
  const double l = x * x + y * y + 1.0 + 2.0 * std::abs(x * u) + 2.0 * std::abs(y * v);
  const double tu = 2.0 * std::abs(x) * l + 4.0 * std::abs(u) * t2;
  const double tv = 2.0 * std::abs(y) * l + 4.0 * std::abs(v) * t2;
  const double au = std::abs(u), av = std::abs(v);
  return std::abs(j.fxxx) * av * av * tu + std::abs(j.fxxy) * av * (av * tv + 2.0 * au * tu) +
         std::abs(j.fxyy) * au * (au * tu + 2.0 * av * tv) + std::abs(j.fyyy) * au * au * tv +
         std::abs(j.fxx - j.fyy) * (au * tu + av * tv) + 2.0 * std::abs(j.fxy) * (au * tv + av * tu);
}

Polynomial hyper_polynomial(const Jet4& j, double theta) {
  const double tn = std::tan(theta);
  const double s = j.x * j.x + j.y * j.y + 1.0;
  const Polynomial a{-1.0, 0.0, 1.0};
  const Polynomial t{0.0, 1.0};
  const Polynomial a2 = a * a;
  const Polynomial cubic = j.fxxx * (a2 * a) - 6.0 * j.fxxy * (a2 * t) +
                           12.0 * j.fxyy * (a * t * t) - 8.0 * j.fyyy * (t * t * t);
  const Polynomial quad = 2.0 * (j.fxx - j.fyy) * Polynomial{0.0, -1.0, 0.0, 1.0} +
                          j.fxy * Polynomial{1.0, 0.0, -6.0, 0.0, 1.0};
  const Polynomial d{j.y + tn, -2.0 * j.x, tn - j.y};
  Polynomial p = s * cubic + 6.0 * (quad * d);
  std::vector<double> c = p.coeffs();
  c.resize(7, 0.0);
  return Polynomial(std::move(c));
}

void evaluate_root(const Jet4& j, double theta, const SolveOptions& opt, ContactRoot& r) {
  r.c1 = theta_residual(j.x, j.y, r.u, r.v, theta);
  r.c2 = hyper_residual(j, r.u, r.v);
  r.c3 = order4_residual(j, r.u, r.v);
  r.jacobian = multiplicity_jacobian(j.x, j.y, j, r.u, r.v, theta);
  r.multiple = r.multiple ||
               std::abs(r.jacobian) <= opt.multiple_tol * jacobian_scale(j.x, j.y, j, r.u, r.v, theta);
  r.order4 = std::abs(r.c3) <= opt.order4_tol;
}

SolveReport solve_hyperosculating(const Jet4& j, double theta, const SolveOptions& opt) {
  SolveReport rep;
  const double x = j.x, y = j.y;
  const double tn = std::tan(theta);
  const double s = x * x + y * y + 1.0;
  const Polynomial p = hyper_polynomial(j, theta);
  rep.coefficients = p.coeffs();

  const double jet_scale = std::max({1.0, std::abs(j.fxx), std::abs(j.fyy), std::abs(j.fxy)});
  const double cmax = p.max_abs_coeff();
  if (cmax <= opt.zero_tol * s * jet_scale * (1.0 + std::abs(tn) + std::abs(x) + std::abs(y))) {
    rep.identically_zero = true;
    rep.family = theta_family(j, theta, opt);
    return rep;
  }
  const double lead = rep.coefficients[6];
  rep.degenerate_leading = std::abs(lead) <= opt.degenerate_tol * cmax;

  std::vector<ContactRoot> roots;
  auto consider = [&](double u, double v, double t, bool at_inf, bool multiple,
                      bool do_polish = true) {
    if (do_polish) polish(j, theta, u, v);
    if (!accepted(j, theta, opt, u, v)) return;
    ContactRoot r;
    r.u = u;
    r.v = v;
    r.t = t;
    r.at_infinity = at_inf;
    r.multiple = multiple;
    evaluate_root(j, theta, opt, r);
    add_unique(roots, r);
  };

  const Polynomial pt = p.trimmed(1e-14);
  for (const RealRoot& rr : real_roots(pt)) {
    const Refined ref = refine_multiplicity(pt, rr.t);
    const bool multiple = rr.multiple || ref.multiplicity > 1;
    const double t = ref.multiplicity > 1 ? ref.t : rr.t;
    const double d = t * t * (tn - y) - 2.0 * t * x + (y + tn);
    const double dscale = std::abs(tn - y) * t * t + 2.0 * std::abs(t * x) + std::abs(y + tn);
    if (std::abs(d) > 1e-12 * dscale) {
      const double lam = s / (2.0 * d);
      // The 2-D polish cannot improve on a multiple root located in t.
      consider(lam * 2.0 * t, lam * (t * t - 1.0), t, false, multiple, ref.multiplicity == 1);
    } else {
      // The scale blows up along this direction; try a finite seed.
      const double w = std::hypot(2.0 * t, t * t - 1.0);
      consider(s * 2.0 * t / w, s * (t * t - 1.0) / w, t, false, multiple);
    }
  }
  // Direction (0 : 1), which the t-parametrization reaches only as t -> inf.
  if (std::abs(tn - y) > 1e-12 * (std::abs(tn) + std::abs(y))) {
    const double vv = s / (2.0 * (tn - y));
    if (std::abs(hyper_residual(j, 0.0, vv)) <= 1e-6 * hyper_scale(j, 0.0, vv) ||
        rep.degenerate_leading)
      consider(0.0, vv, std::numeric_limits<double>::infinity(), true, false);
  }
  sort_roots(roots);
  rep.roots = std::move(roots);
  return rep;
}

SolveReport oracle_solve(const Jet4& j, double theta, int n_angles, const SolveOptions& opt) {
  SolveReport rep;
  const double x = j.x, y = j.y;
  const double tn = std::tan(theta);
  const double s = x * x + y * y + 1.0;
  n_angles = std::max(n_angles, 360);

  struct Probe {
    double e, g;
  };
  auto probe = [&](double phi) {
    const double c = std::cos(phi), sn = std::sin(phi);
    const double e = tn - x * c - y * sn;
    const double lam = s / (2.0 * e);
    return Probe{e, hyper_residual(j, lam * c, lam * sn)};
  };

  std::vector<Probe> pr(static_cast<std::size_t>(n_angles) + 1);
  bool all_zero = true;
  for (int k = 0; k <= n_angles; ++k) {
    pr[static_cast<std::size_t>(k)] = probe(2.0 * M_PI * k / n_angles);
    const Probe& q = pr[static_cast<std::size_t>(k)];
    const double lam = s / (2.0 * q.e);
    const double c = std::cos(2.0 * M_PI * k / n_angles), sn = std::sin(2.0 * M_PI * k / n_angles);
    if (std::abs(q.g) > 1e-12 * std::max(hyper_scale(j, lam * c, lam * sn), 1e-300) &&
        std::isfinite(q.g))
      all_zero = false;
  }
  if (all_zero) {
    rep.identically_zero = true;
    rep.family = theta_family(j, theta, opt);
    return rep;
  }

  std::vector<ContactRoot> roots;
  // Bisects a sign change of g on [lo, hi], where e keeps one sign.
  auto bracket = [&](double lo, double hi, double glo) {
    while (hi - lo > 1e-12 * std::max(1.0, std::abs(lo))) {
      const double mid = 0.5 * (lo + hi);
      const double gm = probe(mid).g;
      if (gm == 0.0) return mid;
      if ((gm > 0.0) == (glo > 0.0)) {
        lo = mid;
        glo = gm;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };
  auto accept = [&](double phi) {
    const double e = tn - x * std::cos(phi) - y * std::sin(phi);
    ContactRoot r;
    r.u = s / (2.0 * e) * std::cos(phi);
    r.v = s / (2.0 * e) * std::sin(phi);
    r.t = std::tan(0.5 * phi + 0.25 * M_PI);
    evaluate_root(j, theta, opt, r);
    add_unique(roots, r);
  };
  // Scans consecutive angles for sign changes of g.
  auto scan = [&](const std::vector<double>& phis) {
    for (std::size_t i = 0; i + 1 < phis.size(); ++i) {
      const Probe a = probe(phis[i]), b = probe(phis[i + 1]);
      if (!(a.e * b.e > 0.0) || !std::isfinite(a.g) || !std::isfinite(b.g)) continue;
      if (a.g == 0.0) accept(phis[i]);
      else if ((a.g > 0.0) != (b.g > 0.0)) accept(bracket(phis[i], phis[i + 1], a.g));
    }
  };
  for (int k = 0; k < n_angles; ++k) {
    const Probe a = pr[static_cast<std::size_t>(k)], b = pr[static_cast<std::size_t>(k) + 1];
    const double lo = 2.0 * M_PI * k / n_angles, hi = 2.0 * M_PI * (k + 1) / n_angles;
    if (a.e * b.e > 0.0) {
      scan({lo, hi});
      continue;
    }
    // Pole cell: locate e = 0, then probe geometrically toward it from each
    // side so roots of large scale are bracketed.
    double plo = lo, phi_ = hi;
    const bool lo_pos = a.e > 0.0;
    for (int it = 0; it < 200 && phi_ - plo > 1e-15; ++it) {
      const double mid = 0.5 * (plo + phi_);
      ((probe(mid).e > 0.0) == lo_pos ? plo : phi_) = mid;
    }
    const double pole = 0.5 * (plo + phi_);
    std::vector<double> left{lo}, right;
    for (int m = 1; m <= 14; ++m) {
      const double d = std::pow(10.0, -m);
      if (pole - (pole - lo) * d > lo) left.push_back(pole - (pole - lo) * d);
    }
    for (int m = 14; m >= 1; --m) right.push_back(pole + (hi - pole) * std::pow(10.0, -m));
    right.push_back(hi);
    scan(left);
    scan(right);
  }
  sort_roots(roots);
  rep.roots = std::move(roots);
  return rep;
}

ContactOrder contact_order_estimate(const ConicCandidate& c,
                                    const std::function<double(double, double)>& f) {
  constexpr int kProbes = 11;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  bool contained = true;
  for (int k = 0; k < kProbes; ++k) {
    const double t = 0.01 * std::pow(10.0, static_cast<double>(k) / (kProbes - 1));
    const double gap = std::abs(c.pz(t) - f(c.px(t), c.py(t)));
    if (!(gap < 1e-12)) contained = false;
    if (gap > 0.0 && std::isfinite(gap)) {
      const double lx = std::log(t), ly = std::log(gap);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++n;
    }
  }
  ContactOrder out;
  out.contained = contained;
  if (contained || n < 2) {
    out.slope = std::numeric_limits<double>::infinity();
    return out;
  }
  out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return out;
}

}  // namespace coneflank
