#include "anosov/model.hpp"

#include <cmath>
#include <cstdio>

namespace anosov {

Vec3 cat_unstable_dir() {
  double phi = (std::sqrt(5.0) - 1.0) / 2.0;  // A (1,phi) = lam_plus (1,phi)
  double n = std::sqrt(1.0 + phi * phi);
  return {1.0 / n, phi / n, 0.0};
}

Vec3 cat_stable_dir() {
  double psi = (std::sqrt(5.0) + 1.0) / 2.0;  // A (1,-psi) = lam_minus (1,-psi)
  double n = std::sqrt(1.0 + psi * psi);
  return {1.0 / n, -psi / n, 0.0};
}

// sin^4 window: C^3 across the support boundary (vanishes to 4th order).
double bump_window(double s) {
  if (s <= 0.1 || s >= 0.9) return 0.0;
  double t = std::sin(kPi * (s - 0.1) / 0.8);
  return t * t * t * t;
}

double bump_window_d(double s) {
  if (s <= 0.1 || s >= 0.9) return 0.0;
  double a = kPi / 0.8;
  double u = a * (s - 0.1);
  double t = std::sin(u);
  return 4.0 * a * t * t * t * std::cos(u);
}

Jet bump_window(const Jet& s) {
  if (s.value() <= 0.1 || s.value() >= 0.9) return Jet(0.0, s.ord);
  Jet u = (s - 0.1) * (kPi / 0.8);
  Jet t = sin(u);
  Jet t2 = t * t;
  return t2 * t2;
}

Jet bump_window_d(const Jet& s) {
  if (s.value() <= 0.1 || s.value() >= 0.9) return Jet(0.0, s.ord);
  Jet u = (s - 0.1) * (kPi / 0.8);
  Jet t = sin(u), c = cos(u);
  return t * t * t * c * (4.0 * kPi / 0.8);
}

std::string FlowModel::id() const {
  std::string s = metric == BaseMetric::canonical ? "cat-canonical" : "cat-wobbled";
  if (roof != 1.0) {
    char buf[48];
    std::snprintf(buf, sizeof buf, ",roof=%.6g", roof);
    s += buf;
  }
  if (pert.eta != 0.0) {
    char buf[48];
    std::snprintf(buf, sizeof buf, ",eta=%+.6g", pert.eta);
    s += buf;
  }
  return s;
}

double FlowModel::c_star() const {
  double base = metric == BaseMetric::canonical ? 1.0 : std::sqrt(0.7 / 1.3);
  return base;
}

double FlowModel::c_one() const {
  double base = metric == BaseMetric::canonical ? 1.0 : 1.0 / 0.7;
  // widen for the perturbed flow speed (conservative; sampled checks confirm)
  return base * (1.0 + 6.0 * std::abs(pert.eta));
}

Vec3 FlowModel::normalize(Vec3 p) const {
  // roof crossings act on the base by the cat map (or its inverse, downward)
  int guard = 0;
  while (p.z >= roof && guard++ < 100000) {
    p.z -= roof;
    double x = 2.0 * p.x + p.y, y = p.x + p.y;
    p.x = x; p.y = y;
  }
  while (p.z < 0.0 && guard++ < 100000) {
    p.z += roof;
    double x = p.x - p.y, y = -p.x + 2.0 * p.y;
    p.x = x; p.y = y;
  }
  p.x -= std::floor(p.x);
  p.y -= std::floor(p.y);
  return p;
}

Mat3 FlowModel::deck() {
  Mat3 m = Mat3::zero();
  m(0, 0) = 2; m(0, 1) = 1;
  m(1, 0) = 1; m(1, 1) = 1;
  m(2, 2) = 1;
  return m;
}

Mat3 FlowModel::deck_inv() {
  Mat3 m = Mat3::zero();
  m(0, 0) = 1; m(0, 1) = -1;
  m(1, 0) = -1; m(1, 1) = 2;
  m(2, 2) = 1;
  return m;
}

Mat3 FlowModel::base_power(double s, double exponent_scale) const {
  const Vec3 eu = cat_unstable_dir(), es = cat_stable_dir();
  double a = std::pow(lam_plus(), s * exponent_scale);
  Mat3 m = outer(eu, eu) * a + outer(es, es) * (1.0 / a);
  m(2, 2) = 1.0;
  return m;
}

double FlowModel::wobble(const Vec3& p) const {
  if (metric == BaseMetric::canonical) return 1.0;
  return 1.0 + 0.3 * std::sin(2.0 * kPi * p.z / roof) * std::cos(2.0 * kPi * p.x);
}

Mat3 FlowModel::gram_ref(const Vec3& p) const {
  Mat3 g = base_power(p.z / roof, 2.0);
  if (metric == BaseMetric::wobbled) g = g * wobble(p);
  return g;
}

Mat3 FlowModel::gram_ref_flow_derivative(const Vec3& p) const {
  const Vec3 eu = cat_unstable_dir(), es = cat_stable_dir();
  double rate = 2.0 * log_lam_plus() / roof;
  double a = std::pow(lam_plus(), 2.0 * p.z / roof);
  Mat3 dg = outer(eu, eu) * (rate * a) - outer(es, es) * (rate / a);
  if (metric == BaseMetric::canonical) return dg;
  double w = wobble(p);
  double dw = 0.3 * (2.0 * kPi / roof) * std::cos(2.0 * kPi * p.z / roof) *
              std::cos(2.0 * kPi * p.x);
  return dg * w + gram_ref(p) * (dw / w);
}

FlowModel FlowModel::with_eta(double eta) const {
  if (pert.eta_cap == 0.0 && eta != 0.0)
    throw std::invalid_argument("with_eta: no perturbation family attached");
  if (std::abs(eta) > pert.eta_cap + 1e-15)
    throw std::invalid_argument("with_eta: |eta| exceeds the family cap");
  FlowModel m = *this;
  m.pert.eta = eta;
  return m;
}

FlowModel make_cat_model(BaseMetric metric) {
  FlowModel m;
  m.metric = metric;
  m.roof = 1.0;
  m.smoothness = 2;
  return m;
}

Vec3 perturb_partial(const FlowModel& m, int a1, int a2, int b, const Vec3& p) {
  const Vec3 eu = cat_unstable_dir(), es = cat_stable_dir();
  const double lam = log_lam_plus() / m.roof;
  const auto& q = m.pert;

  // exponential tilts: only s-derivatives survive
  double cu = 0.0, cs = 0.0;
  if (a1 == 0 && a2 == 0) {
    cu = q.amp_u * std::pow(-lam, b) * std::exp(-lam * p.z);
    cs = q.amp_s * std::pow(lam, b) * std::exp(lam * p.z);
  }

  // windowed oscillating terms: products of univariate factors
  double chi_b;  // b-th derivative of chi(s/roof) wrt s
  {
    Jet u = Jet::variable(p.z / m.roof, b);
    chi_b = bump_window(u).deriv(b) / std::pow(m.roof, b);
  }
  double tx = std::pow(2.0 * kPi, a1) *
              std::sin(2.0 * kPi * p.x + 0.7 + a1 * kPi / 2.0);
  double ty = std::pow(2.0 * kPi, a2) *
              std::cos(2.0 * kPi * p.y - 0.4 + a2 * kPi / 2.0);
  double cv = q.amp_u_var * chi_b * tx * ty;

  double fx = std::pow(2.0 * kPi, a1) *
              std::sin(2.0 * kPi * p.x - 0.5 + a1 * kPi / 2.0);
  double cf = (a2 == 0) ? q.amp_f * chi_b * fx : 0.0;

  Vec3 out;
  out.x = (cu + cv) * eu.x + cs * es.x;
  out.y = (cu + cv) * eu.y + cs * es.y;
  out.z = cf;
  return out;
}

double sampled_c_r1_certificate(const FlowModel& m, int order) {
  double cert = 0.0;
  const int nx = 16, ns = 32;
  for (int a1 = 0; a1 <= order; ++a1)
    for (int a2 = 0; a1 + a2 <= order; ++a2)
      for (int b = 0; a1 + a2 + b <= order; ++b)
        for (int i = 0; i <= nx; ++i)
          for (int j = 0; j <= nx; ++j)
            for (int k = 0; k <= ns; ++k) {
              Vec3 p = {double(i) / nx, double(j) / nx,
                        m.roof * double(k) / ns};
              Vec3 d = perturb_partial(m, a1, a2, b, p);
              cert = std::max(cert, std::max(std::abs(d.x),
                              std::max(std::abs(d.y), std::abs(d.z))));
            }
  return cert;
}

FlowModel perturbed_model(const FlowModel& base, double eta, double eta_cap) {
  if (std::abs(eta) > eta_cap + 1e-15)
    throw std::invalid_argument("perturbed_model: |eta| exceeds eta_cap");
  FlowModel m = base;
  m.pert.amp_u = 0.78;
  m.pert.amp_s = 0.055;
  m.pert.amp_u_var = 5e-5;
  m.pert.amp_f = 5e-5;
  m.pert.eta = 0.0;
  m.pert.eta_cap = eta_cap;
  double cert = sampled_c_r1_certificate(m, m.smoothness + 1);
  if (cert > 1.0) {
    double s = (1.0 - 1e-12) / cert;
    m.pert.amp_u *= s;
    m.pert.amp_s *= s;
    m.pert.amp_u_var *= s;
    m.pert.amp_f *= s;
    cert *= s;
  }
  m.pert.c_r1_certificate = cert;
  m.pert.eta = eta;
  return m;
}

}  // namespace anosov
