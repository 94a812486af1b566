#pragma once
// Univariate truncated Taylor arithmetic ("jets") of fixed capacity.
// Used to transport leaf parametrizations, frame charts and transform blocks
// through the flow to machine precision; leaves are one-dimensional here so
// a single variable suffices.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "anosov/smallmat.hpp"

namespace anosov {

inline constexpr int kJetCap = 8;  // coefficients 0..7, plenty for order r+1 <= 4

struct Jet {
  // f(xi) = sum_k c[k] xi^k, truncated beyond `ord`
  std::array<double, kJetCap> c{};
  int ord = 0;

  Jet() = default;
  Jet(double v, int order) : ord(order) { c[0] = v; }

  static Jet variable(double v, int order) {
    Jet j(v, order);
    if (order >= 1) j.c[1] = 1.0;
    return j;
  }
  static Jet constant(double v, int order) { return Jet(v, order); }

  double value() const { return c[0]; }
  // k-th derivative at 0
  double deriv(int k) const {
    double f = 1;
    for (int i = 2; i <= k; ++i) f *= i;
    return c[k] * f;
  }

  Jet operator-() const {
    Jet r = *this;
    for (int k = 0; k <= ord; ++k) r.c[k] = -r.c[k];
    return r;
  }
  Jet operator+(const Jet& o) const {
    Jet r = *this;
    for (int k = 0; k <= ord; ++k) r.c[k] += o.c[k];
    return r;
  }
  Jet operator-(const Jet& o) const {
    Jet r = *this;
    for (int k = 0; k <= ord; ++k) r.c[k] -= o.c[k];
    return r;
  }
  Jet operator*(const Jet& o) const {
    Jet r(0.0, ord);
    for (int i = 0; i <= ord; ++i) {
      if (c[i] == 0.0) continue;
      for (int j = 0; i + j <= ord; ++j) r.c[i + j] += c[i] * o.c[j];
    }
    return r;
  }
  Jet operator+(double v) const { Jet r = *this; r.c[0] += v; return r; }
  Jet operator-(double v) const { Jet r = *this; r.c[0] -= v; return r; }
  Jet operator*(double v) const {
    Jet r = *this;
    for (int k = 0; k <= ord; ++k) r.c[k] *= v;
    return r;
  }
  Jet operator/(double v) const { return *this * (1.0 / v); }
  Jet& operator+=(const Jet& o) { for (int k = 0; k <= ord; ++k) c[k] += o.c[k]; return *this; }
  Jet& operator-=(const Jet& o) { for (int k = 0; k <= ord; ++k) c[k] -= o.c[k]; return *this; }

  Jet operator/(const Jet& o) const { return *this * recip(o); }

  static Jet recip(const Jet& o) {
    if (o.c[0] == 0.0) throw std::domain_error("jet reciprocal at zero");
    Jet r(1.0 / o.c[0], o.ord);
    // r = (1/a0) * sum_m (-(a - a0)/a0)^m composed; iterate coefficient-wise
    for (int k = 1; k <= o.ord; ++k) {
      double s = 0;
      for (int j = 1; j <= k; ++j) s += o.c[j] * r.c[k - j];
      r.c[k] = -s / o.c[0];
    }
    return r;
  }
};

inline Jet operator*(double v, const Jet& j) { return j * v; }
inline Jet operator+(double v, const Jet& j) { return j + v; }
inline Jet operator-(double v, const Jet& j) { return (-j) + v; }

// Analytic primitives via the classical Taylor recurrences.
inline Jet exp(const Jet& x) {
  Jet r(std::exp(x.c[0]), x.ord);
  for (int k = 1; k <= x.ord; ++k) {
    double s = 0;
    for (int j = 1; j <= k; ++j) s += j * x.c[j] * r.c[k - j];
    r.c[k] = s / k;
  }
  return r;
}

inline void sincos(const Jet& x, Jet& s, Jet& c) {
  s = Jet(std::sin(x.c[0]), x.ord);
  c = Jet(std::cos(x.c[0]), x.ord);
  for (int k = 1; k <= x.ord; ++k) {
    double as = 0, ac = 0;
    for (int j = 1; j <= k; ++j) {
      as += j * x.c[j] * c.c[k - j];
      ac += j * x.c[j] * s.c[k - j];
    }
    s.c[k] = as / k;
    c.c[k] = -ac / k;
  }
}

inline Jet sin(const Jet& x) { Jet s, c; sincos(x, s, c); return s; }
inline Jet cos(const Jet& x) { Jet s, c; sincos(x, s, c); return c; }

inline Jet sqrt(const Jet& x) {
  Jet r(std::sqrt(x.c[0]), x.ord);
  for (int k = 1; k <= x.ord; ++k) {
    double s = 0;
    for (int j = 1; j < k; ++j) s += r.c[j] * r.c[k - j];
    r.c[k] = (x.c[k] - s) / (2.0 * r.c[0]);
  }
  return r;
}

// g(f(xi)) for f with f(0) arbitrary: g must be given as jet around f(0).
inline Jet compose(const Jet& g, const Jet& f) {
  Jet dx = f;
  dx.c[0] = 0.0;  // g expects deviation from its expansion point
  Jet r(g.c[0], f.ord);
  Jet p(1.0, f.ord);
  for (int k = 1; k <= g.ord && k <= f.ord; ++k) {
    p = p * dx;
    r += p * g.c[k];
  }
  return r;
}

// Inverse series of f with f(0)=0, f'(0) != 0: returns h with h(f(xi)) = xi.
inline Jet invert(const Jet& f) {
  if (f.c[0] != 0.0) throw std::domain_error("jet inversion needs f(0)=0");
  if (f.c[1] == 0.0) throw std::domain_error("jet inversion needs f'(0)!=0");
  Jet h(0.0, f.ord);
  h.c[1] = 1.0 / f.c[1];
  // Newton on series: iterate h <- h - (f(h) - id) / f'(h); quadratic, but a
  // simple order-by-order solve is clearer at this tiny capacity.
  for (int k = 2; k <= f.ord; ++k) {
    // coefficient of xi^k in f(h(xi)) must vanish
    Jet fh = compose(f, h);
    h.c[k] -= fh.c[k] / f.c[1];
  }
  return h;
}

using JV3 = V3<Jet>;
using JM3 = M3<Jet>;

}  // namespace anosov
