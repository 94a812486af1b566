#include "anosov/leaves.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "anosov/cones.hpp"
#include "anosov/rng.hpp"

namespace anosov {

namespace {

// Taylor coefficients of g' from those of g (one order shorter)
Jet jet_d(const Jet& g) {
  Jet d = Jet::constant(0.0, std::max(0, g.ord - 1));
  for (int k = 0; k + 1 <= g.ord; ++k) d.c[k] = g.c[k + 1] * (k + 1);
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// Chebyshev utilities.

std::vector<double> cheb_nodes(double lo, double hi, int n) {
  if (n < 2) throw std::invalid_argument("cheb_nodes: need at least 2 nodes");
  std::vector<double> x(n);
  double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  for (int k = 0; k < n; ++k) x[k] = mid - half * std::cos(kPi * k / (n - 1));
  x.front() = lo;
  x.back() = hi;
  return x;
}

std::vector<double> cheb_coeffs(const std::vector<double>& values) {
  int n = (int)values.size();
  if (n < 2) throw std::invalid_argument("cheb_coeffs: need at least 2 values");
  int m = n - 1;
  std::vector<double> c(n, 0.0);
  for (int k = 0; k <= m; ++k) {
    double sum = 0.0;
    for (int j = 0; j <= m; ++j) {
      // our abscissae ascend, the classical transform descends: reverse
      double w = values[m - j] * std::cos(kPi * j * k / m);
      if (j == 0 || j == m) w *= 0.5;
      sum += w;
    }
    c[k] = 2.0 * sum / m;
    if (k == 0 || k == m) c[k] *= 0.5;
  }
  return c;
}

double cheb_eval(const std::vector<double>& coeffs, double lo, double hi,
                 double x) {
  double u = (2.0 * x - lo - hi) / (hi - lo);
  double b1 = 0.0, b2 = 0.0;
  for (int k = (int)coeffs.size() - 1; k >= 1; --k) {
    double b0 = 2.0 * u * b1 - b2 + coeffs[k];
    b2 = b1;
    b1 = b0;
  }
  return u * b1 - b2 + coeffs[0];
}

std::vector<double> cheb_derivative(const std::vector<double>& coeffs,
                                    double lo, double hi) {
  int n = (int)coeffs.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  double scale = 2.0 / (hi - lo);
  // d_{k-1} = d_{k+1} + 2k c_k, downward; the k = 0 slot is halved
  for (int k = n - 1; k >= 1; --k)
    d[k - 1] = (k + 1 <= n - 1 ? d[k + 1] : 0.0) + 2.0 * k * coeffs[k];
  d[0] *= 0.5;
  for (double& v : d) v *= scale;
  d.resize(n - 1 > 0 ? n - 1 : 1);
  return d;
}

std::vector<double> cheb_antiderivative(const std::vector<double>& coeffs,
                                        double lo, double hi) {
  int n = (int)coeffs.size();
  std::vector<double> a(n + 1, 0.0);
  double scale = 0.5 * (hi - lo);
  auto c = [&](int k) { return k < n ? coeffs[k] : 0.0; };
  a[1] = scale * (c(0) - 0.5 * c(2));
  for (int j = 2; j <= n; ++j) a[j] = scale * (c(j - 1) - c(j + 1)) / (2.0 * j);
  // pin F(lo) = 0
  double at_lo = 0.0, sign = -1.0;
  for (int j = 1; j <= n; ++j, sign = -sign) at_lo += a[j] * sign;
  a[0] = -at_lo;
  return a;
}

Jet cheb_jet(const std::vector<double>& coeffs, double lo, double hi, double x,
             int ord) {
  Jet out = Jet::constant(0.0, ord);
  std::vector<double> cur = coeffs;
  double fact = 1.0;
  for (int k = 0; k <= ord; ++k) {
    if (k > 0) {
      cur = cheb_derivative(cur, lo, hi);
      fact *= k;
    }
    out.c[k] = cheb_eval(cur, lo, hi, x) / fact;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Leaf geometry.

Vec3 AdmissibleLeaf::point(double xi) const {
  Vec3 c(xi, cheb_eval(cu, lo, hi, xi), cheb_eval(cf, lo, hi, xi));
  return frame.origin + frame.map * c;
}

Vec3 AdmissibleLeaf::tangent(double xi) const {
  std::vector<double> du = cheb_derivative(cu, lo, hi);
  std::vector<double> df = cheb_derivative(cf, lo, hi);
  Vec3 c(1.0, cheb_eval(du, lo, hi, xi), cheb_eval(df, lo, hi, xi));
  return frame.map * c;
}

JV3 AdmissibleLeaf::jet_curve(double xi, int ord) const {
  Jet ju = cheb_jet(cu, lo, hi, xi, ord);
  Jet jf = cheb_jet(cf, lo, hi, xi, ord);
  Jet jx = Jet::constant(xi, ord);
  if (ord >= 1) jx.c[1] = 1.0;
  JV3 out;
  Jet* slots[3] = {&out.x, &out.y, &out.z};
  const double* origin = &frame.origin.x;
  for (int i = 0; i < 3; ++i) {
    Jet g = jx * frame.map(i, 0) + ju * frame.map(i, 1) + jf * frame.map(i, 2);
    g.c[0] += origin[i];
    *slots[i] = g;
  }
  return out;
}

AdmissibleLeaf make_graph_leaf(const AdaptedFrame& frame, double lo, double hi,
                               const std::vector<double>& fu,
                               const std::vector<double>& ff) {
  if (fu.size() != ff.size() || fu.size() < 9)
    throw std::invalid_argument("graph leaf: bad node values");
  if (!(lo < 0.0 && hi > 0.0))
    throw std::invalid_argument("graph leaf: interval must contain 0");
  AdmissibleLeaf leaf;
  leaf.frame = frame;
  leaf.lo = lo;
  leaf.hi = hi;
  leaf.fu = fu;
  leaf.ff = ff;
  leaf.cu = cheb_coeffs(fu);
  leaf.cf = cheb_coeffs(ff);
  // Sanity bound on chart excursion.  Base offsets may exceed a period
  // (the adapted metric is strongly anisotropic, so short leaves can be
  // long in chart units); only the flow offset must stay below half the
  // roof so local re-glues keep an unambiguous deck count.
  auto nodes = cheb_nodes(lo, hi, (int)fu.size());
  for (size_t k = 0; k < fu.size(); ++k) {
    Vec3 off = leaf.point(nodes[k]) - frame.origin;
    if (std::abs(off.x) > 2.0 || std::abs(off.y) > 2.0 ||
        std::abs(off.z) > 0.45)
      throw std::runtime_error("graph leaf left its chart window");
  }
  return leaf;
}

std::vector<SplitData> leaf_node_data(const LeafContext& cx,
                                      const AdmissibleLeaf& leaf) {
  auto nodes = cheb_nodes(leaf.lo, leaf.hi, leaf.nodes());
  std::vector<SplitData> out(nodes.size());
  for (size_t k = 0; k < nodes.size(); ++k)
    out[k] = metric_two_data(*cx.base, cx.avg, *cx.stable, *cx.unstable,
                             leaf.point(nodes[k]), nullptr, cx.step);
  return out;
}

// ---------------------------------------------------------------------------
// Arc length.

double ArcTable::at(double xi) const {
  return cheb_eval(cum, lo, hi, xi) - arc_center;
}

double ArcTable::total() const {
  return cheb_eval(cum, lo, hi, hi);
}

double ArcTable::xi_at(double arc) const {
  double target = arc + arc_center;
  double a = lo, b = hi;
  double fa = cheb_eval(cum, lo, hi, a) - target;
  double fb = cheb_eval(cum, lo, hi, b) - target;
  if (fa > 0.0 || fb < 0.0)
    throw std::domain_error("arc table: arc outside the leaf");
  double x = a + (b - a) * (0.0 - fa) / (fb - fa);
  for (int it = 0; it < 100; ++it) {
    double f = cheb_eval(cum, lo, hi, x) - target;
    if (f > 0.0)
      b = x;
    else
      a = x;
    double df = cheb_eval(integ, lo, hi, x);
    double step = df > 0.0 ? f / df : 0.0;
    double xn = x - step;
    if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
    if (std::abs(xn - x) < 1e-15 * (hi - lo)) return xn;
    x = xn;
  }
  return x;
}

namespace {

// metric speed |G'(xi)|_2 sampled on a Lobatto grid; gram entries come from
// fresh splitting data at each sample
std::vector<double> arc_integrand(const LeafContext& cx,
                                  const AdmissibleLeaf& leaf,
                                  const std::vector<double>& xs) {
  std::vector<double> v(xs.size());
  for (size_t k = 0; k < xs.size(); ++k) {
    SplitData sd = metric_two_data(*cx.base, cx.avg, *cx.stable, *cx.unstable,
                                   leaf.point(xs[k]), nullptr, cx.step);
    Vec3 tan = leaf.tangent(xs[k]);
    v[k] = std::sqrt(std::max(0.0, dot(tan, sd.gram2 * tan)));
  }
  return v;
}

double series_tail(const std::vector<double>& c) {
  double tail = 0.0, peak = 0.0;
  for (size_t k = 0; k < c.size(); ++k) {
    peak = std::max(peak, std::abs(c[k]));
    if (k + 4 >= c.size()) tail += std::abs(c[k]);
  }
  return peak > 0.0 ? tail : 0.0;
}

}  // namespace

ArcTable leaf_arc(const LeafContext& cx, const AdmissibleLeaf& leaf,
                  double tol) {
  ArcTable tab;
  tab.lo = leaf.lo;
  tab.hi = leaf.hi;
  int n = leaf.nodes();
  auto xs = cheb_nodes(leaf.lo, leaf.hi, n);
  auto vals = arc_integrand(cx, leaf, xs);
  auto coeffs = cheb_coeffs(vals);
  // refine (nested Lobatto grids) until the series tail is negligible
  double err = series_tail(coeffs) * (leaf.hi - leaf.lo);
  int guard = 0;
  while (err > 0.1 * tol && n < 300 && guard++ < 4) {
    int n2 = 2 * n - 1;
    auto xs2 = cheb_nodes(leaf.lo, leaf.hi, n2);
    std::vector<double> v2(n2);
    std::vector<double> fresh_x;
    for (int k = 1; k < n2; k += 2) fresh_x.push_back(xs2[k]);
    auto fresh_v = arc_integrand(cx, leaf, fresh_x);
    for (int k = 0; k < n2; ++k)
      v2[k] = (k % 2 == 0) ? vals[k / 2] : fresh_v[k / 2];
    auto c2 = cheb_coeffs(v2);
    double drift = 0.0;
    for (int p = 0; p <= 8; ++p) {
      double x = leaf.lo + (leaf.hi - leaf.lo) * p / 8.0;
      drift = std::max(drift, std::abs(cheb_eval(c2, leaf.lo, leaf.hi, x) -
                                       cheb_eval(coeffs, leaf.lo, leaf.hi, x)));
    }
    n = n2;
    xs.swap(xs2);
    vals.swap(v2);
    coeffs.swap(c2);
    err = std::max(drift * (leaf.hi - leaf.lo),
                   series_tail(coeffs) * (leaf.hi - leaf.lo));
  }
  tab.integ = coeffs;
  tab.cum = cheb_antiderivative(coeffs, leaf.lo, leaf.hi);
  tab.arc_center = cheb_eval(tab.cum, leaf.lo, leaf.hi, 0.0);
  tab.refine_err = err;
  return tab;
}

AdmissibleLeaf trim_leaf(const LeafContext& cx, const AdmissibleLeaf& leaf,
                         double radius) {
  ArcTable arc = leaf_arc(cx, leaf);
  if (-arc.at(leaf.lo) < radius || arc.at(leaf.hi) < radius)
    throw std::runtime_error("leaf too short to trim to the requested radius");
  double xa = arc.xi_at(-radius), xb = arc.xi_at(radius);
  auto xs = cheb_nodes(xa, xb, leaf.nodes());
  std::vector<double> fu(xs.size()), ff(xs.size());
  for (size_t k = 0; k < xs.size(); ++k) {
    fu[k] = cheb_eval(leaf.cu, leaf.lo, leaf.hi, xs[k]);
    ff[k] = cheb_eval(leaf.cf, leaf.lo, leaf.hi, xs[k]);
  }
  AdmissibleLeaf out = make_graph_leaf(leaf.frame, xa, xb, fu, ff);
  out.arc_lo = -radius;
  out.arc_hi = radius;
  return out;
}

// ---------------------------------------------------------------------------
// Random admissible leaves.

AdmissibleLeaf random_leaf(const LeafContext& cx, Rng& rng, double frac) {
  cx.lp.validate();
  const LeafParams& lp = cx.lp;
  for (int attempt = 0; attempt < 40; ++attempt) {
    Vec3 z(rng.uniform(), rng.uniform(),
           cx.base->roof * (0.05 + 0.90 * rng.uniform()));
    double ju[kJetCap] = {0}, jf[kJetCap] = {0};
    for (int a = 1; a <= lp.jet_order; ++a) {
      double mag = frac * std::pow(lp.jet_m, a) * (0.25 + 0.75 * rng.uniform());
      double th = 2.0 * kPi * rng.uniform();
      ju[a] = mag * std::cos(th);
      jf[a] = mag * std::sin(th);
    }
    SplitData sd = metric_two_data(*cx.base, cx.avg, *cx.stable, *cx.unstable,
                                   z, nullptr, cx.step);
    AdaptedFrame fr = assemble_frame(sd.gram2, z, sd.e_s, sd.e_u,
                                     cx.base->vector_field(z));
    double len = 1.25 * lp.big_b * lp.delta;
    auto xs = cheb_nodes(-len, len, lp.nodes);
    std::vector<double> fu(xs.size()), ff(xs.size());
    for (size_t k = 0; k < xs.size(); ++k) {
      double su = 0.0, sf = 0.0, pw = 1.0, fact = 1.0;
      for (int a = 1; a <= lp.jet_order; ++a) {
        pw *= xs[k];
        fact *= (a + 1);
        su += ju[a] * pw * xs[k] / fact;
        sf += jf[a] * pw * xs[k] / fact;
      }
      fu[k] = su;
      ff[k] = sf;
    }
    try {
      AdmissibleLeaf raw = make_graph_leaf(fr, -len, len, fu, ff);
      ArcTable arc = leaf_arc(cx, raw);
      double radius = lp.big_b * lp.delta;
      if (-arc.at(raw.lo) < radius || arc.at(raw.hi) < radius) continue;
      AdmissibleLeaf leaf = trim_leaf(cx, raw, radius);
      // tangents must sit safely inside the starred cone at every node
      auto data = leaf_node_data(cx, leaf);
      auto nodes = cheb_nodes(leaf.lo, leaf.hi, leaf.nodes());
      bool ok = true;
      ConeSpec spec;
      spec.rho = 0.98 * lp.rho;
      spec.starred = true;
      for (size_t k = 0; k < data.size() && ok; ++k)
        ok = cone_contains(spec, cone_frame(data[k]), leaf.tangent(nodes[k]))
                 .member;
      if (!ok) continue;
      return leaf;
    } catch (const std::exception&) {
      continue;  // bad draw (chart excursion, degenerate frame, thin cone)
    }
  }
  throw std::runtime_error("could not draw an admissible leaf");
}

// ---------------------------------------------------------------------------
// Slope jets.

double SlopeJets::order_norm(int a) const {
  double du = su.deriv(a), df = sf.deriv(a);
  return std::sqrt(du * du + df * df);
}

SlopeJets leaf_slope_jets(const LeafContext& cx, const FlowModel& flow,
                          const AdmissibleLeaf& leaf, double xi, int ord) {
  Vec3 z = leaf.point(xi);
  AdaptedFrame fz = adapted_frame(cx, flow, z, leaf.tangent(xi));
  JV3 jc = leaf.jet_curve(xi, ord + 1);
  // frame coordinates of the curve around z
  Jet y[3];
  const Jet* rows[3] = {&jc.x, &jc.y, &jc.z};
  const double* origin = &fz.origin.x;
  for (int i = 0; i < 3; ++i) {
    Jet g = Jet::constant(0.0, ord + 1);
    for (int j = 0; j < 3; ++j) g = g + *rows[j] * fz.inv(i, j);
    double shift = fz.inv(i, 0) * origin[0] + fz.inv(i, 1) * origin[1] +
                   fz.inv(i, 2) * origin[2];
    g.c[0] -= shift;
    y[i] = g;
  }
  y[0].c[0] = 0.0;  // z is on the curve: kill the roundoff offset
  Jet d0 = jet_d(y[0]);
  if (std::abs(d0.c[0]) < 1e-12)
    throw std::runtime_error("slope jets: leaf is parameter-degenerate");
  SlopeJets s;
  Jet theta = y[0];
  theta.ord = ord;  // truncate to the slope order before inverting
  Jet theta_inv = invert(theta);
  s.su = compose(jet_d(y[1]) / d0, theta_inv);
  s.sf = compose(jet_d(y[2]) / d0, theta_inv);
  return s;
}

SigmaCheck check_sigma(const LeafContext& cx, const FlowModel& flow,
                       const AdmissibleLeaf& leaf, double jet_m) {
  ArcTable arc = leaf_arc(cx, leaf);
  double core = 2.0 * cx.lp.delta;
  double xa = arc.xi_at(std::max(arc.at(leaf.lo), -core));
  double xb = arc.xi_at(std::min(arc.at(leaf.hi), core));
  auto probes = cheb_nodes(xa, xb, 9);
  SigmaCheck out;
  out.budget_margin = 1.0;
  for (double xi : probes) {
    SlopeJets s = leaf_slope_jets(cx, flow, leaf, xi, cx.lp.jet_order);
    out.center_slope = std::max(out.center_slope, s.order_norm(0));
    for (int a = 1; a <= cx.lp.jet_order; ++a) {
      double margin = 1.0 - s.order_norm(a) / std::pow(jet_m, a);
      if (margin < out.budget_margin) {
        out.budget_margin = margin;
        out.worst_order = a;
        out.worst_xi = xi;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization.

void save_leaf(const AdmissibleLeaf& leaf, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::fprintf(f, "leaf v1\n");
  std::fprintf(f, "origin %.17g %.17g %.17g\n", leaf.frame.origin.x,
               leaf.frame.origin.y, leaf.frame.origin.z);
  std::fprintf(f, "map");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) std::fprintf(f, " %.17g", leaf.frame.map(i, j));
  std::fprintf(f, "\ngram2");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      std::fprintf(f, " %.17g", leaf.frame.gram2(i, j));
  std::fprintf(f, "\nxnorm2 %.17g\n", leaf.frame.x_norm2);
  std::fprintf(f, "interval %.17g %.17g %.17g %.17g\n", leaf.lo, leaf.hi,
               leaf.arc_lo, leaf.arc_hi);
  std::fprintf(f, "nodes %d\n", leaf.nodes());
  auto xs = cheb_nodes(leaf.lo, leaf.hi, leaf.nodes());
  for (int k = 0; k < leaf.nodes(); ++k)
    std::fprintf(f, "%d %.17g %.17g %.17g\n", k, xs[k], leaf.fu[k],
                 leaf.ff[k]);
  std::fclose(f);
}

AdmissibleLeaf load_leaf(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "r");
  if (!f) throw std::runtime_error("cannot read " + path);
  char tag[16] = {0};
  int ver = 0;
  if (std::fscanf(f, "%15s v%d\n", tag, &ver) != 2 ||
      std::strcmp(tag, "leaf") != 0 || ver != 1) {
    std::fclose(f);
    throw std::runtime_error("not a leaf file: " + path);
  }
  AdaptedFrame fr;
  double lo = 0, hi = 0, alo = 0, ahi = 0;
  int n = 0;
  bool ok = std::fscanf(f, " origin %lg %lg %lg", &fr.origin.x, &fr.origin.y,
                        &fr.origin.z) == 3;
  ok = ok && std::fscanf(f, " map") == 0;
  for (int i = 0; i < 3 && ok; ++i)
    for (int j = 0; j < 3 && ok; ++j)
      ok = std::fscanf(f, " %lg", &fr.map(i, j)) == 1;
  ok = ok && std::fscanf(f, " gram2") == 0;
  for (int i = 0; i < 3 && ok; ++i)
    for (int j = 0; j < 3 && ok; ++j)
      ok = std::fscanf(f, " %lg", &fr.gram2(i, j)) == 1;
  ok = ok && std::fscanf(f, " xnorm2 %lg", &fr.x_norm2) == 1;
  ok = ok &&
       std::fscanf(f, " interval %lg %lg %lg %lg", &lo, &hi, &alo, &ahi) == 4;
  ok = ok && std::fscanf(f, " nodes %d", &n) == 1 && n >= 9 && n < 100000;
  std::vector<double> fu, ff;
  for (int k = 0; k < n && ok; ++k) {
    int idx = 0;
    double xi = 0, u = 0, w = 0;
    ok = std::fscanf(f, " %d %lg %lg %lg", &idx, &xi, &u, &w) == 4;
    fu.push_back(u);
    ff.push_back(w);
  }
  std::fclose(f);
  if (!ok) throw std::runtime_error("truncated leaf file: " + path);
  fr.inv = inverse(fr.map);
  AdmissibleLeaf leaf = make_graph_leaf(fr, lo, hi, fu, ff);
  leaf.arc_lo = alo;
  leaf.arc_hi = ahi;
  return leaf;
}

}  // namespace anosov
