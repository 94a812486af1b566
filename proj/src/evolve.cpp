#include "anosov/leaves.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "anosov/cones.hpp"
#include "anosov/integrate.hpp"
#include "anosov/parallel.hpp"
#include "anosov/rng.hpp"

namespace anosov {

namespace {

constexpr int kOrd = 4;  // curve jets carry this order, slope jets one less

Jet jet_d(const Jet& g) {
  Jet d = Jet::constant(0.0, std::max(0, g.ord - 1));
  for (int k = 0; k + 1 <= g.ord; ++k) d.c[k] = g.c[k + 1] * (k + 1);
  return d;
}

JM3 jm3_identity(int ord) {
  JM3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      m(i, j) = Jet::constant(i == j ? 1.0 : 0.0, ord);
  return m;
}

JM3 mat_times(const Mat3& a, const JM3& b, int ord) {
  JM3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Jet s = Jet::constant(0.0, ord);
      for (int k = 0; k < 3; ++k) s += b(k, j) * a(i, k);
      r(i, j) = s;
    }
  return r;
}

JM3 times_mat(const JM3& a, const Mat3& b, int ord) {
  JM3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Jet s = Jet::constant(0.0, ord);
      for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      r(i, j) = s;
    }
  return r;
}

// frame coordinates of a chart jet curve: y = inv * (p - origin)
JV3 to_frame(const AdaptedFrame& fr, const JV3& p, int ord) {
  JV3 y;
  const Jet* rows[3] = {&p.x, &p.y, &p.z};
  Jet* out[3] = {&y.x, &y.y, &y.z};
  const double* o = &fr.origin.x;
  for (int i = 0; i < 3; ++i) {
    Jet g = Jet::constant(0.0, ord);
    for (int j = 0; j < 3; ++j) g += *rows[j] * fr.inv(i, j);
    g.c[0] -= fr.inv(i, 0) * o[0] + fr.inv(i, 1) * o[1] + fr.inv(i, 2) * o[2];
    *out[i] = g;
  }
  return y;
}

// monotone-increasing Chebyshev interpolant inversion (Newton + bisection)
double solve_mono(const std::vector<double>& c, const std::vector<double>& dc,
                  double lo, double hi, double target) {
  double a = lo, b = hi;
  double fa = cheb_eval(c, lo, hi, a) - target;
  double fb = cheb_eval(c, lo, hi, b) - target;
  if (fa > 0.0 || fb < 0.0)
    throw std::domain_error("reparametrization target outside the leaf");
  double x = a + (b - a) * (0.0 - fa) / (fb - fa);
  for (int it = 0; it < 100; ++it) {
    double f = cheb_eval(c, lo, hi, x) - target;
    if (f > 0.0)
      b = x;
    else
      a = x;
    double df = cheb_eval(dc, lo, hi, x);
    double xn = df > 0.0 ? x - f / df : 0.5 * (a + b);
    if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
    if (std::abs(xn - x) < 1e-15 * (hi - lo)) return xn;
    x = xn;
  }
  return x;
}

double max_abs_coeff(const Jet& j) {
  double m = 0.0;
  for (int k = 0; k <= j.ord; ++k) m = std::max(m, std::abs(j.c[k]));
  return m;
}

// value of the k-th derivative of the truncated Taylor polynomial at x
double jet_deriv_at(const Jet& j, int k, double x) {
  double s = 0.0;
  for (int m = j.ord; m >= k; --m) {
    double coef = j.c[m];
    for (int i = 0; i < k; ++i) coef *= (m - i);
    s = s * x + coef;
    if (m == k) break;
  }
  // Horner above runs highest-to-lowest degree in (m - k)
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// One evolution step.

EvolveResult evolve_leaf(const LeafContext& cx, const FlowModel& flow,
                         const AdmissibleLeaf& leaf, double t) {
  cx.lp.validate();
  if (!(t > 0.0) || t > 0.5)
    throw std::invalid_argument("evolve_leaf: step must lie in (0, 0.5]");
  const LeafParams& lp = cx.lp;
  const int n = leaf.nodes();
  auto xs = cheb_nodes(leaf.lo, leaf.hi, n);

  // jet-advance the center (with tangent block) and every node
  JV3 pc = leaf.jet_curve(0.0, kOrd);
  JM3 mc = jm3_identity(kOrd);
  const int cross_c = advance(flow, pc, &mc, -t, cx.step);
  std::vector<JV3> node(n);
  for (int k = 0; k < n; ++k) {
    node[k] = leaf.jet_curve(xs[k], kOrd);
    int cr = advance(flow, node[k], (JM3*)nullptr, -t, cx.step);
    // re-glue nodes whose crossing count differs from the center's
    for (; cr < cross_c; ++cr)
      apply_deck(node[k], (JM3*)nullptr, +1, flow.roof);
    for (; cr > cross_c; --cr)
      apply_deck(node[k], (JM3*)nullptr, -1, flow.roof);
  }
  // unwrap the base coordinates by continuity, walking outward from the
  // node nearest the center
  int cmid = 0;
  for (int k = 1; k < n; ++k)
    if (std::abs(xs[k]) < std::abs(xs[cmid])) cmid = k;
  auto align = [](JV3& q, double rx, double ry) {
    q.x.c[0] += std::round(rx - q.x.c[0]);
    q.y.c[0] += std::round(ry - q.y.c[0]);
  };
  align(node[cmid], pc.x.c[0], pc.y.c[0]);
  for (int k = cmid + 1; k < n; ++k)
    align(node[k], node[k - 1].x.c[0], node[k - 1].y.c[0]);
  for (int k = cmid - 1; k >= 0; --k)
    align(node[k], node[k + 1].x.c[0], node[k + 1].y.c[0]);

  // image frame at the center
  Vec3 z1(pc.x.c[0], pc.y.c[0], pc.z.c[0]);
  Vec3 tan1(pc.x.c[1], pc.y.c[1], pc.z.c[1]);
  AdaptedFrame fr1 = adapted_frame(cx, flow, z1, tan1);

  EvolveResult out;
  out.blocks.dphi = times_mat(mat_times(fr1.inv, mc, kOrd), leaf.frame.map, kOrd);
  out.blocks.t = t;
  out.blocks.flow_ratio = fr1.x_norm2 / leaf.frame.x_norm2;
  out.center_defect =
      std::abs(out.blocks.C().c[0]) + std::abs(out.blocks.a().c[0]) +
      std::abs(out.blocks.Bf().c[0]) + std::abs(out.blocks.Df().c[0]);

  // parameter map and pulled-back slope jets at the center
  JV3 yc = to_frame(fr1, pc, kOrd);
  yc.x.c[0] = 0.0;
  out.xi_map = yc.x;
  Jet dxi = jet_d(yc.x);
  if (std::abs(dxi.c[0]) < 1e-12)
    throw std::runtime_error("evolution collapsed the leaf parameter");
  out.pullback.su = jet_d(yc.y) / dxi;
  out.pullback.sf = jet_d(yc.z) / dxi;

  // image graph over the source parameter, cone membership, metric speed
  std::vector<double> vxi(n), vfu(n), vff(n), speed(n);
  ConeSpec spec;
  spec.rho = lp.rho;
  spec.starred = true;
  out.cone_margin = 1e300;
  for (int k = 0; k < n; ++k) {
    JV3 yk = to_frame(fr1, node[k], kOrd);
    vxi[k] = yk.x.c[0];
    vfu[k] = yk.y.c[0];
    vff[k] = yk.z.c[0];
    Vec3 zk(node[k].x.c[0], node[k].y.c[0], node[k].z.c[0]);
    Vec3 tk(node[k].x.c[1], node[k].y.c[1], node[k].z.c[1]);
    SplitData sd = metric_two_data(*cx.base, cx.avg, *cx.stable,
                                   *cx.unstable, zk, nullptr, cx.step);
    speed[k] = std::sqrt(std::max(0.0, dot(tk, sd.gram2 * tk)));
    ConeResult cres = cone_contains(spec, cone_frame(sd), tk);
    out.cone_margin = std::min(out.cone_margin, cres.margin);
  }
  if (out.cone_margin < 0.0)
    throw std::runtime_error("evolved leaf tangent left the admissible cone");

  // reparametrization must be monotone (otherwise the leaf folded)
  auto cxi = cheb_coeffs(vxi);
  auto cfu = cheb_coeffs(vfu);
  auto cff = cheb_coeffs(vff);
  auto dcxi = cheb_derivative(cxi, leaf.lo, leaf.hi);
  for (int k = 0; k < n; ++k)
    if (!(cheb_eval(dcxi, leaf.lo, leaf.hi, xs[k]) > 0.0))
      throw std::runtime_error("evolved leaf folded over its parameter");

  // image arc over the source parameter; trim to arc radius B delta
  ArcTable arc;
  arc.lo = leaf.lo;
  arc.hi = leaf.hi;
  arc.integ = cheb_coeffs(speed);
  arc.cum = cheb_antiderivative(arc.integ, leaf.lo, leaf.hi);
  arc.arc_center = cheb_eval(arc.cum, leaf.lo, leaf.hi, 0.0);
  double reach_l = -arc.at(leaf.lo), reach_r = arc.at(leaf.hi);
  if (leaf.arc_hi > leaf.arc_lo)
    out.arc_factor = (reach_l + reach_r) / (leaf.arc_hi - leaf.arc_lo);
  const double radius = lp.big_b * lp.delta;
  if (reach_l < radius || reach_r < radius)
    throw std::runtime_error("evolved leaf is too short to trim");
  double sa = arc.xi_at(-radius), sb = arc.xi_at(radius);
  double a1 = cheb_eval(cxi, leaf.lo, leaf.hi, sa);
  double b1 = cheb_eval(cxi, leaf.lo, leaf.hi, sb);
  auto xs1 = cheb_nodes(a1, b1, n);
  std::vector<double> fu1(n), ff1(n);
  for (int j = 0; j < n; ++j) {
    double s = solve_mono(cxi, dcxi, leaf.lo, leaf.hi, xs1[j]);
    fu1[j] = cheb_eval(cfu, leaf.lo, leaf.hi, s);
    ff1[j] = cheb_eval(cff, leaf.lo, leaf.hi, s);
  }
  out.leaf = make_graph_leaf(fr1, a1, b1, fu1, ff1);
  out.leaf.arc_lo = -radius;
  out.leaf.arc_hi = radius;

  // resampling fidelity: direct point transport vs the stored graph
  double probes[3] = {0.6 * sa, 0.25 * (sa + sb), 0.7 * sb};
  for (double xp : probes) {
    Vec3 q = leaf.point(xp);
    advance(flow, q, (Mat3*)nullptr, -t, cx.step);
    Vec3 pred = out.leaf.point(cheb_eval(cxi, leaf.lo, leaf.hi, xp));
    q = match_chart(flow, pred, q);
    out.resample_drift = std::max(out.resample_drift, norm(q - pred));
  }
  if (out.resample_drift > 1e-4)
    throw std::runtime_error("leaf resolution lost under evolution");
  return out;
}

EvolveTrace evolve_steps(const LeafContext& cx, const FlowModel& flow,
                         const AdmissibleLeaf& leaf, double t_total) {
  if (!(t_total > 0.0))
    throw std::invalid_argument("evolve_steps: time must be positive");
  int m = (int)std::ceil(t_total / cx.lp.t_step - 1e-12);
  m = std::max(1, m);
  double dt = t_total / m;
  EvolveTrace tr;
  tr.xi_total = Jet::variable(0.0, kOrd);
  AdmissibleLeaf cur = leaf;
  for (int i = 0; i < m; ++i) {
    EvolveResult st = evolve_leaf(cx, flow, cur, dt);
    tr.pull_total.su = compose(st.pullback.su, tr.xi_total);
    tr.pull_total.sf = compose(st.pullback.sf, tr.xi_total);
    tr.xi_total = compose(st.xi_map, tr.xi_total);
    cur = st.leaf;
    tr.steps.push_back(std::move(st));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Jet transport through the projective graph-transform law.

SlopeJets transport_jets_closed(const TransformBlocks& bl,
                                const SlopeJets& s0) {
  int ord = s0.su.ord;
  auto tr = [&](const Jet& j) {
    Jet r = j;
    r.ord = ord;
    return r;
  };
  Jet den = tr(bl.A()) + tr(bl.B()) * s0.su + tr(bl.Bf()) * s0.sf;
  if (std::abs(den.c[0]) < 1e-10)
    throw std::runtime_error(
        "graph transform denominator vanished (leaf folded past the frame)");
  SlopeJets s;
  s.su = (tr(bl.C()) + tr(bl.D()) * s0.su + tr(bl.Df()) * s0.sf) / den;
  s.sf = (tr(bl.a()) + tr(bl.b()) * s0.su + tr(bl.f()) * s0.sf) / den;
  return s;
}

SlopeJets transport_jets(const TransformBlocks& bl, const SlopeJets& s0,
                         int k_max, double tail_tol) {
  int ord = s0.su.ord;
  auto tr = [&](const Jet& j) {
    Jet r = j;
    r.ord = ord;
    return r;
  };
  Jet A = tr(bl.A()), B = tr(bl.B()), Bf = tr(bl.Bf());
  Jet C = tr(bl.C()), D = tr(bl.D()), Df = tr(bl.Df());
  Jet a = tr(bl.a()), b = tr(bl.b()), f = tr(bl.f());
  Jet den = A + B * s0.su + Bf * s0.sf;
  if (std::abs(den.c[0]) < 1e-10)
    throw std::runtime_error(
        "graph transform denominator vanished (leaf folded past the frame)");
  Jet ainv = Jet::recip(A);
  Jet q = (B * s0.su + Bf * s0.sf) * ainv;
  const double a0 = A.c[0];
  const double d0 = D.c[0], df0 = Df.c[0], b0 = b.c[0], f0 = f.c[0];
  // leading contraction term D~(0) S A(0)^{-1}
  Jet lead_u = (s0.su * d0 + s0.sf * df0) / a0;
  Jet lead_f = (s0.su * b0 + s0.sf * f0) / a0;
  // series remainder: all xi-dependence beyond the leading term
  Jet brk = ainv * a0 - 1.0 - q;
  Jet om_u = (C + (D - d0) * s0.su + (Df - df0) * s0.sf) * ainv + lead_u * brk;
  Jet om_f = (a + (b - b0) * s0.su + (f - f0) * s0.sf) * ainv + lead_f * brk;
  SlopeJets s{lead_u, lead_f};
  Jet tu = om_u, tf = om_f;
  double sign = 1.0;
  bool converged = false;
  for (int k = 0; k <= k_max; ++k) {
    s.su += tu * sign;
    s.sf += tf * sign;
    double term = std::max(max_abs_coeff(tu), max_abs_coeff(tf));
    double scale = std::max(
        1.0, std::max(max_abs_coeff(s.su), max_abs_coeff(s.sf)));
    if (term < tail_tol * scale) {
      converged = true;
      break;
    }
    tu = tu * q;
    tf = tf * q;
    sign = -sign;
  }
  if (!converged)
    throw std::runtime_error(
        "jet transport series did not reach tolerance (order failure)");
  return s;
}

// ---------------------------------------------------------------------------
// Finite-difference oracle.

namespace {

struct FdRow {
  std::array<double, 4> u{}, f{};  // derivative orders 0..3
};

FdRow fd_pass(const LeafContext& cx, const FlowModel& flow,
              const AdmissibleLeaf& leaf, double t_total,
              const AdaptedFrame& fr, double h) {
  std::array<Vec3, 9> raw;
  for (int i = -4; i <= 4; ++i) {
    Vec3 q = leaf.point(i * h);
    advance(flow, q, (Mat3*)nullptr, -t_total, cx.step);
    raw[i + 4] = q;
  }
  raw[4] = match_chart(flow, fr.origin, raw[4]);
  for (int i = 5; i <= 8; ++i) raw[i] = match_chart(flow, raw[i - 1], raw[i]);
  for (int i = 3; i >= 0; --i) raw[i] = match_chart(flow, raw[i + 1], raw[i]);
  std::array<double, 9> xi, fu, ff;
  for (int i = 0; i < 9; ++i) {
    Vec3 y = fr.inv * (raw[i] - fr.origin);
    xi[i] = y.x;
    fu[i] = y.y;
    ff[i] = y.z;
  }
  // slope samples at the interior stencil points
  std::array<double, 7> su, sf;
  for (int i = -3; i <= 3; ++i) {
    double dx = xi[i + 5] - xi[i + 3];
    su[i + 3] = (fu[i + 5] - fu[i + 3]) / dx;
    sf[i + 3] = (ff[i + 5] - ff[i + 3]) / dx;
  }
  auto jets = [&](const std::array<double, 7>& s) {
    std::array<double, 4> d{};
    d[0] = s[3];
    d[1] = (s[4] - s[2]) / (2.0 * h);
    d[2] = (s[4] - 2.0 * s[3] + s[2]) / (h * h);
    d[3] = (s[5] - 2.0 * s[4] + 2.0 * s[2] - s[1]) / (2.0 * h * h * h);
    return d;
  };
  FdRow row;
  row.u = jets(su);
  row.f = jets(sf);
  (void)cx;
  return row;
}

}  // namespace

SlopeJets fd_slope_jets(const LeafContext& cx, const FlowModel& flow,
                        const AdmissibleLeaf& leaf, double t_total,
                        const AdaptedFrame& final_frame, double h, int ord) {
  if (ord < 0 || ord > 3)
    throw std::invalid_argument("fd oracle supports orders 0..3");
  if (!(h > 0.0) || 4.0 * h > 0.95 * std::min(-leaf.lo, leaf.hi))
    throw std::invalid_argument("fd stencil exceeds the leaf");
  FdRow coarse = fd_pass(cx, flow, leaf, t_total, final_frame, h);
  FdRow fine = fd_pass(cx, flow, leaf, t_total, final_frame, 0.5 * h);
  SlopeJets out;
  out.su = Jet::constant(0.0, ord);
  out.sf = Jet::constant(0.0, ord);
  double fact = 1.0;
  for (int k = 0; k <= ord; ++k) {
    if (k > 0) fact *= k;
    out.su.c[k] = (4.0 * fine.u[k] - coarse.u[k]) / 3.0 / fact;
    out.sf.c[k] = (4.0 * fine.f[k] - coarse.f[k]) / 3.0 / fact;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Invariance verification.

namespace {

struct LeafOutcome {
  bool failed = false;
  std::string error;
  std::vector<MarginRecord> recs;
  double c_fit = -1.0;
};

void upd(std::vector<MarginRecord>& recs, const std::string& family,
         double margin, const std::string& where, double t) {
  for (auto& r : recs)
    if (r.family == family) {
      if (margin < r.margin) {
        r.margin = margin;
        r.where = where;
        r.t = t;
      }
      return;
    }
  recs.push_back({family, margin, where, t});
}

std::string leaf_tag(int i, double eta, double t, const char* extra) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "leaf %d eta %+.3g t %.3g%s%s", i, eta, t,
                extra[0] ? " " : "", extra);
  return buf;
}

// intrinsic slope jets of a leaf at its own center (pure coefficient read)
SlopeJets center_jets(const AdmissibleLeaf& leaf) {
  SlopeJets s;
  s.su = jet_d(cheb_jet(leaf.cu, leaf.lo, leaf.hi, 0.0, kOrd));
  s.sf = jet_d(cheb_jet(leaf.cf, leaf.lo, leaf.hi, 0.0, kOrd));
  return s;
}

double pair_deriv_norm(const SlopeJets& a, const SlopeJets& b, int k,
                       double x) {
  double du = jet_deriv_at(a.su, k, x) - jet_deriv_at(b.su, k, x);
  double df = jet_deriv_at(a.sf, k, x) - jet_deriv_at(b.sf, k, x);
  return std::sqrt(du * du + df * df);
}

}  // namespace

VerificationReport verify_sigma_invariance(const LeafContext& cx,
                                           const SigmaInvarianceOptions& opt) {
  cx.lp.validate();
  const LeafParams& lp = cx.lp;
  if (opt.t_grid.empty())
    throw std::invalid_argument("sigma invariance needs a time grid");
  const double dt = lp.t_step;
  double t_max = 0.0;
  for (double tg : opt.t_grid) {
    t_max = std::max(t_max, tg);
    double k = tg / dt;
    if (!(tg > 0.0) || std::abs(k - std::round(k)) > 1e-9)
      throw std::invalid_argument(
          "time grid must consist of positive multiples of the evolution step");
  }
  const int n_steps = (int)std::round(t_max / dt);
  const double eps = lp.eps();
  const double jm = lp.jet_m;

  std::vector<double> etas = {0.0};
  FlowModel fam = *cx.base;
  if (opt.eta0 > 0.0) {
    fam = perturbed_model(*cx.base, 0.0, 1.01 * opt.eta0);
    etas.push_back(opt.eta0);
    etas.push_back(-opt.eta0);
  }

  std::vector<LeafOutcome> outs((size_t)opt.leaves);
  auto worker = [&](int li) {
    LeafOutcome& oc = outs[(size_t)li];
    try {
      Rng rng = Rng::for_sample(opt.seed, "sigma-leaves", (uint64_t)li);
      AdmissibleLeaf leaf0 = random_leaf(cx, rng, opt.budget_frac);
      // pull packages per eta per grid time, in the original parameter
      std::vector<std::vector<SlopeJets>> pulls(
          etas.size(), std::vector<SlopeJets>(opt.t_grid.size()));
      for (size_t ei = 0; ei < etas.size(); ++ei) {
        double eta = etas[ei];
        const FlowModel flow = eta == 0.0 ? *cx.base : fam.with_eta(eta);
        AdmissibleLeaf cur = leaf0;
        Jet xi_tot = Jet::variable(0.0, kOrd);
        SlopeJets cur_pull;
        for (int si = 0; si < n_steps; ++si) {
          SlopeJets src = center_jets(cur);
          EvolveResult st = evolve_leaf(cx, flow, cur, dt);
          double t_cum = (si + 1) * dt;
          std::string tag = leaf_tag(li, eta, t_cum, "");
          // certified block structure at the step scale
          upd(oc.recs, "tangent-backward-expansion",
              std::log(std::abs(st.blocks.A().c[0])) - lp.varsigma * dt, tag,
              t_cum);
          upd(oc.recs, "transverse-backward-contraction",
              -lp.varsigma * dt - std::log(std::abs(st.blocks.D().c[0])), tag,
              t_cum);
          upd(oc.recs, "frame-column-zeroing", -st.center_defect, tag, t_cum);
          upd(oc.recs, "foliation-column-smallness",
              1.0 - (std::abs(st.blocks.B().c[0]) +
                     std::abs(st.blocks.b().c[0])) /
                        (lp.col_cb * eps * dt),
              tag, t_cum);
          upd(oc.recs, "resample-fidelity", -st.resample_drift, tag, t_cum);
          // one-step jet recursion with the pinned constant
          for (int a = 1; a <= lp.jet_order; ++a) {
            double bound = std::exp(-lp.varsigma * dt) * src.order_norm(a) +
                           lp.recursion_k * eps * dt * std::pow(jm, a) +
                           lp.recursion_k * dt * std::pow(jm, a - 1);
            double got = st.pullback.order_norm(a);
            char ex[32];
            std::snprintf(ex, sizeof ex, "order %d", a);
            upd(oc.recs, "jet-recursion", (bound - got) / bound,
                leaf_tag(li, eta, t_cum, ex), t_cum);
          }
          cur_pull.su = compose(st.pullback.su, xi_tot);
          cur_pull.sf = compose(st.pullback.sf, xi_tot);
          xi_tot = compose(st.xi_map, xi_tot);
          cur = st.leaf;
          // checkpoint families at the grid times
          for (size_t ti = 0; ti < opt.t_grid.size(); ++ti) {
            if (std::abs(opt.t_grid[ti] - t_cum) > 1e-9) continue;
            pulls[ei][ti] = cur_pull;
            SigmaCheck sc = check_sigma(cx, flow, cur, jm);
            upd(oc.recs, "jet-budget-invariance", sc.budget_margin, tag,
                t_cum);
            upd(oc.recs, "centering", -sc.center_slope, tag, t_cum);
            double rho_t =
                std::max(0.5 * lp.rho,
                         std::exp(-lp.varsigma * t_cum / 4.0) * lp.rho);
            ConeSpec spec;
            spec.rho = rho_t;
            spec.starred = true;
            auto data = leaf_node_data(cx, cur);
            auto nodes = cheb_nodes(cur.lo, cur.hi, cur.nodes());
            double cm = 1e300;
            for (size_t k = 0; k < data.size(); ++k)
              cm = std::min(cm, cone_contains(spec, cone_frame(data[k]),
                                              cur.tangent(nodes[k]))
                                    .margin);
            upd(oc.recs, "cone-preservation", cm, tag, t_cum);
          }
        }
      }
      // perturbed-vs-unperturbed slope distance against C |eta| t M^{r'}
      if (etas.size() > 1) {
        double cbest = 0.0;
        for (size_t ei = 1; ei < etas.size(); ++ei)
          for (size_t ti = 0; ti < opt.t_grid.size(); ++ti) {
            double tg = opt.t_grid[ti];
            for (int rp = 0; rp <= 2; ++rp) {
              double nrm = 0.0;
              for (int k = 0; k <= rp; ++k)
                for (double xsample :
                     {0.0, lp.delta, -lp.delta, 2.0 * lp.delta,
                      -2.0 * lp.delta})
                  nrm = std::max(nrm, pair_deriv_norm(pulls[ei][ti],
                                                      pulls[0][ti], k,
                                                      xsample));
              double cval =
                  nrm / (std::abs(etas[ei]) * tg * std::pow(jm, rp));
              cbest = std::max(cbest, cval);
            }
          }
        oc.c_fit = cbest;
      }
    } catch (const std::exception& e) {
      oc.failed = true;
      oc.error = e.what();
    }
  };
  run_chunked(opt.leaves, worker);

  VerificationReport rep;
  rep.suite = "sigma-invariance";
  rep.model_id = cx.base->id();
  rep.slack = opt.slack;
  rep.set_param("leaves", opt.leaves);
  rep.set_param("t_max", t_max);
  rep.set_param("t_step", dt);
  rep.set_param("eta0", opt.eta0);
  rep.set_param("jet_m", jm);
  rep.set_param("varsigma", lp.varsigma);
  rep.set_param("epsilon", eps);
  rep.set_param("recursion_k", lp.recursion_k);
  rep.set_param("col_cb", lp.col_cb);
  rep.set_param("delta", lp.delta);
  rep.set_param("big_b", lp.big_b);
  rep.set_param("rho", lp.rho);
  rep.set_param("budget_frac", opt.budget_frac);
  rep.set_param("seed", (double)opt.seed);
  rep.add_margin("evolution-integrity", 1.0, "all leaves evolved", 0.0);
  std::vector<double> cfits;
  for (int i = 0; i < opt.leaves; ++i) {
    const LeafOutcome& oc = outs[(size_t)i];
    if (oc.failed) {
      rep.add_margin("evolution-integrity", -1.0, leaf_tag(i, 0, 0, ""), 0.0);
      rep.note("leaf " + std::to_string(i) + " failed: " + oc.error);
      continue;
    }
    for (const auto& r : oc.recs) rep.add_margin(r.family, r.margin, r.where, r.t);
    if (oc.c_fit >= 0.0) cfits.push_back(oc.c_fit);
  }
  if (!cfits.empty()) {
    std::vector<double> sorted = cfits;
    std::sort(sorted.begin(), sorted.end());
    double cmed = sorted[sorted.size() / 2];
    rep.set_param("c_fit_median", cmed);
    rep.set_param("c_fit_min", sorted.front());
    rep.set_param("c_fit_max", sorted.back());
    for (int i = 0; i < opt.leaves; ++i) {
      const LeafOutcome& oc = outs[(size_t)i];
      if (oc.failed || oc.c_fit < 0.0) continue;
      double margin =
          cmed > 0.0 ? opt.fit_band - std::abs(oc.c_fit / cmed - 1.0) : -1.0;
      rep.add_margin("perturbation-linear-response", margin,
                     leaf_tag(i, opt.eta0, t_max, ""), t_max);
    }
  } else {
    rep.note("no perturbed runs: eta0 = 0");
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// Calibration probe.

LeafCalibration calibrate_leaf_budget(const LeafContext& cx,
                                      std::uint64_t seed, int probes) {
  LeafContext px = cx;
  px.lp.jet_m = 1.0;
  px.lp.validate();
  const double dt = px.lp.t_step;
  const int n_steps = (int)std::round(4.0 / dt);
  const double eps = px.lp.eps();

  struct ProbeData {
    bool failed = false;
    std::string error;
    double lam = 0.0;
    double attr = 0.0;
    double colr = 0.0;
    // per step: source/pulled jet norms per order
    std::vector<std::array<double, 4>> src, pull;
  };
  std::vector<ProbeData> data((size_t)probes);
  auto worker = [&](int li) {
    ProbeData& pd = data[(size_t)li];
    try {
      Rng rng = Rng::for_sample(seed, "calib-leaves", (uint64_t)li);
      AdmissibleLeaf cur = random_leaf(px, rng, 0.6);
      for (int si = 0; si < n_steps; ++si) {
        SlopeJets src = center_jets(cur);
        EvolveResult st = evolve_leaf(px, *px.base, cur, dt);
        if (st.arc_factor > 0.0)
          pd.lam = std::max(pd.lam, std::log(st.arc_factor) / dt);
        pd.colr = std::max(pd.colr, (std::abs(st.blocks.B().c[0]) +
                                     std::abs(st.blocks.b().c[0])) /
                                        (eps * dt));
        std::array<double, 4> s{}, p{};
        for (int a = 1; a <= 3; ++a) {
          s[a] = src.order_norm(a);
          p[a] = st.pullback.order_norm(a);
        }
        pd.src.push_back(s);
        pd.pull.push_back(p);
        cur = st.leaf;
        if ((si + 1) * dt >= 1.0) {
          SlopeJets intr = center_jets(cur);
          for (int a = 1; a <= 3; ++a)
            pd.attr = std::max(pd.attr,
                               std::pow(intr.order_norm(a), 1.0 / a));
        }
      }
    } catch (const std::exception& e) {
      pd.failed = true;
      pd.error = e.what();
    }
  };
  run_chunked(probes, worker);

  LeafCalibration cal;
  double attr = 0.0, lam = 0.0, colr = 0.0;
  int ok = 0;
  for (const auto& pd : data) {
    if (pd.failed) continue;
    ++ok;
    attr = std::max(attr, pd.attr);
    lam = std::max(lam, pd.lam);
    colr = std::max(colr, pd.colr);
  }
  if (ok == 0)
    throw std::runtime_error("leaf calibration: every probe failed");
  cal.raw_attractor = attr;
  cal.jet_m = 1.4 * std::max(attr, 0.5);
  cal.lam_bound = 1.1 * std::max(lam, 0.1);
  cal.col_cb = 1.5 * std::max(colr, 0.5);
  double kraw = 0.0;
  const double m_ref = cal.jet_m;
  for (const auto& pd : data) {
    if (pd.failed) continue;
    for (size_t si = 0; si < pd.src.size(); ++si)
      for (int a = 1; a <= 3; ++a) {
        double excess = pd.pull[si][(size_t)a] -
                        std::exp(-px.lp.varsigma * dt) * pd.src[si][(size_t)a];
        double scale = dt * (eps * std::pow(m_ref, a) + std::pow(m_ref, a - 1));
        kraw = std::max(kraw, excess / scale);
      }
  }
  cal.recursion_k = 1.3 * std::max(kraw, 0.5);
  return cal;
}

}  // namespace anosov
