#include "anosov/graphops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "anosov/rng.hpp"
#include "anosov/splitting.hpp"

namespace anosov {

namespace {

inline double gnorm(const Mat3& g, const Vec3& v) {
  return std::sqrt(std::max(0.0, dot(v, g * v)));
}

inline int wrap(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

// Catmull-Rom weights for fractional position u in [0,1).
inline void cr_weights(double u, double w[4]) {
  double u2 = u * u, u3 = u2 * u;
  w[0] = 0.5 * (-u3 + 2 * u2 - u);
  w[1] = 0.5 * (3 * u3 - 5 * u2 + 2);
  w[2] = 0.5 * (-3 * u3 + 4 * u2 + u);
  w[3] = 0.5 * (u3 - u2);
}

}  // namespace

GraphFrame graph_frame_with(const FlowModel& m, const Vec3& x,
                            const Mat3& gram) {
  Vec3 p = m.normalize(x);
  SplittingFrame sp = invariant_splitting(m, p);
  GraphFrame f;
  f.base = p;
  f.gram = gram;
  f.u_hat = sp.e_u / gnorm(gram, sp.e_u);
  f.s_hat = sp.e_s / gnorm(gram, sp.e_s);
  f.f_hat = sp.e_f / gnorm(gram, sp.e_f);
  return f;
}

GraphFrame graph_frame(const FlowModel& m, const AveragingParams& p,
                       const Vec3& x) {
  Vec3 q = m.normalize(x);
  return graph_frame_with(m, q, metric_one_gram(m, p, q));
}

double graph_norm(const GraphFrame& f, bool stable, double c_trans,
                  double c_flow) {
  const Vec3& trans = stable ? f.u_hat : f.s_hat;
  // domain direction is unit length, so the operator norm is the image length
  return gnorm(f.gram, trans * c_trans + f.f_hat * c_flow);
}

GraphOperator make_graph(const FlowModel& m, const AveragingParams& p,
                         const Vec3& x, bool stable, double c_trans,
                         double c_flow) {
  GraphFrame f = graph_frame(m, p, x);
  GraphOperator u;
  u.base = f.base;
  u.stable = stable;
  u.c_trans = c_trans;
  u.c_flow = c_flow;
  u.norm1 = graph_norm(f, stable, c_trans, c_flow);
  return u;
}

Vec3 graph_direction(const GraphFrame& f, const GraphOperator& u) {
  const Vec3& dom = u.stable ? f.s_hat : f.u_hat;
  const Vec3& trans = u.stable ? f.u_hat : f.s_hat;
  return dom + trans * u.c_trans + f.f_hat * u.c_flow;
}

GraphOperator apply_graph_transform(const GraphFrame& fx, const GraphFrame& fy,
                                    const Mat3& dt, const GraphOperator& u) {
  Vec3 w = dt * graph_direction(fx, u);
  Mat3 frame;
  frame.set_col(0, u.stable ? fy.s_hat : fy.u_hat);
  frame.set_col(1, u.stable ? fy.u_hat : fy.s_hat);
  frame.set_col(2, fy.f_hat);
  Vec3 c = solve(frame, w);
  double mag = std::sqrt(c.x * c.x + c.y * c.y + c.z * c.z);
  if (!(std::abs(c.x) * 1e12 > mag))
    throw std::runtime_error(
        "graph transform lost transversality: pushed subspace has no graph "
        "representation over its domain");
  GraphOperator out;
  out.base = fy.base;
  out.stable = u.stable;
  out.c_trans = c.y / c.x;
  out.c_flow = c.z / c.x;
  out.norm1 = graph_norm(fy, out.stable, out.c_trans, out.c_flow);
  return out;
}

GraphOperator graph_action(const FlowModel& m, const AveragingParams& p,
                           const GraphOperator& u, double t, double h) {
  GraphFrame fx = graph_frame(m, p, u.base);
  TangentFlow tf = tangent_map(m, fx.base, t, h);
  GraphFrame fy = graph_frame(m, p, tf.p);
  return apply_graph_transform(fx, fy, tf.dt, u);
}

ContractionCalibration calibrate_contraction(const FlowModel& m,
                                             const AveragingParams& p,
                                             uint64_t seed, int probes,
                                             double amplitude) {
  if (probes < 1) throw std::invalid_argument("calibration needs probes");
  const std::vector<double> grid = {0.25, 0.5, 0.75, 1.0, 1.25,
                                    1.5,  2.0, 3.0,  4.0};
  std::vector<double> sup(grid.size(), 0.0);
  double theta_unit = 0.0;
  for (int i = 0; i < probes; ++i) {
    Rng rng = Rng::for_sample(seed, "contraction", uint64_t(i));
    Vec3 x{rng.uniform(), rng.uniform(), m.roof * rng.uniform()};
    GraphFrame f0 = graph_frame(m, p, x);
    for (int fam = 0; fam < 2; ++fam) {
      bool stable = fam == 1;
      GraphOperator u;
      u.base = f0.base;
      u.stable = stable;
      u.c_trans = amplitude * (2.0 * rng.uniform() - 1.0);
      u.c_flow = amplitude * (2.0 * rng.uniform() - 1.0);
      u.norm1 = graph_norm(f0, stable, u.c_trans, u.c_flow);
      if (u.norm1 < 1e-14) continue;
      double sgn = stable ? -1.0 : 1.0;
      Vec3 cur = f0.base;
      Mat3 acc = Mat3::identity();
      double prev = 0.0;
      for (size_t gi = 0; gi < grid.size(); ++gi) {
        Mat3 step = Mat3::identity();
        advance(m, cur, &step, sgn * (grid[gi] - prev));
        acc = step * acc;
        prev = grid[gi];
        GraphFrame ft = graph_frame(m, p, cur);
        GraphOperator ut = apply_graph_transform(f0, ft, acc, u);
        double ratio = ut.norm1 / u.norm1;
        sup[gi] = std::max(sup[gi], ratio);
        if (grid[gi] == 1.0) theta_unit = std::max(theta_unit, ratio);
      }
    }
  }
  ContractionCalibration cal;
  cal.theta_unit = theta_unit;
  for (size_t gi = 0; gi < grid.size(); ++gi)
    if (sup[gi] <= 0.5) {
      cal.n_star = 1.25 * grid[gi];  // headroom for unprobed operators
      break;
    }
  return cal;
}

// ---------------------------------------------------------------------------
// Distribution fields

namespace {

// Ghost-aware scalar fetch.  Coefficients in the metric-one unit frames are
// deck-invariant (the frame covariance under D cancels the norm rescaling
// exactly), so climbing through the roof only permutes fiber indices.
double fetch_coeff(const std::vector<double>& c, int n, int ns, int i, int j,
                   int k) {
  int ii = wrap(i, n), jj = wrap(j, n);
  while (k >= ns) {
    k -= ns;
    int ni = wrap(2 * ii + jj, n), nj = wrap(ii + jj, n);
    ii = ni;
    jj = nj;
  }
  while (k < 0) {
    k += ns;
    int ni = wrap(ii - jj, n), nj = wrap(-ii + 2 * jj, n);
    ii = ni;
    jj = nj;
  }
  return c[size_t(k * n + ii) * n + jj];
}

void field_stats(DistributionField& f) {
  f.c0_max = 0.0;
  f.c1_fd = 0.0;
  const int n = f.grid_n, ns = f.grid_ns;
  const double hx = 1.0 / n, hs = f.roof / ns;
  for (int k = 0; k < ns; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double ct = f.ct(i, j, k), cf = f.cf(i, j, k);
        f.c0_max = std::max(f.c0_max, std::sqrt(ct * ct + cf * cf));
        for (int axis = 0; axis < 3; ++axis) {
          int i1 = i + (axis == 0), j1 = j + (axis == 1), k1 = k + (axis == 2);
          double h = axis == 2 ? hs : hx;
          double dt =
              fetch_coeff(f.c_trans, n, ns, i1, j1, k1) - ct;
          double df =
              fetch_coeff(f.c_flow, n, ns, i1, j1, k1) - cf;
          f.c1_fd = std::max(f.c1_fd, std::hypot(dt, df) / h);
        }
      }
  // exact-splitting unit frames are orthonormal for the averaged metric, so
  // the graph norm at a node is the coefficient euclidean norm
  f.max_graph_norm = f.c0_max;
}

}  // namespace

void DistributionField::eval_coeffs(const Vec3& p, double& out_trans,
                                    double& out_flow) const {
  double fx = p.x - std::floor(p.x);
  double fy = p.y - std::floor(p.y);
  double fs = p.z / roof;
  fs -= std::floor(fs);

  double gx = fx * grid_n, gy = fy * grid_n, gs = fs * grid_ns;
  int i0 = (int)std::floor(gx), j0 = (int)std::floor(gy),
      k0 = (int)std::floor(gs);
  double wx[4], wy[4], ws[4];
  cr_weights(gx - i0, wx);
  cr_weights(gy - j0, wy);
  cr_weights(gs - k0, ws);

  double at = 0.0, af = 0.0;
  for (int dk = -1; dk <= 2; ++dk) {
    double lt = 0.0, lf = 0.0;
    for (int di = -1; di <= 2; ++di)
      for (int dj = -1; dj <= 2; ++dj) {
        double w = wx[di + 1] * wy[dj + 1];
        if (w == 0.0) continue;
        lt += w * fetch_coeff(c_trans, grid_n, grid_ns, i0 + di, j0 + dj,
                              k0 + dk);
        lf += w * fetch_coeff(c_flow, grid_n, grid_ns, i0 + di, j0 + dj,
                              k0 + dk);
      }
    at += ws[dk + 1] * lt;
    af += ws[dk + 1] * lf;
  }
  out_trans = at;
  out_flow = af;
}

DistributionField build_raw_distribution(const FlowModel& m, bool stable,
                                         int grid_n, double width) {
  if (m.pert.eta != 0.0)
    throw std::invalid_argument(
        "raw distribution template requires the unperturbed model");
  if (!(width > 0.0) || !(width < 0.5))
    throw std::invalid_argument("template width must lie in (0, 0.5)");
  if (grid_n < 16)
    throw std::invalid_argument("distribution grid needs >= 16 nodes/period");

  DistributionField f;
  f.stable = stable;
  f.grid_n = grid_n;
  f.grid_ns = std::max(8, (int)std::llround(grid_n * m.roof));
  f.roof = m.roof;
  f.width = width;
  f.model_id = m.id();
  size_t total = size_t(grid_n) * grid_n * f.grid_ns;
  f.c_trans.assign(total, 0.0);
  f.c_flow.assign(total, 0.0);

  // octave modes down to wavelength ~2*width; unit directions keep every
  // axis frequency within the grid's sampling band
  const int octaves =
      1 + std::max(0, (int)std::floor(std::log2(1.0 / (2.0 * width))));
  static const int dirs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
  const double gamma = 0.5;
  const double two_pi = 2.0 * 3.14159265358979323846;
  double zsum = 0.0;
  for (int o = 0; o < octaves; ++o) zsum += std::pow(2.0, -gamma * o);
  const double phase0 = stable ? 0.5 : 0.0;

  for (int k = 0; k < f.grid_ns; ++k) {
    double s = m.roof * double(k) / f.grid_ns;
    double win = bump_window(s / m.roof);
    if (win == 0.0) continue;
    for (int i = 0; i < grid_n; ++i)
      for (int j = 0; j < grid_n; ++j) {
        double x1 = double(i) / grid_n, x2 = double(j) / grid_n;
        double at = 0.0, af = 0.0;
        for (int o = 0; o < octaves; ++o) {
          double amp = std::pow(2.0, -gamma * o) / zsum;
          double a = dirs[o % 4][0], b = dirs[o % 4][1];
          double freq = std::pow(2.0, o);
          double dm = (o % 3) * 0.5;
          at += amp * std::sin(two_pi * (freq * (a * x1 + b * x2) +
                                         dm * s / m.roof) +
                               0.37 + 1.1 * o + phase0);
          af += amp * std::cos(two_pi * (freq * (b * x1 - a * x2) -
                                         dm * s / m.roof) +
                               1.9 + 0.7 * o + phase0);
        }
        f.ct(i, j, k) = 0.5 * width * win * at;
        f.cf(i, j, k) = 0.5 * width * win * af;
      }
  }
  field_stats(f);
  return f;
}

DistributionField smooth_distribution(const FlowModel& m,
                                      const DistributionField& raw,
                                      double rho0) {
  if (m.id() != raw.model_id)
    throw std::invalid_argument("distribution field belongs to another model");
  if (!(raw.width > 0.0) || !(raw.width < 0.5 * rho0))
    throw std::invalid_argument(
        "mollification width must stay below rho0/2 so the smoothed "
        "distributions remain inside the invariant cones");

  DistributionField f = raw;
  const int n = f.grid_n, ns = f.grid_ns;

  // per-axis bump taps; discrete weights normalized to sum 1 so constant
  // fields are reproduced exactly
  auto taps = [](double width_nodes) {
    int r = (int)std::floor(width_nodes);
    std::vector<double> w;
    double sum = 0.0;
    for (int o = -r; o <= r; ++o) {
      double u = width_nodes > 0 ? o / width_nodes : 0.0;
      double b = std::abs(u) < 1.0 ? std::exp(-1.0 / (1.0 - u * u)) : 0.0;
      w.push_back(b);
      sum += b;
    }
    for (double& v : w) v /= sum;
    return w;
  };
  std::vector<double> wf = taps(f.width * n);
  std::vector<double> ws = taps(f.width * ns / f.roof);
  int rf = ((int)wf.size() - 1) / 2, rs = ((int)ws.size() - 1) / 2;

  auto pass = [&](std::vector<double>& c, int axis) {
    const std::vector<double>& w = axis == 2 ? ws : wf;
    int r = axis == 2 ? rs : rf;
    if (r == 0) return;
    std::vector<double> src = c;
    for (int k = 0; k < ns; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int o = -r; o <= r; ++o) {
            int ii = i + (axis == 0 ? o : 0);
            int jj = j + (axis == 1 ? o : 0);
            int kk = k + (axis == 2 ? o : 0);
            acc += w[o + r] * fetch_coeff(src, n, ns, ii, jj, kk);
          }
          c[size_t(k * n + i) * n + j] = acc;
        }
  };
  for (int axis = 0; axis < 3; ++axis) {
    pass(f.c_trans, axis);
    pass(f.c_flow, axis);
  }
  field_stats(f);
  if (f.max_graph_norm > raw.width * (1.0 + 1e-12))
    throw std::runtime_error("mollified amplitude exceeded its width budget");
  return f;
}

double fit_smoothing_exponent(const FlowModel& m, bool stable, int grid_n,
                              const std::vector<double>& widths,
                              std::vector<double>* c0_out,
                              std::vector<double>* c1_out) {
  if (widths.size() < 2)
    throw std::invalid_argument("exponent fit needs at least two widths");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double w : widths) {
    DistributionField sm =
        smooth_distribution(m, build_raw_distribution(m, stable, grid_n, w));
    if (c0_out) c0_out->push_back(sm.c0_max);
    if (c1_out) c1_out->push_back(sm.c1_fd);
    double lx = std::log(w), ly = std::log(sm.c1_fd / sm.c0_max);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double nw = double(widths.size());
  double slope = (nw * sxy - sx * sy) / (nw * sxx - sx * sx);
  return -slope;
}

GraphOperator PushedFoliation::eval(const FlowModel& m,
                                    const AveragingParams& p, const Vec3& x0,
                                    const Mat3* arrival_gram, double h) const {
  Vec3 x = m.normalize(x0);
  // stable graphs are pulled from the future, unstable ones from the past
  double sgn = smoothed.stable ? 1.0 : -1.0;
  Vec3 y = flow_map(m, x, sgn * push_time, h);
  GraphFrame fy = graph_frame(m, p, y);
  GraphOperator uy;
  uy.base = fy.base;
  uy.stable = smoothed.stable;
  smoothed.eval_coeffs(fy.base, uy.c_trans, uy.c_flow);
  uy.norm1 = graph_norm(fy, uy.stable, uy.c_trans, uy.c_flow);
  // fresh forward tangent from y; never invert the contracting branch
  Vec3 q = fy.base;
  Mat3 dt = Mat3::identity();
  advance(m, q, &dt, -sgn * push_time, h);
  GraphFrame fq = arrival_gram ? graph_frame_with(m, q, *arrival_gram)
                               : graph_frame(m, p, q);
  return apply_graph_transform(fy, fq, dt, uy);
}

PushedFoliation build_pushed_foliation(const FlowModel& m,
                                       const DistributionField& smoothed,
                                       double push_time) {
  if (m.id() != smoothed.model_id)
    throw std::invalid_argument("distribution field belongs to another model");
  if (!(push_time >= 1.0))
    throw std::invalid_argument("push time must cover at least one period");
  PushedFoliation out;
  out.smoothed = smoothed;
  out.push_time = push_time;
  out.n_epsilon = push_time / std::log(1.0 / smoothed.width);
  return out;
}

FoliationPlan plan_push_time(const FlowModel& m, const AveragingParams& p,
                             const DistributionField& smoothed, double epsilon,
                             uint64_t seed) {
  if (!(epsilon > 0.0))
    throw std::invalid_argument("push planning needs a positive epsilon");
  ContractionCalibration cal =
      calibrate_contraction(m, p, seed, 8, 0.5 * smoothed.width);
  if (cal.n_star <= 0.0)
    throw std::runtime_error(
        "graph action does not contract by 1/2 within the probe horizon");

  const std::vector<double> ts = {0.25, 0.5, 1.0};
  double sgn = smoothed.stable ? -1.0 : 1.0;
  double s_loc = 0.0;
  for (int i = 0; i < 12; ++i) {
    Rng rng = Rng::for_sample(seed, "plan-drift", uint64_t(i));
    Vec3 x = m.normalize({rng.uniform(), rng.uniform(), m.roof * rng.uniform()});
    GraphFrame fx = graph_frame(m, p, x);
    GraphOperator ux;
    ux.base = fx.base;
    ux.stable = smoothed.stable;
    smoothed.eval_coeffs(fx.base, ux.c_trans, ux.c_flow);
    ux.norm1 = graph_norm(fx, ux.stable, ux.c_trans, ux.c_flow);
    Vec3 cur = fx.base;
    Mat3 acc = Mat3::identity();
    double prev = 0.0;
    for (double t : ts) {
      Mat3 step = Mat3::identity();
      advance(m, cur, &step, sgn * (t - prev));
      acc = step * acc;
      prev = t;
      GraphFrame ft = graph_frame(m, p, cur);
      GraphOperator pushed = apply_graph_transform(fx, ft, acc, ux);
      double ctg, cfg;
      smoothed.eval_coeffs(ft.base, ctg, cfg);
      double dist = graph_norm(ft, smoothed.stable, pushed.c_trans - ctg,
                               pushed.c_flow - cfg);
      s_loc = std::max(s_loc, dist / t);
    }
  }

  FoliationPlan plan;
  plan.n_star = cal.n_star;
  plan.local_drift = s_loc;
  double n = cal.n_star * std::log2(std::max(2.0, 4.0 * s_loc / epsilon));
  plan.push_time = std::max(2.0, std::ceil(n));
  plan.n_epsilon = plan.push_time / std::log(1.0 / smoothed.width);
  return plan;
}

// ---------------------------------------------------------------------------
// Flow smoothness

namespace {

// Projector onto the stable graph along the unstable graph and the flow.
Mat3 stable_projector(const GraphFrame& f, const GraphOperator& us,
                      const GraphOperator& uu) {
  Vec3 es = graph_direction(f, us);
  Vec3 eu = graph_direction(f, uu);
  Mat3 frame;
  frame.set_col(0, es);
  frame.set_col(1, eu);
  frame.set_col(2, f.f_hat);
  Mat3 fi = inverse(frame);
  return outer(es, Vec3{fi(0, 0), fi(0, 1), fi(0, 2)});
}

double weighted_opnorm(const Mat3& g_to, const Mat3& mat, const Mat3& g_from) {
  return opnorm(spd_sqrt(g_to) * (mat * spd_inv_sqrt(g_from)));
}

}  // namespace

VerificationReport verify_flow_smoothness(const FlowModel& m,
                                          const AveragingParams& p,
                                          const PushedFoliation& unstable,
                                          const PushedFoliation& stable,
                                          const FlowSmoothnessOptions& opt) {
  if (!(opt.epsilon > 0.0))
    throw std::invalid_argument("flow smoothness needs a positive epsilon");
  if (unstable.smoothed.stable || !stable.smoothed.stable)
    throw std::invalid_argument(
        "flow smoothness wants (unstable, stable) foliations in that order");
  if (opt.samples < 1) throw std::invalid_argument("need samples");

  std::vector<double> ts = opt.t_grid;
  if (ts.empty())
    for (int k = 1; k <= 20; ++k) ts.push_back(0.05 * k);
  for (size_t i = 0; i < ts.size(); ++i)
    if (!(ts[i] > 0.0) || (i > 0 && ts[i] <= ts[i - 1]))
      throw std::invalid_argument("t grid must be positive and increasing");

  struct SampleOut {
    double worst_u = 1e300, worst_s = 1e300;  // epsilon - dist/t
    double t_u = 0.0, t_s = 0.0;
    double ratio_u = 0.0, ratio_s = 0.0;  // sup dist/t
    double proj = 0.0;
  };
  std::vector<SampleOut> out(size_t(opt.samples));

  auto run_sample = [&](int si) {
    SampleOut& so = out[size_t(si)];
    Rng rng = Rng::for_sample(opt.seed, "flow-smooth", uint64_t(si));
    Vec3 x =
        m.normalize({rng.uniform(), rng.uniform(), m.roof * rng.uniform()});
    Mat3 gx = metric_one_gram(m, p, x);
    GraphFrame fx = graph_frame_with(m, x, gx);
    GraphOperator uux = unstable.eval(m, p, x, &gx);
    GraphOperator usx = stable.eval(m, p, x, &gx);
    Mat3 pis_x = stable_projector(fx, usx, uux);
    Mat3 id = Mat3::identity();

    for (int dir = 0; dir < 2; ++dir) {
      bool fam_stable = dir == 1;
      const PushedFoliation& fol = fam_stable ? stable : unstable;
      const GraphOperator& u0 = fam_stable ? usx : uux;
      double sgn = fam_stable ? -1.0 : 1.0;
      Vec3 cur = u0.base;
      Mat3 acc = Mat3::identity();
      double prev = 0.0;
      for (double t : ts) {
        Mat3 step = Mat3::identity();
        advance(m, cur, &step, sgn * (t - prev));
        acc = step * acc;
        prev = t;
        Mat3 gt = metric_one_gram(m, p, cur);
        GraphFrame ft = graph_frame_with(m, cur, gt);
        GraphOperator pushed = apply_graph_transform(fx, ft, acc, u0);
        GraphOperator there = fol.eval(m, p, cur, &gt);
        double dist = graph_norm(ft, fam_stable, pushed.c_trans - there.c_trans,
                                 pushed.c_flow - there.c_flow);
        double margin = opt.epsilon - dist / t;
        if (fam_stable) {
          so.ratio_s = std::max(so.ratio_s, dist / t);
          if (margin < so.worst_s) {
            so.worst_s = margin;
            so.t_s = t;
          }
        } else {
          so.ratio_u = std::max(so.ratio_u, dist / t);
          if (margin < so.worst_u) {
            so.worst_u = margin;
            so.t_u = t;
          }
        }
        // projector forms of the same estimate, recorded but not gated:
        // forward  ||Pi_s(x_t) DT_t (Id - Pi_s(x))||_1 / t
        // backward ||(Id - Pi_s(x_-t)) DT_-t Pi_s(x)||_1 / t
        GraphOperator other = (fam_stable ? unstable : stable).eval(m, p, cur, &gt);
        Mat3 pis_t = fam_stable ? stable_projector(ft, there, other)
                                : stable_projector(ft, other, there);
        Mat3 mixed = fam_stable ? (id - pis_t) * (acc * pis_x)
                                : pis_t * (acc * (id - pis_x));
        so.proj = std::max(so.proj, weighted_opnorm(gt, mixed, gx) / t);
      }
    }
  };

  int nthreads = (int)std::min(8u, std::thread::hardware_concurrency());
  nthreads = std::max(1, nthreads);
  if (nthreads == 1 || opt.samples < 2 * nthreads) {
    for (int i = 0; i < opt.samples; ++i) run_sample(i);
  } else {
    std::vector<std::thread> pool;
    int per = (opt.samples + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      int a = t * per, b = std::min(opt.samples, a + per);
      if (a < b)
        pool.emplace_back([&, a, b] {
          for (int i = a; i < b; ++i) run_sample(i);
        });
    }
    for (auto& th : pool) th.join();
  }

  VerificationReport rep;
  rep.suite = "flow-smoothness";
  rep.model_id = m.id();
  rep.slack = opt.slack;
  double sup_u = 0.0, sup_s = 0.0, proj = 0.0;
  char where[64];
  for (int i = 0; i < opt.samples; ++i) {
    const SampleOut& so = out[size_t(i)];
    std::snprintf(where, sizeof where, "sample %d", i);
    rep.add_margin("graph-flow-mismatch", so.worst_u, where, so.t_u);
    rep.add_margin("graph-flow-mismatch-stable", so.worst_s, where, so.t_s);
    sup_u = std::max(sup_u, so.ratio_u);
    sup_s = std::max(sup_s, so.ratio_s);
    proj = std::max(proj, so.proj);
  }
  rep.set_param("epsilon", opt.epsilon);
  rep.set_param("samples", opt.samples);
  rep.set_param("t_max", ts.back());
  rep.set_param("push_time_unstable", unstable.push_time);
  rep.set_param("push_time_stable", stable.push_time);
  rep.set_param("n_epsilon_unstable", unstable.n_epsilon);
  rep.set_param("n_epsilon_stable", stable.n_epsilon);
  rep.set_param("mollify_width", unstable.smoothed.width);
  rep.set_param("sup_ratio_unstable", sup_u);
  rep.set_param("sup_ratio_stable", sup_s);
  rep.set_param("projector_ratio_max", proj);
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

void save_distribution_field(const DistributionField& f,
                             const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  char head[512];
  std::snprintf(head, sizeof head,
                "distfield 1\nmodel %s\nstable %d\ngrid %d %d %d\n"
                "roof %.17g\nwidth %.17g\npush %.17g\nexponent %.17g\n"
                "stats %.17g %.17g %.17g\npayload\n",
                f.model_id.c_str(), f.stable ? 1 : 0, f.grid_n, f.grid_n,
                f.grid_ns, f.roof, f.width, f.push_time, f.smoothing_exponent,
                f.c0_max, f.c1_fd, f.max_graph_norm);
  out << head;
  static_assert(sizeof(double) == 8);
  out.write(reinterpret_cast<const char*>(f.c_trans.data()),
            std::streamsize(f.c_trans.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(f.c_flow.data()),
            std::streamsize(f.c_flow.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

DistributionField load_distribution_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  DistributionField f;
  std::string line;
  if (!std::getline(in, line) || line != "distfield 1")
    throw std::runtime_error("bad field header in " + path);
  int ny = 0, st = 0;
  while (std::getline(in, line)) {
    if (line == "payload") break;
    char key[32];
    if (std::sscanf(line.c_str(), "%31s", key) != 1) continue;
    if (std::strcmp(key, "model") == 0) {
      f.model_id = line.substr(6);
    } else if (std::strcmp(key, "stable") == 0) {
      std::sscanf(line.c_str(), "stable %d", &st);
    } else if (std::strcmp(key, "grid") == 0) {
      std::sscanf(line.c_str(), "grid %d %d %d", &f.grid_n, &ny, &f.grid_ns);
    } else if (std::strcmp(key, "roof") == 0) {
      std::sscanf(line.c_str(), "roof %lg", &f.roof);
    } else if (std::strcmp(key, "width") == 0) {
      std::sscanf(line.c_str(), "width %lg", &f.width);
    } else if (std::strcmp(key, "push") == 0) {
      std::sscanf(line.c_str(), "push %lg", &f.push_time);
    } else if (std::strcmp(key, "exponent") == 0) {
      std::sscanf(line.c_str(), "exponent %lg", &f.smoothing_exponent);
    } else if (std::strcmp(key, "stats") == 0) {
      std::sscanf(line.c_str(), "stats %lg %lg %lg", &f.c0_max, &f.c1_fd,
                  &f.max_graph_norm);
    }
  }
  f.stable = st != 0;
  if (f.grid_n < 2 || f.grid_ns < 2 || f.grid_n != ny)
    throw std::runtime_error("bad field geometry in " + path);
  size_t total = size_t(f.grid_n) * f.grid_n * f.grid_ns;
  f.c_trans.resize(total);
  f.c_flow.resize(total);
  in.read(reinterpret_cast<char*>(f.c_trans.data()),
          std::streamsize(total * sizeof(double)));
  in.read(reinterpret_cast<char*>(f.c_flow.data()),
          std::streamsize(total * sizeof(double)));
  if (!in || in.gcount() != std::streamsize(total * sizeof(double)))
    throw std::runtime_error("truncated field payload in " + path);
  return f;
}

}  // namespace anosov
