#include "anosov/cones.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <thread>

#include "anosov/integrate.hpp"
#include "anosov/metric_one.hpp"
#include "anosov/parallel.hpp"
#include "anosov/rng.hpp"
#include "anosov/splitting.hpp"

namespace anosov {

namespace {

inline double qform(const Mat3& g, const Vec3& v) { return dot(v, g * v); }
inline double gnorm(const Mat3& g, const Vec3& v) {
  return std::sqrt(std::max(0.0, qform(g, v)));
}

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

// L1-normalized trig pair: |cu| + |cf| = 1 exactly on the axes
inline void mix_pair(double theta, double& cu, double& cf) {
  double c = std::cos(theta), s = std::sin(theta);
  double d = std::abs(c) + std::abs(s);
  cu = c / d;
  cf = s / d;
}

}  // namespace

ConeResult cone_contains(const ConeSpec& spec, const ConeFrame& frame,
                         const Vec3& v) {
  if (!(spec.rho > 0.0))
    throw std::invalid_argument("cone aperture must be positive");
  if (dot(v, v) == 0.0)
    throw std::invalid_argument("zero vector has no cone membership");
  Mat3 basis;
  basis.set_col(0, frame.e_s);
  basis.set_col(1, frame.e_u);
  basis.set_col(2, frame.e_f);
  Vec3 c = solve(basis, v);
  double ns = std::abs(c.x) * gnorm(frame.gram, frame.e_s);
  double trans;
  if (spec.starred) {
    trans = gnorm(frame.gram, frame.e_u * c.y + frame.e_f * c.z);
  } else {
    trans = std::abs(c.y) * gnorm(frame.gram, frame.e_u) +
            std::abs(c.z) * gnorm(frame.gram, frame.e_f);
  }
  double margin = spec.rho * ns - trans;
  if (spec.complement) margin = -margin;
  return {margin >= 0.0, margin};
}

std::vector<Vec3> cone_boundary_vectors(const ConeSpec& spec,
                                        const ConeFrame& frame, int count,
                                        double eps) {
  if (count < 1) throw std::invalid_argument("need at least one direction");
  if (!(spec.rho > 0.0))
    throw std::invalid_argument("cone aperture must be positive");
  Vec3 es = frame.e_s / gnorm(frame.gram, frame.e_s);
  Vec3 eu = frame.e_u / gnorm(frame.gram, frame.e_u);
  Vec3 ef = frame.e_f / gnorm(frame.gram, frame.e_f);
  // inward = towards membership: shrink the transverse part for the cone,
  // grow it for the complement
  double factor = spec.complement ? spec.rho * (1.0 + eps)
                                  : spec.rho * (1.0 - eps);
  std::vector<Vec3> out;
  out.reserve(size_t(count));
  for (int k = 0; k < count; ++k) {
    double cu, cf;
    mix_pair(kTwoPi * k / count, cu, cf);
    Vec3 mix = eu * cu + ef * cf;
    if (spec.starred) mix = mix / gnorm(frame.gram, mix);
    out.push_back(es + mix * factor);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cone corollary for the averaged metric

VerificationReport verify_cone_corollary(const FlowModel& m,
                                         const AveragingParams& p,
                                         const CorollaryOptions& opt) {
  if (!(opt.sigma > 0.0))
    throw std::invalid_argument("cone corollary needs a certified exponent");
  if (m.pert.eta != 0.0)
    throw std::invalid_argument(
        "cone corollary rides on the exact eigensplitting: unperturbed "
        "models only (perturbed flows go through the expansion checks)");
  if (!(opt.rho1 > 0.0) || !(opt.rho0 > 0.0))
    throw std::invalid_argument("apertures must be positive");
  if (opt.samples < 1 || opt.directions < 4)
    throw std::invalid_argument("need samples and >= 4 directions");

  std::vector<double> ts = opt.t_grid.empty() ? default_t_grid() : opt.t_grid;
  for (size_t i = 0; i < ts.size(); ++i)
    if (ts[i] < 0.0 || (i > 0 && ts[i] <= ts[i - 1]))
      throw std::invalid_argument("t grid must be nonnegative and increasing");

  // one offset list per sample: 0 and ±t, deduplicated exactly
  std::vector<double> offsets{0.0};
  std::vector<int> plus_idx(ts.size()), minus_idx(ts.size());
  auto offset_index = [&offsets](double t) {
    for (size_t i = 0; i < offsets.size(); ++i)
      if (offsets[i] == t) return int(i);
    offsets.push_back(t);
    return int(offsets.size() - 1);
  };
  for (size_t i = 0; i < ts.size(); ++i) {
    plus_idx[i] = offset_index(ts[i]);
    minus_idx[i] = offset_index(-ts[i]);
  }

  struct SampleOut {
    double margin[4] = {1e300, 1e300, 1e300, 1e300};
    double t[4] = {0, 0, 0, 0};
    int dir[4] = {0, 0, 0, 0};
  };
  std::vector<SampleOut> out(size_t(opt.samples));
  const double rho1 = opt.rho1, eps = opt.boundary_eps, sigma = opt.sigma;

  run_chunked(opt.samples, [&](int si) {
    SampleOut& so = out[size_t(si)];
    Rng rng = Rng::for_sample(opt.seed, "cone-corollary", uint64_t(si));
    Vec3 x = m.normalize(
        {rng.uniform(), rng.uniform(), m.roof * rng.uniform()});
    SplittingFrame spl = invariant_splitting(m, x);
    std::vector<Mat3> w = window_grams(m, p, x, offsets);
    const Mat3& w0 = w[0];
    Vec3 uh = spl.e_u / gnorm(w0, spl.e_u);
    Vec3 sh = spl.e_s / gnorm(w0, spl.e_s);
    Vec3 fh = spl.e_f / gnorm(w0, spl.e_f);
    // componentwise endpoint lengths, one quadratic form per offset
    std::vector<double> qu(offsets.size()), qs(offsets.size()),
        qf(offsets.size());
    for (size_t o = 0; o < offsets.size(); ++o) {
      qu[o] = gnorm(w[o], uh);
      qs[o] = gnorm(w[o], sh);
      qf[o] = gnorm(w[o], fh);
    }
    auto fold = [&so](int fam, double margin, double t, int dir) {
      if (margin < so.margin[fam]) {
        so.margin[fam] = margin;
        so.t[fam] = t;
        so.dir[fam] = dir;
      }
    };
    for (int k = 0; k < opt.directions; ++k) {
      double cu, cf;
      mix_pair(kTwoPi * k / opt.directions, cu, cf);
      Vec3 mix = uh * cu + fh * cf;
      Vec3 v_in = sh + mix * (rho1 * (1.0 - eps));   // inside C_rho1
      Vec3 v_out = sh + mix * (rho1 * (1.0 + eps));  // inside the complement
      Vec3 v_low = sh * (rho1 * (1.0 - eps)) + mix;  // complement at 1/rho1
      double n_in0 = gnorm(w0, v_in), n_low0 = gnorm(w0, v_low);
      for (size_t ti = 0; ti < ts.size(); ++ti) {
        double t = ts[ti];
        int ob = minus_idx[ti], of = plus_idx[ti];
        double shrink = rho1 * std::exp(-0.5 * sigma * t);
        double mix_b = std::abs(cu) * qu[ob] + std::abs(cf) * qf[ob];
        double mix_f = std::abs(cu) * qu[of] + std::abs(cf) * qf[of];
        // (i) backward image nests into the shrunk cone
        fold(0,
             (shrink * qs[ob] - rho1 * (1.0 - eps) * mix_b) /
                 gnorm(w[ob], v_in),
             t, k);
        // (ii) forward image of the complement nests likewise
        fold(1,
             (rho1 * (1.0 + eps) * mix_f - shrink * qs[of]) /
                 gnorm(w[of], v_out),
             t, k);
        // (iii) backward expansion on the cone at 3σ/4
        fold(2, std::log(gnorm(w[ob], v_in) / n_in0) - 0.75 * sigma * t, t,
             k);
        // (iv) forward lower bound on the tight complement at σ/2
        fold(3, std::log(gnorm(w[of], v_low) / n_low0) + 0.5 * sigma * t, t,
             k);
      }
    }
  });

  VerificationReport rep;
  rep.suite = "cone-corollary";
  rep.model_id = m.id();
  rep.slack = opt.slack;
  static const char* fams[4] = {"backward-cone-nesting",
                                "forward-complement-nesting",
                                "backward-cone-expansion",
                                "forward-complement-lower"};
  char where[64];
  for (int i = 0; i < opt.samples; ++i)
    for (int f = 0; f < 4; ++f) {
      std::snprintf(where, sizeof where, "sample %d dir %d", i,
                    out[size_t(i)].dir[f]);
      rep.add_margin(fams[f], out[size_t(i)].margin[f], where,
                     out[size_t(i)].t[f]);
    }
  rep.set_param("sigma", sigma);
  rep.set_param("rho1", rho1);
  rep.set_param("rho0", opt.rho0);
  rep.set_param("samples", opt.samples);
  rep.set_param("directions", opt.directions);
  rep.set_param("boundary_eps", eps);
  rep.set_param("t_max", ts.back());
  if (opt.rho1 >= opt.rho0)
    rep.note("aperture rho1 exceeds the admissible ceiling rho0: control "
             "configuration");
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// Good expansion of the perturbed flows in the orthogonalized metric

namespace {

struct WalkDatum {
  int fam = 0;  // 0 backward cone, 1 forward unstable, 2 containment,
                // 3 stable-in-half-cone
  double t = 0.0;
  int dir = 0;
  double a = 0.0;  // fam 0/1: half-log norm ratio; fam 2/3: aperture ratio
  double b = 0.0;  // fam 2/3: stable share of the image norm
};

// One (sample, strength) measurement: backward walk over the starred-cone
// boundary, forward walk along the pushed unstable direction, containment
// apertures, and the perturbed stable direction's own aperture.
void expansion_walk(const FlowModel& base, const FlowModel& pm,
                    const AveragingParams& p, const PushedFoliation& stable,
                    const PushedFoliation& unstable, const SplitData& d0,
                    const Vec3& x, int directions,
                    const std::vector<double>& ts, double rho, double eps,
                    std::vector<WalkDatum>& out) {
  Vec3 es2 = d0.e_s / gnorm(d0.gram2, d0.e_s);
  Vec3 eu2 = d0.e_u / gnorm(d0.gram2, d0.e_u);
  Vec3 ef2 = d0.e_f / gnorm(d0.gram2, d0.e_f);

  std::vector<Vec3> vs;
  vs.reserve(size_t(directions));
  for (int k = 0; k < directions; ++k) {
    double cu, cf;
    mix_pair(kTwoPi * k / directions, cu, cf);
    Vec3 mix = eu2 * cu + ef2 * cf;
    mix = mix / gnorm(d0.gram2, mix);
    vs.push_back(es2 + mix * (rho * (1.0 - eps)));
  }

  // perturbed stable direction against the base half cone; the direction
  // fields of strong control perturbations converge onto an integration
  // noise floor slightly above the default residual threshold, and the
  // half-cone margin only needs the direction to ~1e-6
  {
    SplittingFrame spl = invariant_splitting(pm, x, 30.0, 1e-6);
    Vec3 v = spl.e_s;
    Vec3 cs = d0.proj_s * v, cu = d0.proj_u * v, cf = d0.proj_f * v;
    double ns = gnorm(d0.gram2, cs), nuf = gnorm(d0.gram2, cu + cf);
    double nv = gnorm(d0.gram2, v);
    out.push_back({3, 0.0, 0, ns > 0 ? nuf / ns : 1e300, ns / nv});
  }

  // backward walk: cone expansion and containment
  Vec3 cur = x;
  Mat3 acc = Mat3::identity();
  double prev = 0.0;
  for (double t : ts) {
    if (t > prev) {
      Mat3 step = Mat3::identity();
      advance(pm, cur, &step, -(t - prev));
      acc = step * acc;
      prev = t;
    }
    SplitData dt =
        t == 0.0 ? d0 : metric_two_data(base, p, stable, unstable, cur);
    for (int k = 0; k < directions; ++k) {
      Vec3 w = acc * vs[size_t(k)];
      double halfln =
          0.5 * std::log(qform(dt.gram2, w) / qform(d0.gram2, vs[size_t(k)]));
      out.push_back({0, t, k, halfln, 0.0});
      Vec3 cs = dt.proj_s * w, cu = dt.proj_u * w, cf = dt.proj_f * w;
      double ns = gnorm(dt.gram2, cs), nuf = gnorm(dt.gram2, cu + cf);
      double nw = gnorm(dt.gram2, w);
      out.push_back({2, t, k, ns > 0 ? nuf / ns : 1e300, ns / nw});
    }
  }

  // forward walk: expansion along the pushed unstable direction
  cur = x;
  acc = Mat3::identity();
  prev = 0.0;
  for (double t : ts) {
    if (t > prev) {
      Mat3 step = Mat3::identity();
      advance(pm, cur, &step, t - prev);
      acc = step * acc;
      prev = t;
    }
    SplitData dt =
        t == 0.0 ? d0 : metric_two_data(base, p, stable, unstable, cur);
    Vec3 w = acc * eu2;
    double halfln = 0.5 * std::log(qform(dt.gram2, w) / qform(d0.gram2, eu2));
    out.push_back({1, t, 0, halfln, 0.0});
  }
}

std::vector<double> expansion_t_grid(const GoodExpansionOptions& opt) {
  if (!opt.t_grid.empty()) {
    for (size_t i = 0; i < opt.t_grid.size(); ++i)
      if (opt.t_grid[i] < 0.0 ||
          (i > 0 && opt.t_grid[i] <= opt.t_grid[i - 1]))
        throw std::invalid_argument("t grid must be nonnegative, increasing");
    return opt.t_grid;
  }
  std::vector<double> ts;
  for (int k = 1; k <= 20; ++k) ts.push_back(0.1 * k);
  return ts;
}

void check_expansion_inputs(const FlowModel& base,
                            const PushedFoliation& stable,
                            const PushedFoliation& unstable,
                            const GoodExpansionOptions& opt) {
  if (base.pert.eta != 0.0)
    throw std::invalid_argument(
        "expansion checks want the unperturbed base model; strengths are "
        "applied internally");
  if (stable.smoothed.model_id != base.id() ||
      unstable.smoothed.model_id != base.id())
    throw std::invalid_argument("foliations belong to another model");
  if (!stable.smoothed.stable || unstable.smoothed.stable)
    throw std::invalid_argument(
        "expansion checks want (stable, unstable) foliations in that order");
  if (!(opt.rho > 0.0) || !(opt.rho < 0.5 * opt.rho0))
    throw std::invalid_argument(
        "starred aperture must stay below half the admissible ceiling");
  if (opt.samples < 1 || opt.directions < 4)
    throw std::invalid_argument("need samples and >= 4 directions");
  if (!(opt.eta0 > 0.0))
    throw std::invalid_argument("perturbation scale must be positive");
}

std::vector<double> sweep_etas(const GoodExpansionOptions& opt) {
  return {0.0, 0.5 * opt.eta0, -0.5 * opt.eta0, opt.eta0, -opt.eta0};
}

}  // namespace

ExpansionCalibration calibrate_expansion_rate(const FlowModel& base,
                                              const AveragingParams& p,
                                              const PushedFoliation& stable,
                                              const PushedFoliation& unstable,
                                              const GoodExpansionOptions& opt) {
  check_expansion_inputs(base, stable, unstable, opt);
  const std::vector<double> ts = {0.1, 0.25, 0.5, 1.0, 2.0};
  const int samples = std::min(opt.samples, 16);
  const double control_eta = opt.control_eta_factor * opt.eta0;
  std::vector<double> etas = sweep_etas(opt);
  size_t n_sweep = etas.size();
  etas.push_back(control_eta);

  std::vector<FlowModel> models;
  double cap = std::max(opt.eta0, std::abs(control_eta));
  for (double e : etas)
    models.push_back(e == 0.0 ? base : perturbed_model(base, e, cap));

  // per-sample minima: [0] sweep, [1] control
  struct Mins {
    double rate[2] = {1e300, 1e300};
  };
  std::vector<Mins> mins(static_cast<size_t>(samples));

  run_chunked(samples, [&](int si) {
    Rng rng = Rng::for_sample(opt.seed, "expansion-cal", uint64_t(si));
    Vec3 x = base.normalize(
        {rng.uniform(), rng.uniform(), base.roof * rng.uniform()});
    SplitData d0 = metric_two_data(base, p, stable, unstable, x);
    std::vector<WalkDatum> data;
    for (size_t ei = 0; ei < etas.size(); ++ei) {
      data.clear();
      expansion_walk(base, models[ei], p, stable, unstable, d0, x,
                     opt.directions, ts, opt.rho, opt.boundary_eps, data);
      double& rate = mins[size_t(si)].rate[ei < n_sweep ? 0 : 1];
      for (const WalkDatum& d : data) {
        if (d.t <= 0.0) continue;
        if (d.fam == 0 || d.fam == 1) {
          rate = std::min(rate, d.a / d.t);
        } else if (d.fam == 2 && d.a > 0.5 * opt.rho) {
          // containment forces e^{-ς t/4} ρ >= aperture
          rate = std::min(rate, (4.0 / d.t) * std::log(opt.rho / d.a));
        }
      }
    }
  });

  ExpansionCalibration cal;
  cal.sweep_rate = 1e300;
  cal.control_rate = 1e300;
  for (const Mins& mn : mins) {
    cal.sweep_rate = std::min(cal.sweep_rate, mn.rate[0]);
    cal.control_rate = std::min(cal.control_rate, mn.rate[1]);
  }
  cal.separated = cal.control_rate < cal.sweep_rate;
  if (cal.separated)
    // a deeply negative control rate must not drag varsigma down: clamp the
    // interpolant to the plain 3/4 pick
    cal.varsigma = std::min(
        std::max(cal.control_rate + 0.75 * (cal.sweep_rate - cal.control_rate),
                 0.75 * cal.sweep_rate),
        0.98 * cal.sweep_rate);
  else
    cal.varsigma = 0.75 * cal.sweep_rate;
  return cal;
}

PerturbationScale calibrate_perturbation_scale(
    const FlowModel& base, const AveragingParams& p,
    const PushedFoliation& stable, const PushedFoliation& unstable,
    const GoodExpansionOptions& opt) {
  check_expansion_inputs(base, stable, unstable, opt);
  const std::vector<double> ts = {0.1, 0.25, 0.5, 1.0, 2.0};
  const int samples = std::min(opt.samples, 8);
  const int directions = std::max(4, std::min(opt.directions, 8));

  // zero-strength pass: base data per sample, expansion rates, headroom
  std::vector<Vec3> xs(static_cast<size_t>(samples));
  std::vector<SplitData> d0s(static_cast<size_t>(samples));
  std::vector<double> rates(static_cast<size_t>(samples), 1e300);
  std::vector<double> heads(static_cast<size_t>(samples), 1e300);
  std::vector<double> sig0s(static_cast<size_t>(samples), 0.0);
  run_chunked(samples, [&](int si) {
    Rng rng = Rng::for_sample(opt.seed, "perturbation-scale", uint64_t(si));
    xs[size_t(si)] = base.normalize(
        {rng.uniform(), rng.uniform(), base.roof * rng.uniform()});
    d0s[size_t(si)] =
        metric_two_data(base, p, stable, unstable, xs[size_t(si)]);
    std::vector<WalkDatum> zero;
    expansion_walk(base, base, p, stable, unstable, d0s[size_t(si)],
                   xs[size_t(si)], directions, ts, opt.rho, opt.boundary_eps,
                   zero);
    for (const WalkDatum& d : zero)
      if ((d.fam == 0 || d.fam == 1) && d.t > 0.0)
        rates[size_t(si)] = std::min(rates[size_t(si)], d.a / d.t);
    double sig0 = 0.75 * rates[size_t(si)];
    sig0s[size_t(si)] = sig0;
    for (const WalkDatum& d : zero) {
      double head = 1e300;
      if (d.fam == 2 && d.t > 0.0)
        head = opt.rho * std::max(0.5, std::exp(-0.25 * sig0 * d.t)) - d.a;
      else if (d.fam == 3)
        head = 0.5 * opt.rho - d.a;
      heads[size_t(si)] = std::min(heads[size_t(si)], head);
    }
  });
  double headroom = 1e300;
  for (double h : heads) headroom = std::min(headroom, h);
  if (!(headroom > 0.0))
    throw std::runtime_error(
        "containment has no headroom even at strength zero");

  // worst containment margin across samples and both signs at strength eta;
  // the aperture response is strongly nonlinear in eta, so the failure
  // threshold is located by bisection rather than a tangent-slope estimate
  FlowModel family = perturbed_model(base, 0.0, 0.05);
  auto worst_margin = [&](double eta) {
    FlowModel up = family.with_eta(eta);
    FlowModel dn = family.with_eta(-eta);
    std::vector<double> mins(static_cast<size_t>(samples), 1e300);
    run_chunked(samples, [&](int si) {
      for (const FlowModel* pm : {&up, &dn}) {
        std::vector<WalkDatum> data;
        expansion_walk(base, *pm, p, stable, unstable, d0s[size_t(si)],
                       xs[size_t(si)], directions, ts, opt.rho,
                       opt.boundary_eps, data);
        for (const WalkDatum& d : data) {
          double m = 1e300;
          if (d.fam == 2 && d.t > 0.0)
            m = opt.rho *
                    std::max(0.5, std::exp(-0.25 * sig0s[size_t(si)] * d.t)) -
                d.a;
          else if (d.fam == 3)
            m = 0.5 * opt.rho - d.a;
          mins[size_t(si)] = std::min(mins[size_t(si)], m);
        }
      }
    });
    double worst = 1e300;
    for (double m : mins) worst = std::min(worst, m);
    return worst;
  };

  double hi = 0.05;
  if (worst_margin(hi) > 0.0)
    throw std::runtime_error(
        "perturbation family cannot break containment within the knob range");
  double lo = 0.0;
  for (int it = 0; it < 18; ++it) {
    double mid = 0.5 * (lo + hi);
    if (worst_margin(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  double eta_star = lo > 0.0 ? lo : 0.5 * hi;

  PerturbationScale ps;
  ps.headroom = headroom;
  ps.leak = headroom / eta_star;  // secant slope at the failure threshold
  ps.eta0 = eta_star / 3.0;
  if (!(ps.eta0 > 0.0) || !std::isfinite(ps.eta0))
    throw std::runtime_error("perturbation scale calibration failed");

  // stable-direction tilt per unit strength at the chosen scale
  {
    FlowModel pm = family.with_eta(ps.eta0);
    double worst = 0.0;
    for (int si = 0; si < samples; ++si) {
      SplittingFrame spl = invariant_splitting(pm, xs[size_t(si)], 30.0, 1e-6);
      const SplitData& d0 = d0s[size_t(si)];
      Vec3 cs = d0.proj_s * spl.e_s;
      Vec3 cuf = d0.proj_u * spl.e_s + d0.proj_f * spl.e_s;
      worst = std::max(worst, gnorm(d0.gram2, cuf) /
                                  std::max(gnorm(d0.gram2, cs), 1e-300));
    }
    ps.leak_stable = worst / ps.eta0;
  }
  return ps;
}

VerificationReport verify_good_expansion(const FlowModel& base,
                                         const AveragingParams& p,
                                         const PushedFoliation& stable,
                                         const PushedFoliation& unstable,
                                         const GoodExpansionOptions& opt,
                                         const std::vector<double>& etas) {
  check_expansion_inputs(base, stable, unstable, opt);
  std::vector<double> ts = expansion_t_grid(opt);
  std::vector<double> es = etas.empty() ? sweep_etas(opt) : etas;

  ExpansionCalibration cal;
  double varsigma = opt.varsigma;
  if (!(varsigma > 0.0)) {
    cal = calibrate_expansion_rate(base, p, stable, unstable, opt);
    varsigma = cal.varsigma;
  }
  if (!(varsigma > 0.0))
    throw std::runtime_error(
        "expansion calibration produced no positive rate");

  double cap = opt.eta0;
  for (double e : es) cap = std::max(cap, std::abs(e));
  std::vector<FlowModel> models;
  for (double e : es)
    models.push_back(e == 0.0 ? base : perturbed_model(base, e, cap));

  struct SampleOut {
    double margin[4] = {1e300, 1e300, 1e300, 1e300};
    double t[4] = {0, 0, 0, 0};
    int dir[4] = {0, 0, 0, 0};
    double eta[4] = {0, 0, 0, 0};
  };
  std::vector<SampleOut> out(size_t(opt.samples));

  run_chunked(opt.samples, [&](int si) {
    SampleOut& so = out[size_t(si)];
    Rng rng = Rng::for_sample(opt.seed, "expansion", uint64_t(si));
    Vec3 x = base.normalize(
        {rng.uniform(), rng.uniform(), base.roof * rng.uniform()});
    SplitData d0 = metric_two_data(base, p, stable, unstable, x);
    std::vector<WalkDatum> data;
    for (size_t ei = 0; ei < es.size(); ++ei) {
      data.clear();
      expansion_walk(base, models[ei], p, stable, unstable, d0, x,
                     opt.directions, ts, opt.rho, opt.boundary_eps, data);
      for (const WalkDatum& d : data) {
        double margin;
        if (d.fam == 0 || d.fam == 1) {
          margin = d.a - varsigma * d.t;
        } else if (d.fam == 2) {
          double target =
              opt.rho * std::max(0.5, std::exp(-0.25 * varsigma * d.t));
          margin = (target - d.a) * d.b;
        } else {
          margin = (0.5 * opt.rho - d.a) * d.b;
        }
        if (margin < so.margin[d.fam]) {
          so.margin[d.fam] = margin;
          so.t[d.fam] = d.t;
          so.dir[d.fam] = d.dir;
          so.eta[d.fam] = es[ei];
        }
      }
    }
  });

  VerificationReport rep;
  rep.suite = "good-expansion";
  rep.model_id = base.id();
  rep.slack = opt.slack;
  static const char* fams[4] = {"cone-backward-expansion",
                                "unstable-forward-expansion",
                                "cone-backward-containment",
                                "stable-in-half-cone"};
  char where[64];
  for (int i = 0; i < opt.samples; ++i)
    for (int f = 0; f < 4; ++f) {
      const SampleOut& so = out[size_t(i)];
      std::snprintf(where, sizeof where, "sample %d eta %+.4g dir %d", i,
                    so.eta[f], so.dir[f]);
      rep.add_margin(fams[f], so.margin[f], where, so.t[f]);
    }
  rep.set_param("varsigma", varsigma);
  rep.set_param("rho", opt.rho);
  rep.set_param("rho0", opt.rho0);
  rep.set_param("eta0", opt.eta0);
  rep.set_param("samples", opt.samples);
  rep.set_param("directions", opt.directions);
  rep.set_param("t_max", ts.back());
  rep.set_param("epsilon_regime", varsigma / 20.0);
  if (!(opt.varsigma > 0.0)) {
    rep.set_param("sweep_rate", cal.sweep_rate);
    rep.set_param("control_rate", cal.control_rate);
    rep.set_param("calibration_separated", cal.separated ? 1.0 : 0.0);
    if (!cal.separated)
      rep.note("calibration saw no rate separation between sweep and "
               "control strengths");
  }
  double eta_max = 0.0;
  for (double e : es) eta_max = std::max(eta_max, std::abs(e));
  if (eta_max > opt.eta0 * (1.0 + 1e-12))
    rep.note("strength sweep exceeds eta0: control configuration");
  rep.finalize();
  return rep;
}

}  // namespace anosov
