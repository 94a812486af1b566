#include "anosov/metric_one.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "anosov/integrate.hpp"
#include "anosov/rng.hpp"
#include "anosov/splitting.hpp"

namespace anosov {

namespace {

// Merge sorted values, dropping near-duplicates.
std::vector<double> merge_cuts(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double t : v)
    if (out.empty() || t - out.back() > 1e-9) out.push_back(t);
  return out;
}

int cut_index(const std::vector<double>& cuts, double t) {
  auto it = std::lower_bound(cuts.begin(), cuts.end(), t - 1e-9);
  if (it == cuts.end() || std::fabs(*it - t) > 1e-9)
    throw std::logic_error("window cut not found");
  return int(it - cuts.begin());
}

struct NodeTask {
  double t;
  double w;
  int piece;
};

// Quadrature tasks covering [cuts.front(), cuts.back()], panels aligned to
// the cuts so each piece integrates a smooth stretch of the orbit.
std::vector<NodeTask> schedule(const std::vector<double>& cuts,
                               int nodes_per_unit) {
  static const auto gl = [] {
    std::pair<std::vector<double>, std::vector<double>> p;
    gauss_legendre(12, p.first, p.second);
    return p;
  }();
  const std::vector<double>& gl_x = gl.first;
  const std::vector<double>& gl_w = gl.second;
  std::vector<NodeTask> tasks;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i], b = cuts[i + 1];
    double len = b - a;
    int panels = std::max(1, (int)std::ceil(len * nodes_per_unit / 12.0));
    for (int k = 0; k < panels; ++k) {
      double pa = a + len * k / panels, pb = a + len * (k + 1) / panels;
      double mid = 0.5 * (pa + pb), half = 0.5 * (pb - pa);
      for (int j = 0; j < 12; ++j)
        tasks.push_back({mid + half * gl_x[j], half * gl_w[j], (int)i});
    }
  }
  return tasks;
}

void accumulate(const FlowModel& m, const Vec3& x,
                const std::vector<NodeTask>& tasks, bool forward,
                std::vector<Mat3>& piece_gram, double h) {
  Vec3 p = x;
  Mat3 M = Mat3::identity();
  double t_cur = 0.0;
  for (const NodeTask& task : tasks) {
    if (forward ? task.t <= 0 : task.t >= 0) continue;
    advance(m, p, &M, task.t - t_cur, h);
    t_cur = task.t;
    Mat3 g = m.gram_ref(p);
    Mat3 gm = g * M;
    Mat3 q = M.transposed() * gm;
    piece_gram[task.piece] = piece_gram[task.piece] + q * task.w;
  }
}

}  // namespace

std::vector<Mat3> window_grams(const FlowModel& m, const AveragingParams& p,
                               const Vec3& x0,
                               const std::vector<double>& offsets, double h) {
  const double L = p.window_length;
  Vec3 x = m.normalize(x0);

  std::vector<double> breaks;
  breaks.reserve(2 * offsets.size());
  for (double o : offsets) {
    breaks.push_back(o);
    breaks.push_back(o + L);
  }
  std::vector<double> ends = merge_cuts(breaks);
  double tmin = ends.front(), tmax = ends.back();

  std::vector<double> cross;
  if (tmax > 0) {
    Vec3 q = x;
    advance(m, q, static_cast<Mat3*>(nullptr), tmax, h, &cross);
  }
  if (tmin < 0) {
    Vec3 q = x;
    advance(m, q, static_cast<Mat3*>(nullptr), tmin, h, &cross);
  }
  std::vector<double> all = ends;
  for (double c : cross)
    if (c > tmin + 1e-9 && c < tmax - 1e-9) all.push_back(c);
  std::vector<double> cuts = merge_cuts(all);

  std::vector<NodeTask> tasks = schedule(cuts, p.nodes_per_unit);
  std::vector<Mat3> piece_gram(cuts.size() - 1);

  // forward tasks in ascending |t|, backward in descending t (= ascending |t|)
  std::vector<NodeTask> fwd, bwd;
  for (const NodeTask& t : tasks) (t.t > 0 ? fwd : bwd).push_back(t);
  std::sort(fwd.begin(), fwd.end(),
            [](const NodeTask& a, const NodeTask& b) { return a.t < b.t; });
  std::sort(bwd.begin(), bwd.end(),
            [](const NodeTask& a, const NodeTask& b) { return a.t > b.t; });
  accumulate(m, x, fwd, true, piece_gram, h);
  accumulate(m, x, bwd, false, piece_gram, h);

  std::vector<Mat3> prefix(cuts.size());
  prefix[0] = Mat3::zero();
  for (size_t i = 0; i + 1 < cuts.size(); ++i)
    prefix[i + 1] = prefix[i] + piece_gram[i];

  std::vector<Mat3> out;
  out.reserve(offsets.size());
  for (double o : offsets) {
    int ia = cut_index(cuts, o), ib = cut_index(cuts, o + L);
    out.push_back((prefix[ib] - prefix[ia]) * (1.0 / L));
  }
  return out;
}

Mat3 metric_one_gram(const FlowModel& m, const AveragingParams& p,
                     const Vec3& x, double h) {
  return window_grams(m, p, x, {0.0}, h)[0];
}

double metric_one(const FlowModel& m, const AveragingParams& p, const Vec3& x,
                  const Vec3& v, const Vec3& w) {
  Mat3 g = metric_one_gram(m, p, x);
  return dot(v, g * w);
}

Mat3 metric_one_flow_derivative(const FlowModel& m, const AveragingParams& p,
                                const Vec3& x0) {
  Vec3 x = m.normalize(x0);
  TangentFlow tf = tangent_map(m, x, p.window_length);
  Mat3 far = tf.dt.transposed() * (m.gram_ref(tf.p) * tf.dt);
  return (far - m.gram_ref(x)) * (1.0 / p.window_length);
}

std::vector<double> default_t_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 50; ++i) g.push_back(0.1 * i);
  return g;
}

namespace {

struct RateSample {
  int sample;
  double t;
  double lr_u, lr_s, lr_f;  // measured log norm ratios
};

}  // namespace

VerificationReport verify_metric_lemma(const FlowModel& m,
                                       const AveragingParams& p,
                                       const MetricLemmaOptions& opt) {
  VerificationReport rep;
  rep.suite = "metric-lemma";
  rep.model_id = m.id();
  rep.slack = opt.slack;

  std::vector<double> grid = opt.t_grid.empty() ? default_t_grid() : opt.t_grid;
  std::sort(grid.begin(), grid.end());
  if (grid.front() < 0)
    throw std::invalid_argument("verify_metric_lemma: t_grid must be >= 0");

  std::vector<double> offsets;
  for (double t : grid) {
    offsets.push_back(t);
    if (t > 0) offsets.push_back(-t);
  }

  const double log_c1 = std::log(m.c_one());
  const double lambda = p.lambda;
  std::vector<RateSample> data;
  data.reserve(size_t(opt.samples) * grid.size());
  double equiv_c = std::numeric_limits<double>::infinity(), equiv_cc = 0.0;
  double min_angle = std::numeric_limits<double>::infinity();

  for (int i = 0; i < opt.samples; ++i) {
    Rng rng = Rng::for_sample(opt.seed, "metric-lemma", uint64_t(i));
    Vec3 x{rng.uniform(), rng.uniform(), rng.uniform() * m.roof};
    SplittingFrame fr = invariant_splitting(m, x);
    std::vector<Mat3> w = window_grams(m, p, x, offsets);

    // offsets are stored as {t, -t} pairs in grid order; map back
    auto gram_at = [&](double o) -> const Mat3& {
      for (size_t k = 0; k < offsets.size(); ++k)
        if (std::fabs(offsets[k] - o) < 1e-12) return w[k];
      throw std::logic_error("offset lookup");
    };

    const Mat3& w0 = gram_at(0.0);
    double qu0 = dot(fr.e_u, w0 * fr.e_u);
    double qs0 = dot(fr.e_s, w0 * fr.e_s);
    double qf0 = dot(fr.e_f, w0 * fr.e_f);

    // uniform equivalence with the reference metric at x
    Mat3 r = spd_inv_sqrt(m.gram_ref(m.normalize(x)));
    Mat3 b = r * (w0 * r);
    Vec3 ev;
    Mat3 evec;
    sym_eigen(b, ev, evec);
    equiv_c = std::min(equiv_c, std::sqrt(ev.x));
    equiv_cc = std::max(equiv_cc, std::sqrt(ev.z));

    double cos_us =
        std::fabs(dot(fr.e_u, w0 * fr.e_s)) / std::sqrt(qu0 * qs0);
    min_angle = std::min(min_angle, std::acos(std::min(1.0, cos_us)));

    for (double t : grid) {
      if (t == 0.0) {
        data.push_back({i, 0.0, 0.0, 0.0, 0.0});
        continue;
      }
      double qu = dot(fr.e_u, gram_at(t) * fr.e_u);
      double qs = dot(fr.e_s, gram_at(-t) * fr.e_s);
      double qf = dot(fr.e_f, gram_at(t) * fr.e_f);
      data.push_back({i, t, 0.5 * std::log(qu / qu0), 0.5 * std::log(qs / qs0),
                      0.5 * std::log(qf / qf0)});
    }
  }

  double sigma = opt.sigma_override;
  if (sigma <= 0.0) {
    // Admissible exponents form an interval: expansion margins shrink with σ,
    // the flow-family margins grow with σ.  Its endpoints come straight from
    // the measured rates.
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    bool feasible = true;
    for (const RateSample& s : data) {
      if (s.t == 0.0) continue;
      hi = std::min(hi, (s.lr_u + opt.slack) / s.t);
      hi = std::min(hi, (s.lr_s + opt.slack) / s.t);
      if (log_c1 + s.lr_f < -opt.slack || log_c1 - s.lr_f < -opt.slack)
        feasible = false;  // C1 band itself violated; no σ can help
      lo = std::max(lo, 4.0 * std::max(0.0, -s.lr_f - opt.slack) / s.t);
      lo = std::max(lo, 4.0 * std::max(0.0, s.lr_f - opt.slack) / s.t);
    }
    rep.set_param("sigma_interval_lo", lo);
    rep.set_param("sigma_interval_hi", hi);
    sigma = std::min(hi - 1e-9, lambda * (1.0 - 1e-9));
    if (!feasible || sigma < lo || !(sigma > 0.0)) {
      rep.note("no admissible exponent: calibrated interval is empty");
      sigma = std::max(sigma, std::min(lo, lambda * (1.0 - 1e-9)));
    }
  }
  rep.set_param("sigma", sigma);
  rep.set_param("sigma_cap", p.sigma_cap);
  rep.set_param("window_length", p.window_length);
  rep.set_param("short_threshold", p.short_threshold);
  rep.set_param("k_constant", p.k_constant);
  rep.set_param("split_a", p.split_a);
  rep.set_param("beta", p.beta);
  rep.set_param("lambda", lambda);
  rep.set_param("c_star", p.c_star);
  rep.set_param("c_one", m.c_one());
  rep.set_param("samples", opt.samples);
  rep.set_param("t_max", grid.back());
  rep.set_param("equiv_lower", equiv_c);
  rep.set_param("equiv_upper", equiv_cc);
  rep.set_param("min_unstable_stable_angle", min_angle);

  char where[64];
  for (const RateSample& s : data) {
    std::snprintf(where, sizeof where, "sample %d", s.sample);
    double band = std::min(log_c1, sigma * s.t / 4.0);
    rep.add_margin("unstable-expansion", s.lr_u - sigma * s.t, where, s.t);
    rep.add_margin("stable-contraction", s.lr_s - sigma * s.t, where, s.t);
    rep.add_margin("flow-lower", s.lr_f + band, where, s.t);
    rep.add_margin("flow-upper", band - s.lr_f, where, s.t);
  }
  rep.finalize();
  return rep;
}

}  // namespace anosov
