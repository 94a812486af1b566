#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "anosov/averaging.hpp"
#include "anosov/gridfield.hpp"
#include "anosov/integrate.hpp"
#include "anosov/metric_one.hpp"
#include "anosov/model.hpp"
#include "anosov/rng.hpp"
#include "anosov/splitting.hpp"

using namespace anosov;

namespace {
const double kLamPlus = (3.0 + std::sqrt(5.0)) / 2.0;
const double kLam = std::log(kLamPlus);
}  // namespace

TEST_CASE("splitting: exact branch returns the eigenframe") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  SplittingFrame f = invariant_splitting(m, {0.37, 0.81, 0.42});
  CHECK(f.exact);
  CHECK(f.residual == 0.0);
  CHECK(norm(f.e_u - cat_unstable_dir()) == 0.0);
  CHECK(norm(f.e_s - cat_stable_dir()) == 0.0);
  CHECK(f.e_f.x == 0.0);
  CHECK(f.e_f.y == 0.0);
  CHECK(f.e_f.z == 1.0);
}

TEST_CASE("splitting: numerical branch converges to the perturbed frame") {
  FlowModel base = make_cat_model(BaseMetric::canonical);
  FlowModel m = perturbed_model(base, 0.02, 0.05);
  Vec3 x{0.3, 0.55, 0.21};

  SplittingFrame f5 = invariant_splitting(m, x, 5.0, 1.0);
  SplittingFrame f10 = invariant_splitting(m, x, 10.0, 1e-2);
  SplittingFrame f20 = invariant_splitting(m, x, 20.0, 1e-8);
  CHECK_FALSE(f20.exact);

  // e_f is the normalized generator
  Vec3 v = m.vector_field(x);
  CHECK(direction_angle(f20.e_f, v) < 1e-15);

  // Cauchy decay: consecutive-horizon distance shrinks with the horizon.
  // The slowest contamination is the flow component, decaying like λ₊^{-H}.
  double du_far = direction_angle(f20.e_u, f10.e_u);
  double du_near = direction_angle(f10.e_u, f5.e_u);
  double ds_far = direction_angle(f20.e_s, f10.e_s);
  double ds_near = direction_angle(f10.e_s, f5.e_s);
  CHECK(du_far < du_near);
  CHECK(ds_far < ds_near);
  CHECK(du_far < 1e-4);
  CHECK(ds_far < 1e-4);

  // the perturbed directions stay O(eta) from the unperturbed ones
  CHECK(direction_angle(f20.e_u, cat_unstable_dir()) < 10 * 0.02);
  CHECK(direction_angle(f20.e_s, cat_stable_dir()) < 10 * 0.02);

  // residual decays over the last unit
  CHECK(f20.residual < 1e-8);
  CHECK_THROWS(invariant_splitting(m, x, 1.0));
}

TEST_CASE("averaging: canonical parameters pick the smallest window") {
  AveragingParams p = choose_averaging_params(kLam, 1.0);
  CHECK(p.window_length == 8.0);
  CHECK(p.short_threshold == doctest::Approx(1.25 * std::log(8.0)).epsilon(1e-14));
  CHECK(p.split_a == doctest::Approx(1.0 - p.short_threshold / 8.0));
  CHECK(p.sigma > 0.0);
  CHECK(p.sigma <= p.sigma_cap);
  CHECK(p.sigma_cap ==
        doctest::Approx(std::min(kLam / 2.0, 1.0 / (4.0 * p.short_threshold))));
  // window-split inequality, recomputed from the definition
  double beta = beta_value(kLam, 1.0, p.window_length, p.short_threshold);
  CHECK(beta == doctest::Approx(p.beta));
  CHECK(beta * (1.0 - std::exp(-2.0 * kLam * 8.0)) >= 0.5);
  CHECK_NOTHROW(p.validate());

  AveragingParams bad = p;
  bad.sigma = 2.0 * p.sigma_cap;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("averaging: minimal short-time threshold solves its constraint") {
  double a = min_short_threshold(0.9624, 0.382);
  CHECK(0.382 * std::exp(0.9624 * a / 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(min_short_threshold(1.0, 1.0) == 0.0);
}

TEST_CASE("averaging: no admissible window throws") {
  CHECK_THROWS(choose_averaging_params(0.2, 0.05));
}

TEST_CASE("metric one: closed forms on the canonical model") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  AveragingParams p = choose_averaging_params(m);
  const double L = p.window_length;
  Vec3 x{0.29, 0.64, 0.57};
  Vec3 eu = cat_unstable_dir(), es = cat_stable_dir(), ef{0, 0, 1};

  Mat3 g1 = metric_one_gram(m, p, x);
  Mat3 g = m.gram_ref(x);

  double ratio_u = dot(eu, g1 * eu) / dot(eu, g * eu);
  double expect_u = (std::exp(2.0 * L * kLam) - 1.0) / (2.0 * L * kLam);
  CHECK(ratio_u == doctest::Approx(expect_u).epsilon(1e-12));

  // the stable form sits 7 orders below the unstable scale of the window
  // Gram, so it carries that scale's roundoff (~1e-10 relative)
  double ratio_s = dot(es, g1 * es) / dot(es, g * es);
  double expect_s = (1.0 - std::exp(-2.0 * L * kLam)) / (2.0 * L * kLam);
  CHECK(ratio_s == doctest::Approx(expect_s).epsilon(1e-9));

  // flow direction keeps unit speed
  CHECK(metric_one(m, p, x, ef, ef) == doctest::Approx(1.0).epsilon(1e-13));

  // the three directions stay orthogonal in the averaged metric
  double nu = std::sqrt(dot(eu, g1 * eu)), ns = std::sqrt(dot(es, g1 * es));
  CHECK(std::fabs(dot(eu, g1 * es)) <= 1e-10 * nu * ns);
  CHECK(std::fabs(dot(eu, g1 * ef)) <= 1e-12 * nu);
  CHECK(std::fabs(dot(es, g1 * ef)) <= 1e-12 * ns);
}

TEST_CASE("metric one: bilinear, symmetric, positive") {
  FlowModel m = make_cat_model(BaseMetric::wobbled);
  AveragingParams p = choose_averaging_params(m);
  Vec3 x{0.82, 0.13, 0.35};
  Vec3 v{0.3, -0.7, 0.2}, w{-0.1, 0.4, 0.9};
  double vw = metric_one(m, p, x, v, w);
  CHECK(metric_one(m, p, x, v * 2.0, w) == doctest::Approx(2.0 * vw).epsilon(1e-14));
  CHECK(metric_one(m, p, x, w, v) == doctest::Approx(vw).epsilon(1e-14));
  CHECK(metric_one(m, p, x, v, v) > 0.0);
}

TEST_CASE("metric one: window grams match the pulled-back cocycle") {
  for (BaseMetric bm : {BaseMetric::canonical, BaseMetric::wobbled}) {
    FlowModel m = make_cat_model(bm);
    AveragingParams p = choose_averaging_params(m);
    Vec3 x{0.41, 0.77, 0.66};
    double t = 1.3;  // crosses the roof once
    auto w = window_grams(m, p, x, {0.0, t, -t});

    TangentFlow fwd = tangent_map(m, x, t);
    Mat3 pulled = fwd.dt.transposed() * (metric_one_gram(m, p, fwd.p) * fwd.dt);
    for (int i = 0; i < 9; ++i)
      CHECK(w[1].a[i] ==
            doctest::Approx(pulled.a[i]).epsilon(1e-11).scale(frobenius(pulled)));

    TangentFlow bwd = tangent_map(m, x, -t);
    Mat3 pulled2 = bwd.dt.transposed() * (metric_one_gram(m, p, bwd.p) * bwd.dt);
    for (int i = 0; i < 9; ++i)
      CHECK(w[2].a[i] ==
            doctest::Approx(pulled2.a[i]).epsilon(1e-11).scale(frobenius(pulled2)));
  }
}

TEST_CASE("metric one: flow derivative agrees with finite differences") {
  FlowModel m = make_cat_model(BaseMetric::wobbled);
  AveragingParams p = choose_averaging_params(m);
  Vec3 x{0.23, 0.48, 0.52};
  Mat3 analytic = metric_one_flow_derivative(m, p, x);
  double eps = 1e-4;
  auto w = window_grams(m, p, x, {eps, -eps});
  Mat3 fd = (w[0] - w[1]) * (1.0 / (2.0 * eps));
  double scale = frobenius(analytic) + 1.0;
  for (int i = 0; i < 9; ++i)
    CHECK(fd.a[i] == doctest::Approx(analytic.a[i]).epsilon(1e-6).scale(scale));
}

TEST_CASE("metric lemma: canonical model certifies at the full rate") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  AveragingParams p = choose_averaging_params(m);
  MetricLemmaOptions opt;
  opt.samples = 20;
  for (int i = 0; i <= 20; ++i) opt.t_grid.push_back(0.25 * i);

  SUBCASE("explicit full exponent") {
    opt.sigma_override = kLam;
    VerificationReport rep = verify_metric_lemma(m, p, opt);
    CHECK(rep.pass);
    CHECK(rep.worst_margin() >= -1e-6);
    CHECK(rep.worst_margin() <= 1e-9);  // equalities, not slack-eating
  }
  SUBCASE("calibrated exponent reaches the full rate") {
    VerificationReport rep = verify_metric_lemma(m, p, opt);
    CHECK(rep.pass);
    double sigma = 0.0, hi = 0.0;
    for (auto& kv : rep.params) {
      if (kv.first == "sigma") sigma = kv.second;
      if (kv.first == "sigma_interval_hi") hi = kv.second;
    }
    CHECK(sigma == doctest::Approx(kLam).epsilon(1e-6));
    CHECK(hi >= kLam);
  }
  SUBCASE("inflated exponent fails") {
    opt.sigma_override = 1.1 * kLam;
    VerificationReport rep = verify_metric_lemma(m, p, opt);
    CHECK_FALSE(rep.pass);
    const MarginRecord* r = rep.find("unstable-expansion");
    REQUIRE(r != nullptr);
    CHECK(r->margin < -1e-3);
  }
  SUBCASE("t = 0 gives exact equalities") {
    opt.t_grid = {0.0};
    VerificationReport rep = verify_metric_lemma(m, p, opt);
    CHECK(rep.pass);
    CHECK(rep.worst_margin() == 0.0);
  }
}

TEST_CASE("metric lemma: wobbled model certifies a positive exponent") {
  FlowModel m = make_cat_model(BaseMetric::wobbled);
  AveragingParams p = choose_averaging_params(m);
  MetricLemmaOptions opt;
  opt.samples = 20;
  for (int i = 0; i <= 20; ++i) opt.t_grid.push_back(0.25 * i);

  VerificationReport rep = verify_metric_lemma(m, p, opt);
  CHECK(rep.pass);
  double sigma = 0.0, lo = -1.0, hi = -1.0, equiv_c = 0, equiv_cc = 0;
  for (auto& kv : rep.params) {
    if (kv.first == "sigma") sigma = kv.second;
    if (kv.first == "sigma_interval_lo") lo = kv.second;
    if (kv.first == "sigma_interval_hi") hi = kv.second;
    if (kv.first == "equiv_lower") equiv_c = kv.second;
    if (kv.first == "equiv_upper") equiv_cc = kv.second;
  }
  CHECK(sigma > 0.0);
  CHECK(sigma < kLam);
  CHECK(lo <= sigma);
  CHECK(sigma <= hi);
  // uniform equivalence constants are finite and bracket 1
  CHECK(equiv_c > 0.0);
  CHECK(equiv_cc >= equiv_c);
  CHECK(equiv_cc < 1e4);

  opt.sigma_override = 1.1 * kLam;
  VerificationReport bad = verify_metric_lemma(m, p, opt);
  CHECK_FALSE(bad.pass);
}

TEST_CASE("report: canonical text is deterministic and digested") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  AveragingParams p = choose_averaging_params(m);
  MetricLemmaOptions opt;
  opt.samples = 3;
  opt.t_grid = {0.0, 0.5, 1.0};
  VerificationReport a = verify_metric_lemma(m, p, opt);
  VerificationReport b = verify_metric_lemma(m, p, opt);
  CHECK(a.to_text() == b.to_text());
  CHECK(a.digest() == b.digest());
  CHECK(a.to_text().find("suite: metric-lemma") == 0);
}

TEST_CASE("spd projection: floors broken matrices, passes good ones through") {
  Mat3 good = Mat3::identity();
  good(0, 1) = good(1, 0) = 0.3;
  Mat3 r = spd_project(good);
  for (int i = 0; i < 9; ++i) CHECK(r.a[i] == good.a[i]);

  Mat3 bad = Mat3::zero();
  bad(0, 0) = 1.0;
  bad(1, 1) = -1e-9;  // slightly indefinite
  bad(2, 2) = 2.0;
  bad(0, 1) = 1e-3;
  bad(1, 0) = -1e-3;  // and slightly asymmetric
  Mat3 fixed = spd_project(bad);
  Vec3 ev;
  Mat3 q;
  sym_eigen(fixed, ev, q);
  CHECK(ev.x >= 1e-12);
  CHECK(fixed(0, 1) == fixed(1, 0));
}

TEST_CASE("metric field: grid equivalence constants match the closed forms") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  AveragingParams p = choose_averaging_params(m);
  MetricField f = build_metric_field(m, p, 12);
  const double L = p.window_length;
  double expect_u = (std::exp(2.0 * L * kLam) - 1.0) / (2.0 * L * kLam);
  double expect_s = (1.0 - std::exp(-2.0 * L * kLam)) / (2.0 * L * kLam);
  CHECK(f.equiv_upper_sq == doctest::Approx(expect_u).epsilon(1e-10));
  CHECK(f.equiv_lower_sq == doctest::Approx(expect_s).epsilon(1e-7));
}

TEST_CASE("metric field: interpolation meets the budget and refines") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  AveragingParams p = choose_averaging_params(m);
  MetricField f12 = build_metric_field(m, p, 12);
  MetricField f24 = build_metric_field(m, p, 24);

  Rng rng(911);
  double worst12 = 0.0, worst24 = 0.0;
  for (int n = 0; n < 40; ++n) {
    Vec3 x{rng.uniform(), rng.uniform(), rng.uniform()};
    Mat3 direct = metric_one_gram(m, p, x);
    double scale = frobenius(direct);
    worst12 = std::max(worst12, frobenius(f12.gram_interp(x) - direct) / scale);
    worst24 = std::max(worst24, frobenius(f24.gram_interp(x) - direct) / scale);
  }
  CHECK(worst24 <= 2e-4);           // canonical field is smooth
  CHECK(worst24 <= f24.interp_budget);
  CHECK(worst12 / worst24 >= 2.0);  // refinement at least halves the error
}

TEST_CASE("metric field: wobbled interpolation stays within its budget") {
  // The wobbled expanding block averages the conformal factor along
  // expanding orbits, so off-grid values are resolution-limited (the budget
  // documents that); grid values themselves are exact quadratures.
  FlowModel m = make_cat_model(BaseMetric::wobbled);
  AveragingParams p = choose_averaging_params(m);
  MetricField f = build_metric_field(m, p, 12);
  CHECK(f.interp_budget > 0.1);  // honest, not vacuous: see header note
  Rng rng(912);
  double worst = 0.0;
  for (int n = 0; n < 25; ++n) {
    Vec3 x{rng.uniform(), rng.uniform(), rng.uniform()};
    Mat3 direct = metric_one_gram(m, p, x);
    worst = std::max(worst,
                     frobenius(f.gram_interp(x) - direct) / frobenius(direct));
  }
  CHECK(worst <= f.interp_budget);

  // the resolvable blocks (stable, flow) do interpolate tightly
  Vec3 es = cat_stable_dir(), ef{0, 0, 1};
  double worst_resolved = 0.0;
  for (int n = 0; n < 25; ++n) {
    Vec3 x{rng.uniform(), rng.uniform(), rng.uniform()};
    Mat3 direct = metric_one_gram(m, p, x);
    Mat3 interp = f.gram_interp(x);
    for (const Vec3& v : {es, ef}) {
      double a = dot(v, interp * v), b = dot(v, direct * v);
      worst_resolved = std::max(worst_resolved, std::fabs(a - b) / b);
    }
  }
  CHECK(worst_resolved <= 2e-2);
}

TEST_CASE("metric field: interpolation is continuous across the gluing") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  AveragingParams p = choose_averaging_params(m);
  MetricField f = build_metric_field(m, p, 12);
  Vec3 below{0.37, 0.81, 1.0 - 1e-10};
  Vec3 above = m.normalize({0.37, 0.81, 1.0 + 1e-10});
  Mat3 d = FlowModel::deck();
  Mat3 twisted = d.transposed() * (f.gram_interp(above) * d);
  Mat3 direct = f.gram_interp(below);
  CHECK(frobenius(twisted - direct) <= 1e-5 * frobenius(direct));
}

TEST_CASE("metric field: serialization round-trips") {
  FlowModel m = make_cat_model(BaseMetric::wobbled);
  AveragingParams p = choose_averaging_params(m);
  MetricField f = build_metric_field(m, p, 8);
  const char* path = "field_roundtrip.bin";
  save_metric_field(f, path);
  MetricField g = load_metric_field(path);
  std::remove(path);
  CHECK(g.model_id == f.model_id);
  CHECK(g.which == f.which);
  CHECK(g.grid_n == f.grid_n);
  CHECK(g.grid_ns == f.grid_ns);
  CHECK(g.params.window_length == f.params.window_length);
  CHECK(g.params.sigma == f.params.sigma);
  CHECK(g.params.lambda == f.params.lambda);
  CHECK(g.equiv_upper_sq == f.equiv_upper_sq);
  REQUIRE(g.gram.size() == f.gram.size());
  bool same = true;
  for (size_t i = 0; i < f.gram.size() && same; ++i)
    for (int e = 0; e < 9; ++e)
      if (g.gram[i].a[e] != f.gram[i].a[e]) same = false;
  CHECK(same);
  Vec3 x{0.2, 0.9, 0.55};
  CHECK(frobenius(g.gram_interp(x) - f.gram_interp(x)) == 0.0);
}
