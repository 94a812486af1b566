#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "anosov/cones.hpp"
#include "anosov/graphops.hpp"
#include "anosov/gridfield.hpp"
#include "anosov/integrate.hpp"
#include "anosov/metric_one.hpp"
#include "anosov/metric_two.hpp"
#include "anosov/model.hpp"
#include "anosov/splitting.hpp"

using namespace anosov;

namespace {

const double kLamPlus = (3.0 + std::sqrt(5.0)) / 2.0;
const double kLam = std::log(kLamPlus);

double q(const Mat3& g, const Vec3& v) { return dot(v, g * v); }
double gn(const Mat3& g, const Vec3& v) { return std::sqrt(q(g, v)); }

// Shared foliations (moderate grid keeps the suite fast; the acceptance runs
// use the full resolution).
struct Fixture {
  FlowModel can = make_cat_model(BaseMetric::canonical);
  FlowModel wob = make_cat_model(BaseMetric::wobbled);
  AveragingParams pc, pw;
  PushedFoliation can_s, can_u, wob_s, wob_u;
};

const Fixture& fx() {
  static Fixture f = [] {
    Fixture g;
    g.pc = choose_averaging_params(g.can);
    g.pw = choose_averaging_params(g.wob);
    auto fol = [](const FlowModel& m, bool stable) {
      DistributionField raw = build_raw_distribution(m, stable, 48, 0.05);
      return build_pushed_foliation(m, smooth_distribution(m, raw), 3.0);
    };
    g.can_s = fol(g.can, true);
    g.can_u = fol(g.can, false);
    g.wob_s = fol(g.wob, true);
    g.wob_u = fol(g.wob, false);
    return g;
  }();
  return f;
}

}  // namespace

// ---------------------------------------------------------------------------
// graph operators

TEST_CASE("graph frame: directions are metric-one unit") {
  for (BaseMetric bm : {BaseMetric::canonical, BaseMetric::wobbled}) {
    FlowModel m = make_cat_model(bm);
    AveragingParams p = choose_averaging_params(m);
    GraphFrame f = graph_frame(m, p, {0.21, 0.68, 0.37});
    // the stable length rides on cancellation in the window quadrature, so
    // its unit normalization has a larger roundoff floor
    CHECK(std::abs(gn(f.gram, f.u_hat) - 1.0) < 1e-10);
    CHECK(std::abs(gn(f.gram, f.s_hat) - 1.0) < 1e-8);
    CHECK(std::abs(gn(f.gram, f.f_hat) - 1.0) < 1e-10);
  }
}

TEST_CASE("graph action: exact coefficient contraction on the canonical "
          "model") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  AveragingParams p = choose_averaging_params(m);
  GraphOperator u = make_graph(m, p, {0.31, 0.55, 0.42}, false, 0.3, -0.2);
  // forward time contracts unstable graphs by lam+^{-2t} (hyperbolic part)
  // and lam+^{-t} (flow part)
  for (double t : {1.0, 2.5}) {
    double tol = t == 1.0 ? 1e-12 : 1e-7;
    GraphOperator v = graph_action(m, p, u, t);
    CHECK(std::abs(v.c_trans / (0.3 * std::pow(kLamPlus, -2 * t)) - 1.0) <
          tol);
    CHECK(std::abs(v.c_flow / (-0.2 * std::pow(kLamPlus, -t)) - 1.0) < tol);
  }
  // stable graphs contract under backward time by the mirrored factors
  GraphOperator s = make_graph(m, p, {0.31, 0.55, 0.42}, true, 0.25, 0.1);
  GraphOperator v = graph_action(m, p, s, -1.0);
  CHECK(std::abs(v.c_trans / (0.25 * std::pow(kLamPlus, -2.0)) - 1.0) < 1e-11);
  CHECK(std::abs(v.c_flow / (0.1 / kLamPlus) - 1.0) < 1e-11);
}

TEST_CASE("graph action: composition and the t = 0 identity") {
  FlowModel m = make_cat_model(BaseMetric::wobbled);
  AveragingParams p = choose_averaging_params(m);
  GraphOperator u = make_graph(m, p, {0.81, 0.13, 0.66}, false, 0.12, 0.07);
  GraphOperator id = graph_action(m, p, u, 0.0);
  CHECK(std::abs(id.c_trans - u.c_trans) < 1e-12);
  CHECK(std::abs(id.c_flow - u.c_flow) < 1e-12);
  GraphOperator two = graph_action(m, p, graph_action(m, p, u, 0.7), 0.55);
  GraphOperator one = graph_action(m, p, u, 1.25);
  CHECK(std::abs(two.c_trans - one.c_trans) < 1e-8);
  CHECK(std::abs(two.c_flow - one.c_flow) < 1e-8);
  CHECK(norm(two.base - one.base) < 1e-9);
}

TEST_CASE("graph action: losing transversality throws") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  AveragingParams p = choose_averaging_params(m);
  // a stable graph pushed far forward turns transverse to its own domain
  GraphOperator s = make_graph(m, p, {0.31, 0.55, 0.42}, true, 0.3, 0.0);
  CHECK_THROWS(graph_action(m, p, s, 20.0));
}

TEST_CASE("graph norm: orthogonal canonical frame gives the hypot") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  AveragingParams p = choose_averaging_params(m);
  GraphFrame f = graph_frame(m, p, {0.45, 0.27, 0.61});
  CHECK(std::abs(graph_norm(f, false, 0.3, -0.4) - 0.5) < 1e-9);
}

// ---------------------------------------------------------------------------
// distribution fields

TEST_CASE("raw distribution: bounded amplitude, vanishing at the gluing") {
  FlowModel m = make_cat_model(BaseMetric::wobbled);
  DistributionField raw = build_raw_distribution(m, false, 48, 0.05);
  CHECK(raw.c0_max <= 0.05 * (1 + 1e-12));
  CHECK(raw.c0_max > 0.005);  // nontrivial roughness
  CHECK(raw.c1_fd > raw.c0_max);
  for (int i = 0; i < raw.grid_n; ++i)
    for (int j = 0; j < raw.grid_n; ++j) {
      CHECK(raw.ct(i, j, 0) == 0.0);
      CHECK(raw.cf(i, j, 0) == 0.0);
    }
  CHECK_THROWS(build_raw_distribution(m, false, 8, 0.05));   // grid too small
  CHECK_THROWS(build_raw_distribution(m, false, 48, 0.6));   // width range
  FlowModel pert = perturbed_model(m, 0.01, 0.02);
  CHECK_THROWS(build_raw_distribution(pert, false, 48, 0.05));
}

TEST_CASE("smoothing: constants are fixed exactly across the gluing") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  DistributionField raw = build_raw_distribution(m, true, 32, 0.1);
  for (double& c : raw.c_trans) c = 0.02;
  for (double& c : raw.c_flow) c = -0.01;
  DistributionField sm = smooth_distribution(m, raw);
  for (int k = 0; k < sm.grid_ns; ++k)
    for (int i = 0; i < sm.grid_n; ++i)
      for (int j = 0; j < sm.grid_n; ++j) {
        CHECK(std::abs(sm.ct(i, j, k) - 0.02) < 1e-14);
        CHECK(std::abs(sm.cf(i, j, k) + 0.01) < 1e-14);
      }
}

TEST_CASE("smoothing: slope drops, amplitude does not grow") {
  FlowModel m = make_cat_model(BaseMetric::wobbled);
  DistributionField raw = build_raw_distribution(m, true, 48, 0.05);
  DistributionField sm = smooth_distribution(m, raw);
  CHECK(sm.c1_fd < raw.c1_fd);
  CHECK(sm.c0_max <= raw.c0_max * (1 + 1e-12));
  CHECK(sm.max_graph_norm <= sm.width * (1 + 1e-12));
  // outside the cone regime the mollification refuses to certify
  DistributionField wide = build_raw_distribution(m, true, 48, 0.3);
  CHECK_THROWS(smooth_distribution(m, wide, 0.5));
}

TEST_CASE("smoothing exponent: fitted slope sits in the expected band") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  std::vector<double> c0s, c1s;
  double r = fit_smoothing_exponent(m, true, 48, {0.1, 0.05, 0.025}, &c0s,
                                    &c1s);
  CHECK(r > 0.1);
  CHECK(r < 1.0);
  REQUIRE(c0s.size() == 3);
  // finer widths cost more derivative per unit amplitude
  CHECK(c1s[2] / c0s[2] > c1s[0] / c0s[0]);
}

TEST_CASE("distribution field: interpolation matches nodes, io round-trips") {
  FlowModel m = make_cat_model(BaseMetric::wobbled);
  DistributionField sm =
      smooth_distribution(m, build_raw_distribution(m, false, 32, 0.1));
  int i = 7, j = 12, k = 9;
  Vec3 p{double(i) / 32, double(j) / 32, sm.roof * double(k) / sm.grid_ns};
  double ct, cf;
  sm.eval_coeffs(p, ct, cf);
  CHECK(std::abs(ct - sm.ct(i, j, k)) < 1e-12);
  CHECK(std::abs(cf - sm.cf(i, j, k)) < 1e-12);

  save_distribution_field(sm, "/tmp/unit_cones_field.bin");
  DistributionField back = load_distribution_field("/tmp/unit_cones_field.bin");
  CHECK(back.stable == sm.stable);
  CHECK(back.grid_n == sm.grid_n);
  CHECK(back.width == sm.width);
  CHECK(back.model_id == sm.model_id);
  CHECK(back.c0_max == sm.c0_max);
  bool same = back.c_trans == sm.c_trans && back.c_flow == sm.c_flow;
  CHECK(same);
}

TEST_CASE("pushed foliation: evaluation is consistent and strongly "
          "contracted") {
  const Fixture& f = fx();
  Vec3 x{0.62, 0.19, 0.48};
  GraphOperator g = f.wob_u.eval(f.wob, f.pw, x);
  CHECK(norm(g.base - f.wob.normalize(x)) < 1e-9);
  CHECK(g.norm1 < 0.1 * f.wob_u.smoothed.max_graph_norm);
  // mismatched model / short push throw
  CHECK_THROWS(build_pushed_foliation(f.can, f.wob_u.smoothed, 3.0));
  CHECK_THROWS(build_pushed_foliation(f.wob, f.wob_u.smoothed, 0.5));
}

TEST_CASE("push planning: measured contraction turns epsilon into a time") {
  const Fixture& f = fx();
  FoliationPlan plan = plan_push_time(f.wob, f.pw, f.wob_s.smoothed, 0.03, 7);
  CHECK(plan.n_star > 0.2);
  CHECK(plan.n_star < 3.0);
  CHECK(plan.local_drift > 0.0);
  CHECK(plan.push_time >= 2.0);
  // tighter epsilon never plans a shorter push
  FoliationPlan tight = plan_push_time(f.wob, f.pw, f.wob_s.smoothed, 0.003, 7);
  CHECK(tight.push_time >= plan.push_time);
}

TEST_CASE("flow smoothness: wobbled foliations commute within epsilon") {
  const Fixture& f = fx();
  FlowSmoothnessOptions o;
  o.samples = 6;
  o.t_grid = {0.25, 0.5, 1.0};
  o.epsilon = 0.03;
  VerificationReport rep =
      verify_flow_smoothness(f.wob, f.pw, f.wob_u, f.wob_s, o);
  CHECK(rep.pass);
  CHECK(rep.worst_margin() >= -o.slack);
  CHECK(rep.find("graph-flow-mismatch") != nullptr);
  CHECK(rep.find("graph-flow-mismatch-stable") != nullptr);
  o.epsilon = 0.0;
  CHECK_THROWS(verify_flow_smoothness(f.wob, f.pw, f.wob_u, f.wob_s, o));
}

// ---------------------------------------------------------------------------
// orthogonalized metric

TEST_CASE("orthogonalized metric: projector algebra and block isometry") {
  const Fixture& f = fx();
  SplitData d = metric_two_data(f.wob, f.pw, f.wob_s, f.wob_u,
                                {0.37, 0.82, 0.41});
  CHECK(d.volume > 0.05);
  CHECK(frobenius(d.proj_s + d.proj_u + d.proj_f - Mat3::identity()) < 1e-12);
  CHECK(frobenius(d.proj_s * d.proj_s - d.proj_s) < 1e-12);
  CHECK(frobenius(d.proj_u * d.proj_s) < 1e-12);
  // blocks are gram2-orthogonal and keep their averaged length
  Vec3 v{0.4, -1.1, 0.3};
  Vec3 vs = d.proj_s * v, vu = d.proj_u * v, vf = d.proj_f * v;
  CHECK(std::abs(dot(vs, d.gram2 * vu)) <
        1e-10 * gn(d.gram2, vs) * gn(d.gram2, vu));
  CHECK(std::abs(q(d.gram2, vs) / q(d.gram1, vs) - 1.0) < 1e-8);
  CHECK(std::abs(q(d.gram2, v) - q(d.gram1, vs) - q(d.gram1, vu) -
                 q(d.gram1, vf)) <
        1e-12 * q(d.gram2, v));
}

TEST_CASE("orthogonalized metric: grid build matches pointwise data") {
  const Fixture& f = fx();
  MetricField one = build_metric_field(f.can, f.pc, 12);
  auto [two, proj] = build_metric_two(f.can, f.pc, one, f.can_s, f.can_u, 12);
  CHECK(two.which == 2);
  CHECK(two.grid_n == 12);
  CHECK(proj.model_id == f.can.id());
  int i = 3, j = 8, k = 5;
  Vec3 x{double(i) / 12, double(j) / 12, two.roof * double(k) / two.grid_ns};
  SplitData d = metric_two_data(f.can, f.pc, f.can_s, f.can_u, x, &one.at(i, j, k));
  CHECK(frobenius(two.at(i, j, k) - d.gram2) < 1e-10 * frobenius(d.gram2));
  CHECK(frobenius(proj.pi_s[proj.idx(i, j, k)] - d.proj_s) < 1e-10);

  save_projector_field(proj, "/tmp/unit_cones_proj.bin");
  ProjectorField back = load_projector_field("/tmp/unit_cones_proj.bin");
  CHECK(back.grid_n == proj.grid_n);
  CHECK(back.model_id == proj.model_id);
  CHECK(frobenius(back.pi_u[back.idx(i, j, k)] - proj.pi_u[proj.idx(i, j, k)]) ==
        0.0);
}

// ---------------------------------------------------------------------------
// cones

TEST_CASE("cone membership: axes, zero vectors, complement") {
  const Fixture& f = fx();
  GraphFrame gf = graph_frame(f.can, f.pc, {0.13, 0.41, 0.27});
  ConeFrame frame = cone_frame(gf);
  ConeSpec plain{0.1, false, false};
  ConeResult rs = cone_contains(plain, frame, gf.s_hat);
  CHECK(rs.member);
  CHECK(std::abs(rs.margin - 0.1) < 1e-10);
  ConeResult ru = cone_contains(plain, frame, gf.u_hat);
  CHECK_FALSE(ru.member);
  CHECK(std::abs(ru.margin + 1.0) < 1e-10);
  CHECK_THROWS(cone_contains(plain, frame, Vec3{0, 0, 0}));

  ConeSpec comp{0.1, false, true};
  CHECK(cone_contains(comp, frame, gf.u_hat).member);
  CHECK_FALSE(cone_contains(comp, frame, gf.s_hat).member);

  // scale invariance of membership
  ConeResult big = cone_contains(plain, frame, gf.s_hat * 1e6);
  CHECK(big.member);
}

TEST_CASE("cone boundary vectors: nudged inward on both sides") {
  const Fixture& f = fx();
  GraphFrame gf = graph_frame(f.wob, f.pw, {0.52, 0.11, 0.73});
  ConeFrame frame = cone_frame(gf);
  for (bool starred : {false, true}) {
    ConeSpec in{0.2, starred, false};
    for (const Vec3& v : cone_boundary_vectors(in, frame, 12, 1e-6)) {
      ConeResult r = cone_contains(in, frame, v);
      CHECK(r.member);
      CHECK(r.margin < 1e-5);
    }
    ConeSpec out{0.2, starred, true};
    for (const Vec3& v : cone_boundary_vectors(out, frame, 12, 1e-6))
      CHECK(cone_contains(out, frame, v).member);
    // outward nudge leaves the cone
    for (const Vec3& v : cone_boundary_vectors(in, frame, 12, -1e-6))
      CHECK_FALSE(cone_contains(in, frame, v).member);
  }
}

TEST_CASE("cone corollary: canonical certificate at the exact rate") {
  const Fixture& f = fx();
  CorollaryOptions o;
  o.samples = 20;
  o.directions = 16;
  o.sigma = kLam * (1 - 1e-9);
  VerificationReport rep = verify_cone_corollary(f.can, f.pc, o);
  CHECK(rep.pass);
  CHECK(rep.worst_margin() >= -o.slack);
  REQUIRE(rep.records.size() == 4);
  CHECK(rep.find("backward-cone-nesting") != nullptr);
  CHECK(rep.find("backward-cone-expansion") != nullptr);
  // the default grid contains t = 0 where the tight families are exact
  CHECK(rep.find("backward-cone-expansion")->margin == 0.0);
  CHECK(rep.find("forward-complement-lower")->margin == 0.0);
}

TEST_CASE("cone corollary: wobbled certificate inside its window") {
  const Fixture& f = fx();
  CorollaryOptions o;
  o.samples = 20;
  o.directions = 16;
  o.sigma = 0.6;
  VerificationReport rep = verify_cone_corollary(f.wob, f.pw, o);
  CHECK(rep.pass);
}

TEST_CASE("cone corollary: inflated aperture is rejected") {
  const Fixture& f = fx();
  CorollaryOptions o;
  o.samples = 20;
  o.directions = 16;
  o.sigma = kLam * (1 - 1e-9);
  o.rho1 = 1.0;
  VerificationReport rep = verify_cone_corollary(f.can, f.pc, o);
  CHECK_FALSE(rep.pass);
  CHECK(rep.worst_margin() < -1e-2);
}

TEST_CASE("cone corollary: input validation") {
  const Fixture& f = fx();
  CorollaryOptions o;
  CHECK_THROWS(verify_cone_corollary(f.can, f.pc, o));  // sigma unset
  o.sigma = 0.5;
  FlowModel pert = perturbed_model(f.can, 0.01, 0.02);
  CHECK_THROWS(verify_cone_corollary(pert, f.pc, o));
  o.t_grid = {0.5, 0.25};
  CHECK_THROWS(verify_cone_corollary(f.can, f.pc, o));
}

TEST_CASE("good expansion: calibrated strengths pass, tenfold control "
          "fails") {
  const Fixture& f = fx();
  GoodExpansionOptions o;
  o.samples = 6;
  o.directions = 4;
  o.t_grid = {0.1, 0.5, 1.0, 2.0};
  PerturbationScale ps =
      calibrate_perturbation_scale(f.can, f.pc, f.can_s, f.can_u, o);
  CHECK(ps.eta0 > 0.0);
  CHECK(ps.eta0 <= 0.02);
  CHECK(ps.leak > 0.0);
  o.eta0 = ps.eta0;
  ExpansionCalibration cal =
      calibrate_expansion_rate(f.can, f.pc, f.can_s, f.can_u, o);
  CHECK(cal.varsigma > 0.0);
  CHECK(cal.varsigma < kLam);
  o.varsigma = cal.varsigma;
  VerificationReport rep =
      verify_good_expansion(f.can, f.pc, f.can_s, f.can_u, o);
  CHECK(rep.pass);
  CHECK(rep.find("cone-backward-expansion") != nullptr);
  CHECK(rep.find("unstable-forward-expansion") != nullptr);
  CHECK(rep.find("cone-backward-containment") != nullptr);
  CHECK(rep.find("stable-in-half-cone") != nullptr);

  VerificationReport ctl = verify_good_expansion(
      f.can, f.pc, f.can_s, f.can_u, o, {o.control_eta_factor * o.eta0});
  CHECK_FALSE(ctl.pass);
}

TEST_CASE("good expansion: input validation") {
  const Fixture& f = fx();
  GoodExpansionOptions o;
  o.varsigma = 0.4;
  FlowModel pert = perturbed_model(f.wob, 0.01, 0.02);
  CHECK_THROWS(verify_good_expansion(pert, f.pw, f.wob_s, f.wob_u, o));
  // foliation order is (stable, unstable)
  CHECK_THROWS(verify_good_expansion(f.wob, f.pw, f.wob_u, f.wob_s, o));
  o.rho = 0.3;  // above rho0 / 2
  CHECK_THROWS(verify_good_expansion(f.wob, f.pw, f.wob_s, f.wob_u, o));
}
