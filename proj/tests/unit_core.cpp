#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "anosov/jet.hpp"
#include "anosov/model.hpp"
#include "anosov/rng.hpp"
#include "anosov/smallmat.hpp"

using namespace anosov;

TEST_CASE("symmetric eigensolver orders eigenvalues and reconstructs") {
  Mat3 m = Mat3::zero();
  m(0, 0) = 2; m(0, 1) = 1; m(1, 0) = 1;
  m(1, 1) = 1; m(2, 2) = 5;
  Vec3 ev;
  Mat3 v;
  sym_eigen(m, ev, v);
  double lp = (3.0 + std::sqrt(5.0)) / 2.0, lm = (3.0 - std::sqrt(5.0)) / 2.0;
  CHECK(ev[0] == doctest::Approx(lm).epsilon(1e-14));
  CHECK(ev[1] == doctest::Approx(lp).epsilon(1e-14));
  CHECK(ev[2] == doctest::Approx(5.0).epsilon(1e-14));
  // reconstruct
  Mat3 d = Mat3::zero();
  for (int i = 0; i < 3; ++i) d(i, i) = ev[i];
  Mat3 r = v * d * v.transposed();
  CHECK(frobenius(r - m) < 1e-13);
}

TEST_CASE("operator norm and spd roots") {
  Mat3 d = Mat3::zero();
  d(0, 0) = 1; d(1, 1) = -2; d(2, 2) = 3;
  CHECK(opnorm(d) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(opnorm(FlowModel::deck()) == doctest::Approx(lam_plus()).epsilon(1e-14));

  Mat3 g = Mat3::zero();
  g(0, 0) = 4; g(0, 1) = 2; g(1, 0) = 2; g(1, 1) = 5; g(2, 2) = 9;
  Mat3 s = spd_sqrt(g);
  CHECK(frobenius(s * s - g) < 1e-12);
  Mat3 is = spd_inv_sqrt(g);
  CHECK(frobenius(s * is - Mat3::identity()) < 1e-12);
}

TEST_CASE("3x3 inverse and solve") {
  Mat3 a = Mat3::zero();
  a(0, 0) = 2; a(0, 1) = 1; a(1, 0) = 1; a(1, 1) = 1; a(2, 2) = 1;
  Mat3 ai = inverse(a);
  CHECK(frobenius(a * ai - Mat3::identity()) < 1e-14);
  Vec3 b = {1, 2, 3};
  Vec3 x = solve(a, b);
  Vec3 r = a * x - b;
  CHECK(norm(r) < 1e-14);
}

static double fd4(double (*f)(double), double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

TEST_CASE("jet arithmetic reproduces derivatives of elementary compositions") {
  // f(x) = exp(sin x) / (1 + x^2) at x0 = 0.3, derivatives vs closed forms
  double x0 = 0.3;
  Jet x = Jet::variable(x0, 5);
  Jet f = exp(sin(x)) / (x * x + 1.0);
  auto fval = [](double t) { return std::exp(std::sin(t)) / (1 + t * t); };
  CHECK(f.value() == doctest::Approx(fval(x0)).epsilon(1e-15));
  CHECK(f.deriv(1) == doctest::Approx(fd4(fval, x0, 1e-3)).epsilon(1e-9));
  // second derivative via FD of the jet's own first derivative at shifted points
  auto f1 = [](double t) {
    Jet u = Jet::variable(t, 1);
    return (exp(sin(u)) / (u * u + 1.0)).deriv(1);
  };
  double d2 = (f1(x0 + 1e-4) - f1(x0 - 1e-4)) / 2e-4;
  CHECK(f.deriv(2) == doctest::Approx(d2).epsilon(1e-7));
}

TEST_CASE("jet reciprocal of 1+x gives alternating series") {
  Jet x = Jet::variable(0.0, 6);
  Jet r = Jet::recip(x + 1.0);
  for (int k = 0; k <= 6; ++k)
    CHECK(r.c[k] == doctest::Approx((k % 2 == 0) ? 1.0 : -1.0).epsilon(1e-14));
}

TEST_CASE("jet composition and series inversion") {
  // h = invert(f) for f = x + x^2: f(h(y)) = y
  Jet f = Jet::variable(0.0, 6);
  f = f + f * f;
  Jet h = invert(f);
  Jet y = Jet::variable(0.0, 6);
  Jet back = compose(f, h);
  CHECK(back.c[0] == doctest::Approx(0.0));
  CHECK(back.c[1] == doctest::Approx(1.0).epsilon(1e-13));
  for (int k = 2; k <= 6; ++k) CHECK(std::abs(back.c[k]) < 1e-12);
  // known coefficients: h = y - y^2 + 2y^3 - 5y^4 + 14y^5 (Catalan, signed)
  CHECK(h.c[2] == doctest::Approx(-1.0).epsilon(1e-13));
  CHECK(h.c[3] == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(h.c[4] == doctest::Approx(-5.0).epsilon(1e-12));
  CHECK(h.c[5] == doctest::Approx(14.0).epsilon(1e-12));
  (void)y;
}

TEST_CASE("jet sqrt composes with square") {
  Jet x = Jet::variable(2.0, 5);
  Jet s = sqrt(x);
  Jet sq = s * s;
  CHECK(sq.c[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(sq.c[1] == doctest::Approx(1.0).epsilon(1e-14));
  for (int k = 2; k <= 5; ++k) CHECK(std::abs(sq.c[k]) < 1e-14);
}

TEST_CASE("random streams are deterministic and indexed independently") {
  Rng a = Rng::for_sample(20240808u, "suite-a", 7);
  Rng b = Rng::for_sample(20240808u, "suite-a", 7);
  Rng c = Rng::for_sample(20240808u, "suite-a", 8);
  std::set<uint64_t> seen;
  for (int i = 0; i < 16; ++i) {
    uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    seen.insert(va);
    seen.insert(c.next_u64());
  }
  CHECK(seen.size() == 32);  // no collisions across indices
  Rng d(5);
  for (int i = 0; i < 1000; ++i) {
    double u = d.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(std::isfinite(d.normal()));
  }
}

TEST_CASE("cat eigenframe is orthonormal and invariant") {
  Vec3 eu = cat_unstable_dir(), es = cat_stable_dir();
  CHECK(norm(eu) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(norm(es) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(dot(eu, es)) < 1e-15);
  Mat3 d = FlowModel::deck();
  Vec3 au = d * eu, as = d * es;
  CHECK(norm(au - eu * lam_plus()) < 1e-14);
  CHECK(norm(as - es * lam_minus()) < 1e-14);
  Mat3 prod = d * FlowModel::deck_inv();
  CHECK(frobenius(prod - Mat3::identity()) == 0.0);
}

TEST_CASE("chart normalization wraps through the gluing both ways") {
  FlowModel m = make_cat_model(BaseMetric::canonical);
  Vec3 p = m.normalize({0.2, 0.3, 1.25});
  CHECK(p.x == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(p.y == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p.z == doctest::Approx(0.25).epsilon(1e-15));
  Vec3 q = m.normalize({0.7, 0.5, -0.75});
  CHECK(q.x == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(q.y == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(q.z == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("reference metric glues smoothly across the roof") {
  for (BaseMetric bm : {BaseMetric::canonical, BaseMetric::wobbled}) {
    FlowModel m = make_cat_model(bm);
    Mat3 d = FlowModel::deck();
    for (double x1 : {0.0, 0.17, 0.62}) {
      Vec3 top = {x1, 0.33, 1.0};  // just at the gluing
      Vec3 bot = {m.normalize({x1, 0.33, 1.0}).x, m.normalize({x1, 0.33, 1.0}).y, 0.0};
      Mat3 gt = m.gram_ref(top);
      Mat3 gb = m.gram_ref(bot);
      Mat3 pulled = d.transposed() * gb * d;
      CHECK(frobenius(pulled - gt) < 1e-12);
    }
  }
}

TEST_CASE("gram flow derivative matches finite differences") {
  for (BaseMetric bm : {BaseMetric::canonical, BaseMetric::wobbled}) {
    FlowModel m = make_cat_model(bm);
    Vec3 p = {0.23, 0.41, 0.37};
    double h = 1e-5;
    Mat3 gp = m.gram_ref({p.x, p.y, p.z + h});
    Mat3 gm = m.gram_ref({p.x, p.y, p.z - h});
    Mat3 fd = (gp - gm) * (1.0 / (2 * h));
    CHECK(frobenius(fd - m.gram_ref_flow_derivative(p)) < 1e-8);
  }
}

TEST_CASE("bump window is C^3 at the support boundary") {
  CHECK(bump_window(0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(bump_window(0.05) == 0.0);
  CHECK(bump_window(0.95) == 0.0);
  for (double eps : {1e-4, 1e-5}) {
    Jet in = bump_window(Jet::variable(0.1 + eps, 3));
    for (int k = 0; k <= 3; ++k)
      CHECK(std::abs(in.deriv(k)) < 1e3 * std::pow(eps, 4 - k) * 1e3);
  }
  // derivative helper agrees with the jet derivative
  Jet j = bump_window(Jet::variable(0.37, 1));
  CHECK(bump_window_d(0.37) == doctest::Approx(j.deriv(1)).epsilon(1e-13));
}

TEST_CASE("perturbing field partial derivatives match finite differences") {
  FlowModel m = perturbed_model(make_cat_model(BaseMetric::canonical), 0.0, 0.05);
  Vec3 p = {0.31, 0.72, 0.44};
  double h = 1e-5;
  auto F = [&](const Vec3& q) { return m.perturb_field<double>(q); };
  // d/dx1
  Vec3 fdx = (F({p.x + h, p.y, p.z}) - F({p.x - h, p.y, p.z})) / (2 * h);
  Vec3 an = perturb_partial(m, 1, 0, 0, p);
  CHECK(norm(fdx - an) < 1e-8);
  // d/ds, second order
  Vec3 f0 = perturb_partial(m, 0, 0, 1, {p.x, p.y, p.z + h});
  Vec3 f1 = perturb_partial(m, 0, 0, 1, {p.x, p.y, p.z - h});
  Vec3 fd2 = (f0 - f1) / (2 * h);
  CHECK(norm(fd2 - perturb_partial(m, 0, 0, 2, p)) < 1e-7);
  // jacobian columns agree with partials
  Mat3 J = m.perturb_jacobian<double>(p);
  CHECK(norm(J.col(0) - perturb_partial(m, 1, 0, 0, p)) < 1e-13);
  CHECK(norm(J.col(1) - perturb_partial(m, 0, 1, 0, p)) < 1e-13);
  CHECK(norm(J.col(2) - perturb_partial(m, 0, 0, 1, p)) < 1e-13);
}

TEST_CASE("perturbing field is equivariant under the deck map") {
  FlowModel m = perturbed_model(make_cat_model(BaseMetric::canonical), 0.0, 0.05);
  Mat3 d = FlowModel::deck();
  for (double x1 : {0.11, 0.53}) {
    Vec3 top = {x1, 0.29, 1.0};
    Vec3 bot = m.normalize(top);
    Vec3 pushed = d * m.perturb_field<double>(top);
    Vec3 there = m.perturb_field<double>(bot);
    CHECK(norm(pushed - there) < 1e-13);
  }
}

TEST_CASE("perturbation norm certificate is at most one and caps eta") {
  FlowModel m = perturbed_model(make_cat_model(BaseMetric::wobbled), 0.02, 0.05);
  CHECK(m.pert.c_r1_certificate <= 1.0);
  CHECK(m.pert.c_r1_certificate > 0.5);  // family is not degenerate
  CHECK(m.pert.eta == 0.02);
  CHECK_THROWS(m.with_eta(0.06));
  FlowModel m2 = m.with_eta(-0.05);
  CHECK(m2.pert.eta == -0.05);
  CHECK_THROWS(perturbed_model(make_cat_model(BaseMetric::canonical), 0.2, 0.1));
}

TEST_CASE("jet field evaluation agrees with the double field") {
  FlowModel m = perturbed_model(make_cat_model(BaseMetric::canonical), 0.03, 0.05);
  Vec3 p = {0.41, 0.13, 0.52};
  V3<Jet> pj = {Jet::constant(p.x, 3), Jet::constant(p.y, 3), Jet::constant(p.z, 3)};
  V3<Jet> fj = m.vector_field(pj);
  Vec3 fd = m.vector_field(p);
  CHECK(fj.x.value() == doctest::Approx(fd.x).epsilon(1e-15));
  CHECK(fj.y.value() == doctest::Approx(fd.y).epsilon(1e-15));
  CHECK(fj.z.value() == doctest::Approx(fd.z).epsilon(1e-15));
  // seed the x1 direction: jet derivative equals the jacobian column
  pj.x = Jet::variable(p.x, 3);
  fj = m.vector_field(pj);
  Mat3 J = m.jacobian(p);
  CHECK(fj.x.deriv(1) == doctest::Approx(J(0, 0)).epsilon(1e-13));
  CHECK(fj.y.deriv(1) == doctest::Approx(J(1, 0)).epsilon(1e-13));
  CHECK(fj.z.deriv(1) == doctest::Approx(J(2, 0)).epsilon(1e-13));
}
