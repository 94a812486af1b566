#include "anosov/leaves.hpp"

#include <cmath>
#include <stdexcept>

#include "anosov/integrate.hpp"

namespace anosov {

void LeafParams::validate() const {
  if (!(rho > 0.0) || !(rho < 0.5 * rho0))
    throw std::invalid_argument("leaf cone aperture must lie in (0, rho0/2)");
  if (!(delta > 0.0) || !(big_b > 2.0))
    throw std::invalid_argument("leaf extension needs delta > 0 and B > 2");
  if (!(jet_m > 0.0) || !(varsigma > 0.0))
    throw std::invalid_argument("leaf budget needs positive M and varsigma");
  if (nodes < 17 || nodes % 2 == 0)
    throw std::invalid_argument("leaf mesh wants an odd node count >= 17");
  if (!(t_step > 0.0) || t_step > 0.5)
    throw std::invalid_argument("evolution step must lie in (0, 0.5]");
  if (jet_order < 1 || jet_order + 1 >= kJetCap)
    throw std::invalid_argument("slope jet order out of range");
  // worst slope over the construction window must stay inside the cone:
  // |S(xi)| <= sum_a M^a L^a / a! with L the padded half-width
  double len = 1.3 * big_b * delta;
  double slope = 0.0, pw = 1.0, fact = 1.0;
  for (int a = 1; a <= jet_order; ++a) {
    pw *= jet_m * len;
    fact *= a;
    slope += pw / fact;
  }
  if (slope > 0.9 * rho)
    throw std::invalid_argument(
        "jet budget times leaf extension exceeds the cone aperture");
}

LeafParams derive_leaf_params(double rho, double varsigma, double lam_bound,
                              double jet_m, double t_max) {
  if (!(t_max > 0.0)) throw std::invalid_argument("horizon must be positive");
  LeafParams lp;
  lp.rho = rho;
  lp.varsigma = varsigma;
  lp.lam_bound = lam_bound;
  lp.jet_m = jet_m;
  // the extension must swallow the covering radius 2(e^{Lt}-e^{-Lt}) delta
  // relative to the guaranteed arc growth (e^{st}-1) delta of the core
  double num = 2.0 * (std::exp(lam_bound * t_max) - std::exp(-lam_bound * t_max));
  double den = std::exp(varsigma * t_max) - 1.0;
  lp.big_b = std::max(4.0, 1.05 * num / den);
  // widest construction half-width whose slope budget stays below 0.85 rho
  double lo = 0.0, hi = rho / jet_m;
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    double s = 0.0, pw = 1.0, fact = 1.0;
    for (int a = 1; a <= lp.jet_order; ++a) {
      pw *= jet_m * mid;
      fact *= a;
      s += pw / fact;
    }
    (s <= 0.85 * rho ? lo : hi) = mid;
  }
  lp.delta = lo / (1.3 * lp.big_b);
  lp.validate();
  return lp;
}

AdaptedFrame assemble_frame(const Mat3& gram2, const Vec3& origin,
                            const Vec3& tangent, const Vec3& e_u,
                            const Vec3& x_flow) {
  auto norm2 = [&](const Vec3& v) {
    return std::sqrt(std::max(0.0, dot(v, gram2 * v)));
  };
  double nt = norm2(tangent), nu = norm2(e_u), nx = norm2(x_flow);
  if (!(nt > 0.0) || !(nu > 0.0) || !(nx > 0.0))
    throw std::runtime_error("adapted frame: degenerate column");
  AdaptedFrame fr;
  fr.origin = origin;
  fr.gram2 = gram2;
  fr.x_norm2 = nx;
  fr.map.set_col(0, tangent * (1.0 / nt));
  fr.map.set_col(1, e_u * (1.0 / nu));
  fr.map.set_col(2, x_flow * (1.0 / nx));
  // metric Gram volume of the unit columns: 1 = orthogonal, 0 = degenerate
  Mat3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 gi = gram2 * fr.map.col(i);
    for (int j = 0; j < 3; ++j) g(i, j) = dot(fr.map.col(j), gi);
  }
  double vol = std::sqrt(std::max(0.0, det(g)));
  if (vol < 0.05)
    throw std::runtime_error("adapted frame: columns lost transversality");
  fr.inv = inverse(fr.map);
  return fr;
}

AdaptedFrame adapted_frame(const LeafContext& cx, const FlowModel& flow,
                           const Vec3& z, const Vec3& tangent) {
  if (!cx.base || !cx.stable || !cx.unstable)
    throw std::invalid_argument("leaf context is missing model or foliations");
  SplitData sd =
      metric_two_data(*cx.base, cx.avg, *cx.stable, *cx.unstable, z,
                      nullptr, cx.step);
  Vec3 x_flow = flow.vector_field(z);
  return assemble_frame(sd.gram2, z, tangent, sd.e_u, x_flow);
}

Vec3 match_chart(const FlowModel& m, const Vec3& anchor, Vec3 q, Mat3* cols) {
  int guard = 0;
  while (q.z - anchor.z > 0.5 * m.roof && guard++ < 16)
    apply_deck(q, cols, +1, m.roof);
  while (anchor.z - q.z > 0.5 * m.roof && guard++ < 16)
    apply_deck(q, cols, -1, m.roof);
  if (guard >= 16) throw std::runtime_error("match_chart: runaway deck shift");
  q.x += std::round(anchor.x - q.x);
  q.y += std::round(anchor.y - q.y);
  return q;
}

}  // namespace anosov
