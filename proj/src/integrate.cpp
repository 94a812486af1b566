#include "anosov/integrate.hpp"

namespace anosov {

Vec3 flow_map(const FlowModel& m, const Vec3& x, double t, double h) {
  V3<double> p = x;
  advance(m, p, static_cast<Mat3*>(nullptr), t, h);
  return p;
}

TangentFlow tangent_map(const FlowModel& m, const Vec3& x, double t, double h) {
  TangentFlow out;
  V3<double> p = x;
  Mat3 M = Mat3::identity();
  out.crossings = advance(m, p, &M, t, h);
  out.p = p;
  out.dt = M;
  return out;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev-like initial guess, then Newton on P_n
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

std::vector<OrbitNode> tangent_quadrature_nodes(const FlowModel& m, const Vec3& x,
                                                double T, int nodes_per_unit,
                                                double h) {
  const int kPanel = 12;
  std::vector<double> gx, gw;
  gauss_legendre(kPanel, gx, gw);

  // pass 1: crossing times partition |[0,T]| into smooth segments
  std::vector<double> cuts;
  {
    V3<double> p = x;
    std::vector<double> cr;
    advance(m, p, static_cast<Mat3*>(nullptr), T, h, &cr);
    cuts.push_back(0.0);
    for (double c : cr) cuts.push_back(std::abs(c));
    cuts.push_back(std::abs(T));
    std::sort(cuts.begin(), cuts.end());
  }

  // node schedule: per segment, equal panels sized to the requested density
  std::vector<std::pair<double, double>> sched;  // |t|, weight
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i], b = cuts[i + 1];
    if (b - a < 1e-13) continue;
    int panels = std::max(1, int(std::ceil((b - a) * nodes_per_unit / double(kPanel))));
    for (int pnl = 0; pnl < panels; ++pnl) {
      double pa = a + (b - a) * pnl / panels;
      double pb = a + (b - a) * (pnl + 1) / panels;
      double mid = 0.5 * (pa + pb), half = 0.5 * (pb - pa);
      for (int k = 0; k < kPanel; ++k)
        sched.emplace_back(mid + half * gx[k], half * gw[k]);
    }
  }
  std::sort(sched.begin(), sched.end());

  // pass 2: walk the orbit once, stopping at every node
  std::vector<OrbitNode> out;
  out.reserve(sched.size());
  const double dir = T >= 0 ? 1.0 : -1.0;
  V3<double> p = x;
  Mat3 M = Mat3::identity();
  double at = 0.0;
  for (auto& [ta, w] : sched) {
    advance(m, p, &M, dir * (ta - at), h);
    at = ta;
    OrbitNode node;
    node.t = dir * ta;
    node.w = w;
    node.p = p;
    node.dt = M;
    out.push_back(node);
  }
  return out;
}

}  // namespace anosov
