#pragma once
// Orbit integration on the mapping torus.
//
// Fixed-step RK4 with exact handling of roof crossings: the perturbing field
// is constructed so the vertical speed is exactly 1 once |s - k·roof| is
// within a tenth of the roof, so the remaining time-to-crossing there is the
// remaining height and the deck map can be applied at an exact landing.  For
// the unperturbed field RK4 is exact (the field is constant).
//
// All templates run over S = double or S = Jet; for jets only the value part
// of the state is chart-normalized at crossings (the chart formulas continue
// equivariantly a little past the gluing, which off-center jet points use).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "anosov/jet.hpp"
#include "anosov/model.hpp"
#include "anosov/smallmat.hpp"

namespace anosov {

inline constexpr double kDefaultStep = 1.0 / 256.0;

namespace detail {

template <class S>
inline double value_of(const S& s) { return s.value(); }
template <>
inline double value_of<double>(const double& s) { return s; }

template <class S>
inline void shift_value(S& s, double d) { s.c[0] += d; }
template <>
inline void shift_value<double>(double& s, double d) { s += d; }

}  // namespace detail

// One RK4 step of duration h for the point and (optionally) the tangent
// block dM/dt = J(p) M.
template <class S>
void rk4_step(const FlowModel& m, V3<S>& p, M3<S>* M, double h) {
  V3<S> k1 = m.vector_field(p);
  V3<S> p2 = p + k1 * (h / 2);
  V3<S> k2 = m.vector_field(p2);
  V3<S> p3 = p + k2 * (h / 2);
  V3<S> k3 = m.vector_field(p3);
  V3<S> p4 = p + k3 * h;
  V3<S> k4 = m.vector_field(p4);
  if (M) {
    M3<S> K1 = m.jacobian(p) * (*M);
    M3<S> K2 = m.jacobian(p2) * (*M + K1 * (h / 2));
    M3<S> K3 = m.jacobian(p3) * (*M + K2 * (h / 2));
    M3<S> K4 = m.jacobian(p4) * (*M + K3 * h);
    *M = *M + (K1 + K2 * 2.0 + K3 * 2.0 + K4) * (h / 6);
  }
  p = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6);
}

// Apply the deck map at an upward (+1) or downward (-1) crossing.
template <class S>
void apply_deck(V3<S>& p, M3<S>* M, int dir, double roof) {
  Mat3 d = dir > 0 ? FlowModel::deck() : FlowModel::deck_inv();
  V3<S> q;
  q.x = p.x * d(0, 0) + p.y * d(0, 1);
  q.y = p.x * d(1, 0) + p.y * d(1, 1);
  q.z = p.z;
  detail::shift_value(q.z, dir > 0 ? -roof : roof);
  // wrap the base values back into [0,1) (translation: jets unaffected)
  detail::shift_value(q.x, -std::floor(detail::value_of(q.x)));
  detail::shift_value(q.y, -std::floor(detail::value_of(q.y)));
  p = q;
  if (M) {
    M3<S> out;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        S s = (*M)(0, j) * d(i, 0);
        s = s + (*M)(1, j) * d(i, 1);
        s = s + (*M)(2, j) * d(i, 2);
        out(i, j) = s;
      }
    *M = out;
  }
}

// Advance by signed time t.  Returns the net crossing count (+up/-down).
// `on_cross`, when non-null, receives the flow time of each crossing.
template <class S>
int advance(const FlowModel& m, V3<S>& p, M3<S>* M, double t,
            double h = kDefaultStep, std::vector<double>* cross_times = nullptr,
            double t0 = 0.0) {
  if (m.roof < 8.0 * h) throw std::invalid_argument("advance: step too large for roof");
  int crossings = 0;
  double done = 0.0;
  const double dir = t >= 0 ? 1.0 : -1.0;
  const double total = std::abs(t);
  int guard = 0;
  const int guard_max = 1000000 + int(total / h) * 4;
  while (total - done > 1e-15 && guard++ < guard_max) {
    double rem = total - done;
    double z = detail::value_of(p.z);
    if (dir > 0 && z >= 0.9 * m.roof) {
      double tc = m.roof - z;  // vertical speed is exactly 1 here
      if (tc <= rem + 1e-15) {
        int k = std::max(1, int(std::ceil(tc / h)));
        for (int i = 0; i < k; ++i) rk4_step(m, p, M, tc / k);
        apply_deck(p, M, +1, m.roof);
        detail::shift_value(p.z, -detail::value_of(p.z));  // land exactly
        ++crossings;
        done += tc;
        if (cross_times) cross_times->push_back(t0 + done);
        continue;
      }
    }
    if (dir < 0 && z <= 0.1 * m.roof) {
      double tc = z;
      if (tc <= rem + 1e-15) {
        int k = std::max(1, int(std::ceil(tc / h)));
        for (int i = 0; i < k; ++i) rk4_step(m, p, M, -tc / k);
        apply_deck(p, M, -1, m.roof);
        detail::shift_value(p.z, m.roof - detail::value_of(p.z));
        --crossings;
        done += tc;
        if (cross_times) cross_times->push_back(t0 - done);
        continue;
      }
    }
    double dt = std::min(h, rem);
    // never straddle the gluing with a regular step
    if (dir > 0 && z < 0.9 * m.roof) dt = std::min(dt, 0.95 * m.roof - z);
    if (dir < 0 && z > 0.1 * m.roof) dt = std::min(dt, z - 0.05 * m.roof);
    rk4_step(m, p, M, dir * dt);
    done += dt;
  }
  if (guard >= guard_max) throw std::runtime_error("advance: step guard tripped");
  return crossings;
}

Vec3 flow_map(const FlowModel& m, const Vec3& x, double t,
              double h = kDefaultStep);

struct TangentFlow {
  Vec3 p;        // T_t x
  Mat3 dt;       // D_x T_t in chart coordinates
  int crossings = 0;
};

TangentFlow tangent_map(const FlowModel& m, const Vec3& x, double t,
                        double h = kDefaultStep);

// Gauss-Legendre nodes/weights on [-1,1] (Newton on the Legendre polynomial).
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

struct OrbitNode {
  double t = 0.0;  // flow time of the node
  double w = 0.0;  // quadrature weight (already scaled to the panel)
  Vec3 p;          // T_t x
  Mat3 dt;         // D_x T_t
};

// Composite Gauss-Legendre schedule along [0, T] (T may be negative), with
// panel boundaries aligned to the roof crossings so every panel sees a smooth
// integrand.  `nodes_per_unit` fixes the resolution (12-point panels).
std::vector<OrbitNode> tangent_quadrature_nodes(const FlowModel& m, const Vec3& x,
                                                double T, int nodes_per_unit,
                                                double h = kDefaultStep);

}  // namespace anosov
