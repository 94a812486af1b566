#pragma once
// Hyperbolic test flows on the mapping torus of the cat map.
//
// Chart coordinates p = (x1, x2, s) with x1, x2 on the 2-torus and s in
// [0, roof).  Crossing the roof applies the cat map to the base, so the
// suspension flow is x' = 0, s' = 1 plus an optional smooth perturbation
// that vanishes near the gluing (which keeps it well defined on the torus).

#include <cmath>
#include <stdexcept>
#include <string>

#include "anosov/jet.hpp"
#include "anosov/smallmat.hpp"

namespace anosov {

inline constexpr double kPi = 3.14159265358979323846;

// cat map [[2,1],[1,1]] spectral data
inline double lam_plus() { return (3.0 + std::sqrt(5.0)) / 2.0; }
inline double lam_minus() { return (3.0 - std::sqrt(5.0)) / 2.0; }
inline double log_lam_plus() { return std::log(lam_plus()); }

// unit eigenvectors of the cat map in the base plane (chart z-component 0)
Vec3 cat_unstable_dir();
Vec3 cat_stable_dir();

enum class BaseMetric { canonical, wobbled };

struct TangentVector {
  Vec3 base;  // chart point, fundamental domain
  Vec3 v;     // chart components
};

struct SplittingFrame {
  Vec3 e_s, e_u, e_f;     // chart directions, Euclidean-normalized
  double residual = 0.0;  // last-unit angle change of the power iteration
  bool exact = true;
  double horizon = 0.0;
};

// Perturbing field X1.  The dominant terms tilt the flow into the expanding
// and contracting directions with exponential s-profiles a_u e^{-Λs} e_u and
// a_s e^{+Λs} e_s; those profiles commute with the gluing (the deck map eats
// exactly one factor of λ₊), so they are smooth on the mapping torus without
// any cutoff and their high s-derivatives stay of order Λ^k ~ 1.  Two small
// bump-windowed oscillating terms break the base-plane symmetry.  Amplitudes
// are normalized at construction so the sampled sup of all derivatives up to
// order r+1 is <= 1; the sampled value is kept as a certificate.
struct PerturbationSpec {
  double eta = 0.0;      // signed amplitude currently applied
  double eta_cap = 0.0;  // admissible |eta| for this family
  double amp_u = 0.0;    // e^{-Λs} tilt into the expanding direction
  double amp_s = 0.0;    // e^{+Λs} tilt into the contracting direction
  double amp_u_var = 0.0;  // windowed oscillating shear along e_u
  double amp_f = 0.0;      // windowed roof-speed modulation
  double c_r1_certificate = 0.0;  // sampled sup of derivatives up to order r+1
};

double bump_window(double s);   // sin^4 profile supported in s in (0.1, 0.9)
double bump_window_d(double s); // its s-derivative
Jet bump_window(const Jet& s);
Jet bump_window_d(const Jet& s);

struct FlowModel {
  BaseMetric metric = BaseMetric::canonical;
  double roof = 1.0;
  int smoothness = 2;  // r; jets are handled up to order r+1
  PerturbationSpec pert;  // eta == 0 when unperturbed

  std::string id() const;

  double lambda() const { return log_lam_plus() / roof; }
  double c_star() const;  // hyperbolicity prefactor of the reference metric
  double c_one() const;   // flow-speed constant: |V| in [c1^-1/2, c1^1/2]

  // --- chart bookkeeping -------------------------------------------------
  // Wrap into the fundamental domain; roof crossings act on the base.
  Vec3 normalize(Vec3 p) const;
  // Deck differential for one upward roof crossing and its inverse.
  static Mat3 deck() ;
  static Mat3 deck_inv();

  // --- vector field ------------------------------------------------------
  template <class S>
  V3<S> vector_field(const V3<S>& p) const {
    V3<S> X = {S(p.x) * 0.0, S(p.x) * 0.0, S(p.x) * 0.0};
    X.z = X.z + 1.0;
    if (pert.eta != 0.0) {
      V3<S> q = perturb_field(p);
      X += q * pert.eta;
    }
    return X;
  }

  template <class S>
  M3<S> jacobian(const V3<S>& p) const {
    M3<S> J;
    for (auto& e : J.a) e = S(p.x) * 0.0;  // zero jets of matching order
    if (pert.eta != 0.0) {
      M3<S> J1 = perturb_jacobian(p);
      J = J + J1 * S(p.x * 0.0 + pert.eta);
    }
    return J;
  }

  template <class S>
  V3<S> perturb_field(const V3<S>& p) const;
  template <class S>
  M3<S> perturb_jacobian(const V3<S>& p) const;

  // --- reference metric ---------------------------------------------------
  Mat3 gram_ref(const Vec3& p) const;
  // derivative of gram_ref along the unperturbed flow direction (for the
  // smoothness-proxy checks)
  Mat3 gram_ref_flow_derivative(const Vec3& p) const;

  // wobble conformal factor (1 identically for the canonical metric)
  double wobble(const Vec3& p) const;

  // base-plane matrix A^{2s} assembled in the eigenframe
  Mat3 base_power(double s, double exponent_scale) const;

  FlowModel with_eta(double eta) const;
};

FlowModel make_cat_model(BaseMetric metric);
// Attaches the standard perturbation family with amplitude cap eta_cap and
// applies signed amplitude eta (|eta| <= eta_cap enforced).
FlowModel perturbed_model(const FlowModel& base, double eta, double eta_cap);

// Exact partial derivative d^a1_x1 d^a2_x2 d^b_s of the unit-amplitude
// perturbing field (closed form; used by the norm certificate and its tests).
Vec3 perturb_partial(const FlowModel& m, int a1, int a2, int b, const Vec3& p);
// Max over the sample grid and all |alpha| <= order of |perturb_partial|.
double sampled_c_r1_certificate(const FlowModel& m, int order);

// ---- template bodies ------------------------------------------------------

template <class S>
V3<S> FlowModel::perturb_field(const V3<S>& p) const {
  using std::sin;
  using std::cos;
  using std::exp;
  const Vec3 eu = cat_unstable_dir(), es = cat_stable_dir();
  const double lam = log_lam_plus() / roof;
  S cu = exp(p.z * (-lam)) * pert.amp_u;
  S cs = exp(p.z * lam) * pert.amp_s;
  S chi = bump_window(p.z / roof);
  S cv = chi * sin(p.x * (2.0 * kPi) + 0.7) * cos(p.y * (2.0 * kPi) - 0.4) *
         pert.amp_u_var;
  S cf = chi * sin(p.x * (2.0 * kPi) - 0.5) * pert.amp_f;
  V3<S> out;
  out.x = (cu + cv) * eu.x + cs * es.x;
  out.y = (cu + cv) * eu.y + cs * es.y;
  out.z = cf;
  return out;
}

template <class S>
M3<S> FlowModel::perturb_jacobian(const V3<S>& p) const {
  using std::sin;
  using std::cos;
  using std::exp;
  const Vec3 eu = cat_unstable_dir(), es = cat_stable_dir();
  const double lam = log_lam_plus() / roof;
  S cu = exp(p.z * (-lam)) * pert.amp_u;
  S cs = exp(p.z * lam) * pert.amp_s;
  S chi = bump_window(p.z / roof);
  S dchi = bump_window_d(p.z / roof) * (1.0 / roof);

  S a_s = sin(p.x * (2.0 * kPi) + 0.7), a_c = cos(p.x * (2.0 * kPi) + 0.7);
  S b_s = sin(p.y * (2.0 * kPi) - 0.4), b_c = cos(p.y * (2.0 * kPi) - 0.4);
  S cv = chi * a_s * b_c * pert.amp_u_var;
  S dcv_dx = chi * a_c * b_c * (2.0 * kPi * pert.amp_u_var);
  S dcv_dy = chi * a_s * (-b_s) * (2.0 * kPi * pert.amp_u_var);
  S dcv_ds = dchi * a_s * b_c * pert.amp_u_var;

  S f_s = sin(p.x * (2.0 * kPi) - 0.5), f_c = cos(p.x * (2.0 * kPi) - 0.5);
  S dcf_dx = chi * f_c * (2.0 * kPi * pert.amp_f);
  S dcf_ds = dchi * f_s * pert.amp_f;

  M3<S> J;
  // d/dx1
  J(0, 0) = dcv_dx * eu.x;
  J(1, 0) = dcv_dx * eu.y;
  J(2, 0) = dcf_dx;
  // d/dx2
  J(0, 1) = dcv_dy * eu.x;
  J(1, 1) = dcv_dy * eu.y;
  J(2, 1) = dcf_dx * 0.0;
  // d/ds
  J(0, 2) = (cu * (-lam) + dcv_ds) * eu.x + cs * lam * es.x;
  J(1, 2) = (cu * (-lam) + dcv_ds) * eu.y + cs * lam * es.y;
  J(2, 2) = dcf_ds;
  return J;
}

}  // namespace anosov
