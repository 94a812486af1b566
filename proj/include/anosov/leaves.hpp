#pragma once
// Admissible one-dimensional leaves and their backward-flow graph transform.
//
// A leaf is a C^{r+1} curve whose tangents live in the starred stable cone.
// It is stored as a Chebyshev graph over the adapted frame at its center
//     G(xi) = center + E xi + U fu(xi) + P ff(xi),
// where the frame columns E (leaf tangent), U (unstable direction) and
// P (flow direction) all have unit length in the orthogonalized metric.
// W is the arc-radius 2*delta core of the leaf and W+ the arc-radius
// B*delta extension; the jet budget asks |D^a S_z(0)| <= M^|a| at every
// core point z, where S_z is the slope of the leaf read in the adapted
// frame at z.  Backward flow expands the leaf, contracts the slope, and
// transports the jets by the projective graph-transform law; evolution
// re-frames, trims back to arc radius B*delta and resamples each step.

#include <cstdint>
#include <string>
#include <vector>

#include "anosov/averaging.hpp"
#include "anosov/graphops.hpp"
#include "anosov/jet.hpp"
#include "anosov/metric_two.hpp"
#include "anosov/model.hpp"
#include "anosov/report.hpp"
#include "anosov/rng.hpp"
#include "anosov/smallmat.hpp"

namespace anosov {

// ---------------------------------------------------------------------------
// Chebyshev utilities (Lobatto grid, ascending abscissae).

// nodes x_k = mid - half*cos(pi k/(n-1)), k = 0..n-1, so x_0 = lo, x_{n-1} = hi
std::vector<double> cheb_nodes(double lo, double hi, int n);

// series coefficients from values at the Lobatto nodes (ascending order)
std::vector<double> cheb_coeffs(const std::vector<double>& values);

// Clenshaw evaluation of a coefficient series on [lo, hi]
double cheb_eval(const std::vector<double>& coeffs, double lo, double hi,
                 double x);

// coefficient series of the derivative (same interval)
std::vector<double> cheb_derivative(const std::vector<double>& coeffs,
                                    double lo, double hi);

// antiderivative vanishing at lo
std::vector<double> cheb_antiderivative(const std::vector<double>& coeffs,
                                        double lo, double hi);

// Taylor jet of the interpolant at x, to order ord
Jet cheb_jet(const std::vector<double>& coeffs, double lo, double hi, double x,
             int ord);

// ---------------------------------------------------------------------------
// Leaf geometry.

struct LeafParams {
  double rho = 0.2;       // starred cone aperture the leaf must respect
  double rho0 = 0.5;      // reference aperture (budget validation only)
  double delta = 0.0025;  // core arc radius is 2*delta
  double big_b = 26.0;    // extension factor, arc radius of W+ is B*delta
  double jet_m = 2.0;     // jet budget: |D^a S(0)| <= M^|a| for |a| <= r+1
  double varsigma = 0.0;  // certified expansion rate (0 = caller must set)
  double epsilon = 0.0;   // foliation leak rate; 0 means varsigma/20
  double recursion_k = 8.0;   // pinned constant of the jet transport bound
  double col_cb = 3.0;        // pinned constant of the mixing-column bound
  double lam_bound = 1.5;     // certified arc expansion rate Lambda
  int nodes = 33;             // Chebyshev nodes per leaf (odd)
  double t_step = 0.25;       // evolution composes steps of this length
  int jet_order = 3;          // slope jets tracked to this order (= r+1)
  void validate() const;      // throws std::invalid_argument on bad budgets
  double eps() const { return epsilon > 0.0 ? epsilon : varsigma / 20.0; }
};

// derive delta and B from the certified rates so that the slope budget
// stays below 0.85*rho over the construction window and the extension
// swallows the covering radius at time horizon t_max
LeafParams derive_leaf_params(double rho, double varsigma, double lam_bound,
                              double jet_m, double t_max);

struct LeafContext {
  const FlowModel* base = nullptr;  // unperturbed model (metric authority)
  AveragingParams avg;
  const PushedFoliation* stable = nullptr;
  const PushedFoliation* unstable = nullptr;
  LeafParams lp;
  double step = kDefaultStep;  // integrator step for metric fetches/advances
};

// Frame at a point: columns are the leaf tangent, the unstable direction and
// the flow direction, each of unit length in the orthogonalized metric.
struct AdaptedFrame {
  Vec3 origin;
  Mat3 map;      // chart vector = map * frame coordinates
  Mat3 inv;      // cached inverse
  Mat3 gram2;    // orthogonalized metric at origin
  double x_norm2 = 0.0;  // metric length of the evolution flow vector
};

// pure assembly from prefetched data; throws if the columns lose
// transversality
AdaptedFrame assemble_frame(const Mat3& gram2, const Vec3& origin,
                            const Vec3& tangent, const Vec3& e_u,
                            const Vec3& x_flow);

// fetches the splitting data at z from the context and assembles the frame;
// `flow` supplies the flow vector (its metric entries still come from the
// base model)
AdaptedFrame adapted_frame(const LeafContext& cx, const FlowModel& flow,
                           const Vec3& z, const Vec3& tangent);

// re-express q in the chart representative nearest to `anchor`: deck shifts
// until the roof offset is within half a roof, then integer base shifts.
// `cols` (tangent columns at q) picks up the same deck factors.
Vec3 match_chart(const FlowModel& m, const Vec3& anchor, Vec3 q,
                 Mat3* cols = nullptr);

struct AdmissibleLeaf {
  AdaptedFrame frame;        // frame at the center, xi = 0
  double lo = 0.0, hi = 0.0;  // parameter interval (contains 0)
  std::vector<double> fu, ff;     // graph values at the Chebyshev nodes
  std::vector<double> cu, cf;     // their Chebyshev coefficients
  double arc_lo = 0.0, arc_hi = 0.0;  // signed arc length at lo / hi

  int nodes() const { return (int)fu.size(); }
  Vec3 point(double xi) const;        // chart position G(xi)
  Vec3 tangent(double xi) const;      // dG/dxi
  JV3 jet_curve(double xi, int ord) const;  // Taylor of G at xi
};

// graph from node values; fills coefficients, checks |values| stay inside
// the frame chart
AdmissibleLeaf make_graph_leaf(const AdaptedFrame& frame, double lo, double hi,
                               const std::vector<double>& fu,
                               const std::vector<double>& ff);

// splitting data at each leaf node (shared by arc, cone and jet checks)
std::vector<SplitData> leaf_node_data(const LeafContext& cx,
                                      const AdmissibleLeaf& leaf);

// arc-length table: cumulative metric arc from the center, refined until the
// quadrature increment drops below tol
struct ArcTable {
  double lo = 0.0, hi = 0.0;
  std::vector<double> integ;  // metric speed coefficients
  std::vector<double> cum;    // antiderivative coefficients (arc from lo)
  double arc_center = 0.0;    // arc at xi = 0
  double refine_err = 0.0;
  double at(double xi) const;           // signed arc from the center
  double xi_at(double arc) const;       // inverse (monotone)
  double total() const;
};
ArcTable leaf_arc(const LeafContext& cx, const AdmissibleLeaf& leaf,
                  double tol = 1e-8);

// trim the leaf to arc radius `radius` around the center and resample onto a
// fresh Chebyshev grid (same parameter, pure polynomial restriction)
AdmissibleLeaf trim_leaf(const LeafContext& cx, const AdmissibleLeaf& leaf,
                         double radius);

// random admissible leaf centered in the fundamental chart; jets are drawn
// with magnitudes frac * M^|a| and the construction rejects leaves whose
// tangents leave the cone
AdmissibleLeaf random_leaf(const LeafContext& cx, Rng& rng, double frac);

// slope jets of the leaf read in the adapted frame at the leaf point xi;
// rows are the unstable and flow components, coefficients are Taylor
struct SlopeJets {
  Jet su, sf;
  double order_norm(int a) const;  // euclidean size of the order-a pair
};
SlopeJets leaf_slope_jets(const LeafContext& cx, const FlowModel& flow,
                          const AdmissibleLeaf& leaf, double xi, int ord);

// jet-budget check over the core |arc| <= 2*delta: worst margin of
// 1 - |D^a S|/M^a over core nodes and orders 1..jet_order, plus |S(0)|
struct SigmaCheck {
  double budget_margin = 0.0;
  double center_slope = 0.0;   // max |S_z(0)| over core nodes
  double worst_order = 0.0;    // order attaining the margin
  double worst_xi = 0.0;
};
SigmaCheck check_sigma(const LeafContext& cx, const FlowModel& flow,
                       const AdmissibleLeaf& leaf, double jet_m);

// text serialization (round-trips the frame, interval and node values)
void save_leaf(const AdmissibleLeaf& leaf, const std::string& path);
AdmissibleLeaf load_leaf(const std::string& path);

// ---------------------------------------------------------------------------
// Backward evolution and jet transport.

// blocks of the differential of the frame-to-frame backward flow map,
// as Taylor jets in the source leaf parameter at the center
struct TransformBlocks {
  JM3 dphi;       // full frame-coordinate differential, entries are jets
  double t = 0.0;  // step length
  double flow_ratio = 0.0;  // |X(image)| / |X(source)| in the metric
  const Jet& A() const { return dphi(0, 0); }
  const Jet& B() const { return dphi(0, 1); }
  const Jet& Bf() const { return dphi(0, 2); }
  const Jet& C() const { return dphi(1, 0); }
  const Jet& D() const { return dphi(1, 1); }
  const Jet& Df() const { return dphi(1, 2); }
  const Jet& a() const { return dphi(2, 0); }
  const Jet& b() const { return dphi(2, 1); }
  const Jet& f() const { return dphi(2, 2); }
};

// one backward step of length t (t <= t_step + eps): jet-advances the nodes,
// re-frames at the image center, trims to arc radius B*delta and resamples.
// Throws when a tangent leaves the starred rho-cone or the leaf folds.
struct EvolveResult {
  AdmissibleLeaf leaf;     // evolved, trimmed, resampled
  TransformBlocks blocks;  // frame-to-frame differential at the center
  Jet xi_map;              // image parameter as a jet of the source parameter
  SlopeJets pullback;      // image slope jets pulled back to the source
                           // parameter (same-argument convention)
  double arc_factor = 0.0;     // image arc / source arc before trimming
  double cone_margin = 0.0;    // min over image nodes, aperture rho
  double resample_drift = 0.0;  // worst probe distance after resampling
  double center_defect = 0.0;   // |C(0)| + |a(0)| (structural zero)
};
EvolveResult evolve_leaf(const LeafContext& cx, const FlowModel& flow,
                         const AdmissibleLeaf& leaf, double t);

// composition of steps of length <= t_step covering [0, t_total]
struct EvolveTrace {
  std::vector<EvolveResult> steps;
  Jet xi_total;          // final parameter as a jet of the original one
  SlopeJets pull_total;  // final slope jets pulled back to the original
                         // parameter
  const AdmissibleLeaf& final_leaf() const { return steps.back().leaf; }
};
EvolveTrace evolve_steps(const LeafContext& cx, const FlowModel& flow,
                         const AdmissibleLeaf& leaf, double t_total);

// graph-transform transport of slope jets through one step:
//   S_t = (C~ + D~ S)(A + B~ S)^{-1}
// evaluated as jets.  `series` expands the resolvent-style Neumann form and
// throws when the truncation cannot reach tail_tol by k_max terms or the
// denominator degenerates; `closed` divides the jets directly.
SlopeJets transport_jets(const TransformBlocks& blocks, const SlopeJets& s0,
                         int k_max = 6, double tail_tol = 1e-12);
SlopeJets transport_jets_closed(const TransformBlocks& blocks,
                                const SlopeJets& s0);

// finite-difference oracle: evolves a stencil of leaf points by plain
// point integration, reads the image graph in `final_frame` and forms the
// pulled-back slope jets by central differences with Richardson
// extrapolation.  Entirely independent of the jet transport.
SlopeJets fd_slope_jets(const LeafContext& cx, const FlowModel& flow,
                        const AdmissibleLeaf& leaf, double t_total,
                        const AdaptedFrame& final_frame, double h, int ord);

// ---------------------------------------------------------------------------
// Invariance verification.

struct SigmaInvarianceOptions {
  int leaves = 50;
  std::vector<double> t_grid = {0.5, 1.0, 2.0};
  double eta0 = 0.0;          // perturbation size (0 = skip perturbed runs)
  double budget_frac = 0.8;   // generation budget fraction of M
  double fit_band = 0.2;      // allowed spread of the linear-response fit
  double slack = 1e-6;
  std::uint64_t seed = 20240808ull;
};

// verifies the leaf-family invariance statement: jet budgets survive
// backward flow for eta in {0, +-eta0} and t in the grid, the transform
// blocks obey the certified rate bounds, the jet recursion holds with the
// pinned constant, and the perturbed-vs-unperturbed slope distance fits
// C |eta| t M^{r'} with a stable constant across leaves
VerificationReport verify_sigma_invariance(const LeafContext& cx,
                                           const SigmaInvarianceOptions& opt);

// calibration probe: evolves a small family far past the horizon and
// measures the attractor scale of the jets (-> M), the worst arc expansion
// rate (-> Lambda), the recursion constant K and the mixing-column
// constant C_B
struct LeafCalibration {
  double jet_m = 0.0;
  double lam_bound = 0.0;
  double recursion_k = 0.0;
  double col_cb = 0.0;
  double raw_attractor = 0.0;  // measured jet scale before headroom
};
LeafCalibration calibrate_leaf_budget(const LeafContext& cx,
                                      std::uint64_t seed, int probes = 12);

}  // namespace anosov
