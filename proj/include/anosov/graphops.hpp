#pragma once
// Graph operators over the hyperbolic splitting and approximate invariant
// distributions.
//
// A d_u = 1 subspace near E^u(x) is the graph {v + Uv} of U: E^u -> E^s ⊕ E^f
// and is stored as two coefficients (c_trans, c_flow) in the metric-one unit
// frame at x (mirrored for subspaces near E^s).  The flow acts on graphs by
// pushing the spanning vector and re-solving in the frame at the endpoint;
// for the unperturbed suspension the coefficients transform exactly by
// λ₊^{-2t} (hyperbolic part) and λ₊^{-t} (flow part) per unit time forward,
// so the action is a contraction and pushed fields forget their initial
// roughness at a measurable exponential rate.
//
// The distribution pipeline mirrors that mechanism: a deterministic
// multiscale "rough template" of amplitude <= width is laid over the exact
// splitting, mollified by a compactly supported bump kernel of the same
// width (periodic grid convolution), and pushed for N units.  The push time
// is planned from the measured contraction rate so the pushed field commutes
// with the flow to within epsilon*t.

#include <cstdint>
#include <string>
#include <vector>

#include "anosov/averaging.hpp"
#include "anosov/integrate.hpp"
#include "anosov/metric_one.hpp"
#include "anosov/model.hpp"
#include "anosov/report.hpp"

namespace anosov {

// Splitting directions normalized to metric-one unit length at the base.
struct GraphFrame {
  Vec3 base;
  Vec3 u_hat, s_hat, f_hat;
  Mat3 gram;  // metric-one Gram at base (chart frame)
};

GraphFrame graph_frame(const FlowModel& m, const AveragingParams& p,
                       const Vec3& x);
// Same, with the Gram (and optionally the splitting) supplied by the caller.
GraphFrame graph_frame_with(const FlowModel& m, const Vec3& x,
                            const Mat3& gram);

struct GraphOperator {
  Vec3 base;
  bool stable = false;    // graph over E^s instead of E^u
  double c_trans = 0.0;   // hyperbolic transverse coefficient
  double c_flow = 0.0;    // flow-direction coefficient
  double norm1 = 0.0;     // metric-one operator norm at base (cached)
};

// Operator norm of U at its base: the metric-one length of the image of the
// unit domain direction (exact for one-dimensional domains).
double graph_norm(const GraphFrame& f, bool stable, double c_trans,
                  double c_flow);

GraphOperator make_graph(const FlowModel& m, const AveragingParams& p,
                         const Vec3& x, bool stable, double c_trans,
                         double c_flow);

// Spanning chart vector: domain unit direction plus the graph image.
Vec3 graph_direction(const GraphFrame& f, const GraphOperator& u);

// Re-express the pushed subspace DT(span) as a graph at the endpoint frame.
// Throws when the pushed direction loses transversality to the complement
// (domain coefficient below 1e-12 of the pushed magnitude).
GraphOperator apply_graph_transform(const GraphFrame& fx, const GraphFrame& fy,
                                    const Mat3& dt, const GraphOperator& u);

// T*_t U: the graph of DT_t {v + Uv} at T_t x.  Signed t; forward time
// contracts unstable graphs, backward time contracts stable ones.
GraphOperator graph_action(const FlowModel& m, const AveragingParams& p,
                           const GraphOperator& u, double t,
                           double h = kDefaultStep);

// Measured contraction of the graph action on random operators: the smallest
// grid time t with sup ||T*_t U||/||U|| <= 1/2, reported with a safety factor
// so ||T*_{n_star} U|| <= ||U||/2 holds on fresh samples.
struct ContractionCalibration {
  double theta_unit = 0.0;  // sup per-unit contraction factor measured
  double n_star = 0.0;      // time with guaranteed factor <= 1/2
};
ContractionCalibration calibrate_contraction(const FlowModel& m,
                                             const AveragingParams& p,
                                             uint64_t seed, int probes,
                                             double amplitude);

// ---------------------------------------------------------------------------
// Distribution fields: graph coefficients on a uniform chart grid.
//
// Coefficients are stored in the metric-one unit frames of the exact
// splitting and vanish near the roof gluing (bump window), so the field is
// smooth on the mapping torus and ghost layers in s are plain zeros.
struct DistributionField {
  bool stable = false;
  int grid_n = 96, grid_ns = 96;
  double roof = 1.0;
  double width = 0.0;              // template amplitude / mollifier width
  double push_time = 0.0;          // 0 for raw and mollified fields
  double smoothing_exponent = 0.0; // fitted growth exponent (reported)
  double c0_max = 0.0;             // sup of coefficient magnitude over nodes
  double c1_fd = 0.0;              // max grid finite-difference slope
  double max_graph_norm = 0.0;     // sup metric-one norm over nodes
  std::string model_id;
  std::vector<double> c_trans, c_flow;  // [k][i][j] row-major

  double& ct(int i, int j, int k) { return c_trans[(k * grid_n + i) * grid_n + j]; }
  double& cf(int i, int j, int k) { return c_flow[(k * grid_n + i) * grid_n + j]; }
  double ct(int i, int j, int k) const { return c_trans[(k * grid_n + i) * grid_n + j]; }
  double cf(int i, int j, int k) const { return c_flow[(k * grid_n + i) * grid_n + j]; }

  // Tricubic interpolation (periodic base, zero ghosts past the s edges).
  void eval_coeffs(const Vec3& p, double& out_trans, double& out_flow) const;
};

// Deterministic multiscale template over the exact splitting: octave modes
// with amplitudes 2^{-gamma m} down to wavelength ~2*width, windowed in s.
// The model must be unperturbed (the exact splitting is constant in chart).
DistributionField build_raw_distribution(const FlowModel& m, bool stable,
                                         int grid_n, double width);

// Periodic tensor-bump mollification of the graph coefficients at the
// field's width.  Discrete kernel weights are normalized to sum to one, so
// constant fields are fixed exactly.  Requires width < rho0/2 (the cones the
// smoothed distributions must live in stay inside the corollary regime).
DistributionField smooth_distribution(const FlowModel& m,
                                      const DistributionField& raw,
                                      double rho0 = 0.5);

// log-log fit of the FD C^1-per-amplitude growth against the width over
// widths {0.1, 0.05, 0.025}: returns the fitted exponent (C^1/C^0 ~
// width^{-exponent}).
double fit_smoothing_exponent(const FlowModel& m, bool stable, int grid_n,
                              const std::vector<double>& widths,
                              std::vector<double>* c0_out = nullptr,
                              std::vector<double>* c1_out = nullptr);

// Pushed foliation: eval(x) = T*_N Û(T_{-N} x) for the unstable family and
// T*_{-N} Û(T_{N} x) for the stable one, evaluated on demand (a grid cannot
// faithfully hold the pushed field's finest scales; samples can).
struct PushedFoliation {
  DistributionField smoothed;
  double push_time = 0.0;
  double n_epsilon = 0.0;     // planned multiplier: N = ceil(n_eps ln(1/width))
  double epsilon_target = 0.0;

  // Graph operator of the pushed distribution at (approximately) x; the
  // return base is the numerically retraced point, within integrator drift
  // of x.  `arrival_gram` skips the metric-one quadrature at the arrival
  // when the caller already has it.
  GraphOperator eval(const FlowModel& m, const AveragingParams& p,
                     const Vec3& x, const Mat3* arrival_gram = nullptr,
                     double h = kDefaultStep) const;
};

PushedFoliation build_pushed_foliation(const FlowModel& m,
                                       const DistributionField& smoothed,
                                       double push_time);

// Plan the push time: N = ceil(n_eps ln(1/width)) with n_eps calibrated from
// the measured contraction time and the measured local flow drift of the
// mollified field, with a contraction headroom factor of 4.
struct FoliationPlan {
  double n_star = 0.0;
  double local_drift = 0.0;  // sup ||T*_t Û(y) - Û(T_t y)||/t on probes
  double n_epsilon = 0.0;
  double push_time = 0.0;
};
FoliationPlan plan_push_time(const FlowModel& m, const AveragingParams& p,
                             const DistributionField& smoothed, double epsilon,
                             uint64_t seed);

// ---------------------------------------------------------------------------
// Flow smoothness: sup over samples and t of ||T*_t U(x) - U(T_t x)||_1 / t
// for the unstable field under forward time and (mirrored, backward time)
// the stable field, each gated against epsilon.  The projector form
// ||(Id - Pi_s) DT_{-t} Pi_s||_1 / t is recorded as a parameter.
struct FlowSmoothnessOptions {
  int samples = 40;
  std::vector<double> t_grid;  // positive; empty -> 0.05, 0.10, ..., 1.0
  double slack = 1e-6;
  uint64_t seed = 20240808;
  double epsilon = 0.0;  // required > 0
};

VerificationReport verify_flow_smoothness(const FlowModel& m,
                                          const AveragingParams& p,
                                          const PushedFoliation& unstable,
                                          const PushedFoliation& stable,
                                          const FlowSmoothnessOptions& opt);

void save_distribution_field(const DistributionField& f,
                             const std::string& path);
DistributionField load_distribution_field(const std::string& path);

}  // namespace anosov
