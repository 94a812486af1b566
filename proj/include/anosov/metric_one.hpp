#pragma once
// Time-averaged metric <v,w>_1 = L^{-1} ∫_0^L <DT_s v, DT_s w> ds and the
// verification of its expansion/contraction inequalities
//   ||DT_t v||_1  >= e^{σt} ||v||_1            on E^u,  t >= 0
//   ||DT_-t v||_1 >= e^{σt} ||v||_1            on E^s,  t >= 0
//   max{C1^-1, e^{-σt/4}} <= ||DT_t v||_1/||v||_1 <= min{C1, e^{σt/4}} on E^f.
//
// All norms at shifted base points are pulled back to x: with
//   W(t) = L^{-1} ∫_t^{t+L} DT_τ^T G_ref(T_τ x) DT_τ dτ
// one has <DT_t v, DT_t w>_1 at T_t x = v^T W(t) w, so a single orbit pass
// serves every offset in a grid.

#include <cstdint>
#include <vector>

#include "anosov/averaging.hpp"
#include "anosov/integrate.hpp"
#include "anosov/model.hpp"
#include "anosov/report.hpp"

namespace anosov {

// Pulled-back window Grams W(t) for each requested offset (offsets may be
// negative; they are evaluated from one orbit through x).
std::vector<Mat3> window_grams(const FlowModel& m, const AveragingParams& p,
                               const Vec3& x,
                               const std::vector<double>& offsets,
                               double h = kDefaultStep);

Mat3 metric_one_gram(const FlowModel& m, const AveragingParams& p,
                     const Vec3& x, double h = kDefaultStep);
double metric_one(const FlowModel& m, const AveragingParams& p, const Vec3& x,
                  const Vec3& v, const Vec3& w);

// Analytic d/dt W(t)|_{t=0}: endpoint difference of the averaging window,
// (DT_L^T G_ref(T_L x) DT_L - G_ref(x)) / L.
Mat3 metric_one_flow_derivative(const FlowModel& m, const AveragingParams& p,
                                const Vec3& x);

struct MetricLemmaOptions {
  int samples = 200;
  std::vector<double> t_grid;  // positive offsets; empty -> 0,0.1,...,5
  double slack = 1e-6;
  uint64_t seed = 20240808;
  // > 0: check the inequalities at exactly this exponent.  0: calibrate the
  // exponent from the measured rates (the admissible set is an interval
  // because every margin family is monotone in σ) and report its top.
  double sigma_override = 0.0;
};

std::vector<double> default_t_grid();

VerificationReport verify_metric_lemma(const FlowModel& m,
                                       const AveragingParams& p,
                                       const MetricLemmaOptions& opt = {});

}  // namespace anosov
