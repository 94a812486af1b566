#pragma once
// Grid-sampled Gram fields on the mapping torus with cubic interpolation.
//
// Storage is chart-frame Gram matrices on a uniform (x1, x2, s) grid,
// periodic in the base and deck-twisted in the roof direction:
//   G(x, s + roof) = D^T G(A x mod 1, s) D.
// The deck map A preserves the uniform base lattice exactly, so ghost layers
// above/below the fundamental domain are fetched by an index permutation
// plus a congruence by D^{±1}.  Interpolation is componentwise tensor-product
// cubic (Catmull-Rom); interpolated matrices are SPD-projected (symmetrize,
// eigenvalue floor 1e-12) before use.

#include <string>
#include <vector>

#include "anosov/averaging.hpp"
#include "anosov/model.hpp"

namespace anosov {

// Symmetrize and floor eigenvalues at 1e-12 (only decomposes when a
// positivity check fails; interpolation rarely breaks SPD by more than bits).
Mat3 spd_project(const Mat3& g);

struct MetricField {
  int which = 1;       // 1: averaged metric, 2: orthogonalized metric
  int grid_n = 24;     // base resolution per unit period
  int grid_ns = 24;    // roof-direction layers
  double roof = 1.0;
  std::string model_id;
  AveragingParams params;
  std::vector<Mat3> gram;  // [k][i][j] row-major, chart frame

  // uniform equivalence with the reference metric over grid points
  double equiv_lower_sq = 0.0;  // min relative eigenvalue
  double equiv_upper_sq = 0.0;  // max relative eigenvalue
  // Documented off-grid agreement budget (relative Frobenius against direct
  // quadrature).  Model-dependent: the canonical field depends on the base
  // only through s and interpolates to ~1e-4, while the wobbled field's
  // expanding block averages the conformal factor along expanding orbits and
  // genuinely oscillates at base frequencies up to λ₊^L — off-grid values
  // are resolution-limited there, and consumers needing tight norms use
  // direct quadrature instead.
  double interp_budget = 2e-3;

  const Mat3& at(int i, int j, int k) const {
    return gram[(size_t(k) * grid_n + i) * grid_n + j];
  }
  Mat3& at(int i, int j, int k) {
    return gram[(size_t(k) * grid_n + i) * grid_n + j];
  }

  // Ghost-aware lattice fetch for any integer k (twists across the roof).
  Mat3 fetch(int i, int j, int k) const;

  Mat3 gram_interp(const Vec3& p) const;  // SPD-projected interpolation
  double inner(const Vec3& p, const Vec3& v, const Vec3& w) const;
  double norm(const Vec3& p, const Vec3& v) const;
};

MetricField build_metric_field(const FlowModel& m, const AveragingParams& p,
                               int grid_n);

void save_metric_field(const MetricField& f, const std::string& path);
MetricField load_metric_field(const std::string& path);

}  // namespace anosov
