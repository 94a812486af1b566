#pragma once
// Orthogonalized metric built from the pushed foliations:
//   <v,w>_2 = <Pi_s v, Pi_s w>_1 + <Pi_u v, Pi_u w>_1 + <Pi_f v, Pi_f w>_1
// where Pi_s, Pi_u, Pi_f are the coordinate projections of the splitting
// (pushed stable graph) ⊕ (pushed unstable graph) ⊕ (flow line).  By
// construction the three blocks are <,>_2-orthogonal, each projector is
// <,>_2-self-adjoint (hence 2-norm contracting), and vectors inside a single
// block keep their averaged-metric length.

#include <string>
#include <utility>
#include <vector>

#include "anosov/graphops.hpp"
#include "anosov/gridfield.hpp"

namespace anosov {

struct SplitData {
  Vec3 e_s, e_u, e_f;  // chart spanning directions at x (averaged-unit)
  Mat3 gram1, gram2;   // averaged and orthogonalized Grams at x
  Mat3 proj_s, proj_u, proj_f;
  double volume = 0.0;  // averaged-metric volume of the unit triple
};

// Pointwise splitting data.  Throws when the foliation directions lose
// transversality (normalized volume below 0.05: degenerate splitting).
// `gram1` skips the averaged-metric quadrature when the caller has it.
SplitData metric_two_data(const FlowModel& m, const AveragingParams& p,
                          const PushedFoliation& stable,
                          const PushedFoliation& unstable, const Vec3& x,
                          const Mat3* gram1 = nullptr,
                          double h = kDefaultStep);

struct ProjectorField {
  int grid_n = 24;
  int grid_ns = 24;
  double roof = 1.0;
  std::string model_id;
  // node projectors, [k][i][j] row-major, chart frame.  Grid values only: a
  // blended projector is no longer a projector, so off-grid consumers
  // re-derive pointwise data instead of interpolating.
  std::vector<Mat3> pi_s, pi_u, pi_f;

  size_t idx(int i, int j, int k) const {
    return (size_t(k) * grid_n + i) * grid_n + j;
  }
};

// Evaluate the splitting over a grid: the orthogonalized metric field (node
// Grams, uniform-equivalence constants) plus the projector field.  Reuses
// `field1` node Grams when the grids coincide.
std::pair<MetricField, ProjectorField> build_metric_two(
    const FlowModel& m, const AveragingParams& p, const MetricField& field1,
    const PushedFoliation& stable, const PushedFoliation& unstable,
    int grid_n);

void save_projector_field(const ProjectorField& f, const std::string& path);
ProjectorField load_projector_field(const std::string& path);

}  // namespace anosov
