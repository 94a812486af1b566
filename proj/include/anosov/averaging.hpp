#pragma once
// Selection of the time-averaging window parameters (L, A, K, a, σ) used by
// the averaged metric.  The constraint set comes from the construction:
//   C_*·e^{λA/2} >= 1,  A >= K ln L,  L >= 2K ln L,  a = 1 - A/L in (1/2, 1),
//   β(1 - C_*^{-2} e^{-2λL}) >= 1/2,
// with β = C_*² e^{2λA} (A/L) / (a + (A/L) C_*² e^{2λA}) and the proof-side
// exponent cap σ_A = min{λ/2, C_*²/(4A)}.

#include "anosov/model.hpp"

namespace anosov {

struct AveragingParams {
  double window_length = 8.0;   // L
  double short_threshold = 0.0; // A
  double k_constant = 1.25;     // K
  double split_a = 0.0;         // a = 1 - A/L
  double sigma = 0.0;           // working exponent, <= sigma_cap
  double sigma_cap = 0.0;       // min{lambda/2, C_*^2/(4A)}
  double beta = 0.0;            // window-split constant at these parameters
  double lambda = 0.0;          // expansion rate the selection used
  double c_star = 1.0;          // hyperbolicity prefactor used
  int nodes_per_unit = 12;      // quadrature nodes per unit of flow time

  void validate() const;  // throws std::invalid_argument on violation
};

// Smallest A with C_*·e^{λA/2} >= 1 (zero when C_* >= 1).
double min_short_threshold(double lambda, double c_star);

// β from its closed-form definition.
double beta_value(double lambda, double c_star, double window_length,
                  double short_threshold);

// Smallest window length from {8, 12, 16, 24, 32} satisfying every
// constraint at the given K; throws std::runtime_error when none does.
AveragingParams choose_averaging_params(double lambda, double c_star,
                                        double k = 1.25);
AveragingParams choose_averaging_params(const FlowModel& m, double k = 1.25);

}  // namespace anosov
