#pragma once
// Hyperbolic splitting E^s ⊕ E^u ⊕ E^f at a point.
//
// The unperturbed suspensions carry the exact eigen-splitting; perturbed
// models fall back to push-forward of a generic direction from far in the
// past (E^u) / future (E^s), renormalized every unit of time.  The residual
// is the angle moved during the last unit, which decays like λ₊^{-2·horizon}.

#include "anosov/model.hpp"

namespace anosov {

SplittingFrame invariant_splitting(const FlowModel& m, const Vec3& x,
                                   double horizon = 30.0,
                                   double residual_threshold = 1e-8);

// Angle between two directions (sign-insensitive), used for Cauchy checks.
double direction_angle(const Vec3& a, const Vec3& b);

}  // namespace anosov
