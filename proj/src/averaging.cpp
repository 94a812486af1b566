#include "anosov/averaging.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace anosov {

double min_short_threshold(double lambda, double c_star) {
  if (c_star >= 1.0) return 0.0;
  return 2.0 * std::log(1.0 / c_star) / lambda;
}

double beta_value(double lambda, double c_star, double window_length,
                  double short_threshold) {
  double frac = short_threshold / window_length;  // 1 - a
  double a = 1.0 - frac;
  double g = c_star * c_star * std::exp(2.0 * lambda * short_threshold);
  return g * frac / (a + frac * g);
}

void AveragingParams::validate() const {
  auto fail = [](const char* what) {
    throw std::invalid_argument(std::string("averaging params: ") + what);
  };
  if (!(lambda > 0.0)) fail("lambda must be positive");
  if (!(c_star > 0.0 && c_star <= 1.0)) fail("c_star must lie in (0,1]");
  if (!(c_star * std::exp(lambda * short_threshold / 2.0) >= 1.0))
    fail("short-time constraint C_* e^{lambda A/2} >= 1 violated");
  if (!(short_threshold >= k_constant * std::log(window_length) - 1e-12))
    fail("A >= K ln L violated");
  if (!(window_length >= 2.0 * k_constant * std::log(window_length)))
    fail("L >= 2K ln L violated");
  if (!(split_a > 0.5 && split_a < 1.0)) fail("a outside (1/2, 1)");
  if (!(std::fabs(split_a - (1.0 - short_threshold / window_length)) < 1e-12))
    fail("a != 1 - A/L");
  if (!(sigma > 0.0 && sigma < lambda)) fail("sigma outside (0, lambda)");
  if (!(sigma <= sigma_cap * (1.0 + 1e-12))) fail("sigma above proof cap");
  double lhs = beta * (1.0 - std::exp(-2.0 * lambda * window_length) /
                                 (c_star * c_star));
  if (!(lhs >= 0.5)) fail("beta window-split inequality violated");
  if (nodes_per_unit < 4) fail("too few quadrature nodes per unit");
}

AveragingParams choose_averaging_params(double lambda, double c_star,
                                        double k) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(c_star > 0.0 && c_star <= 1.0))
    throw std::invalid_argument("c_star must lie in (0,1]");
  const double candidates[] = {8.0, 12.0, 16.0, 24.0, 32.0};
  for (double L : candidates) {
    double A = std::max(k * std::log(L), min_short_threshold(lambda, c_star));
    double a = 1.0 - A / L;
    if (!(L >= 2.0 * k * std::log(L))) continue;
    if (!(a > 0.5 && a < 1.0)) continue;
    double beta = beta_value(lambda, c_star, L, A);
    if (!(beta * (1.0 - std::exp(-2.0 * lambda * L) / (c_star * c_star)) >=
          0.5))
      continue;
    AveragingParams p;
    p.window_length = L;
    p.short_threshold = A;
    p.k_constant = k;
    p.split_a = a;
    p.sigma_cap = std::min(lambda / 2.0, c_star * c_star / (4.0 * A));
    p.sigma = 0.9 * p.sigma_cap;
    p.beta = beta;
    p.lambda = lambda;
    p.c_star = c_star;
    p.validate();
    return p;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "no admissible averaging window for lambda=%g c_star=%g k=%g",
                lambda, c_star, k);
  throw std::runtime_error(buf);
}

AveragingParams choose_averaging_params(const FlowModel& m, double k) {
  return choose_averaging_params(m.lambda(), m.c_star(), k);
}

}  // namespace anosov
