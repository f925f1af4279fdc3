#ifndef DUALFORGE_REGULARIZER_HPP
#define DUALFORGE_REGULARIZER_HPP

#include <cstddef>

#include "dualforge/vecops.hpp"

namespace dualforge {

// Elastic net in "stage" form. The regularizer contributes
//   lambda*n*g(w) + (kappa*n/2) ||w - center||^2
// to the primal, with lambda*g(w) = (lambda/2)||w||^2 + mu||w||_1 and
// lambda = lambda_eff - kappa. The dual works with the 1-strongly-convex
//   f(w) = 0.5 ||w||^2 + (mu/lambda_eff) ||w||_1,
// which satisfies lambda_eff * f(w) = lambda*g(w) + (kappa/2)||w||^2; the
// stage's linear term -kappa*w.center is carried by the dual direction, and
// the constant (kappa*n/2)||center||^2 is added to both sides of the gap.
struct ShiftedElasticNet {
  double lambda_eff = 1.0;  // lambda + kappa, > 0
  double mu = 0.0;          // absolute l1 weight, >= 0
  double kappa = 0.0;       // proximal shift weight, >= 0
  Vec center;               // y; empty means zero

  double lambda_base() const { return lambda_eff - kappa; }
  double l1_threshold() const { return mu / lambda_eff; }
  double center_at(std::size_t j) const { return center.empty() ? 0.0 : center[j]; }
};

ShiftedElasticNet elastic_net(double lambda, double mu);

// Adds a proximal term (kappa/2)||w - center||^2 per example; kappa = 0
// returns the base unchanged.
ShiftedElasticNet shift(const ShiftedElasticNet& base, double kappa, Vec center);

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// w = grad f*(u), the coordinatewise soft threshold at mu/lambda_eff.
void grad_conj(const ShiftedElasticNet& reg, const Vec& u, Vec& w_out);
Vec grad_conj(const ShiftedElasticNet& reg, const Vec& u);

// f*(u) = sum_j 0.5 * max(|u_j| - mu/lambda_eff, 0)^2.
double conj_value(const ShiftedElasticNet& reg, const Vec& u);

// lambda*n*g(w) + (kappa*n/2)||w - center||^2, the regularizer's share of
// the stage primal.
double primal_value(const ShiftedElasticNet& reg, const Vec& w, std::size_t n);

// (kappa*n/2)||center||^2, added to the stage dual so the stage gap is exact.
double stage_constant(const ShiftedElasticNet& reg, std::size_t n);

}  // namespace dualforge

#endif  // DUALFORGE_REGULARIZER_HPP
