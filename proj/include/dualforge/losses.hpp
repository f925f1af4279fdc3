#ifndef DUALFORGE_LOSSES_HPP
#define DUALFORGE_LOSSES_HPP

#include <string>

namespace dualforge {

// Binary-classification margin losses phi_i(a) with labels y in {-1,+1}.
// All duals are parametrized so that y*alpha_i lies in [0, 1]; the conjugate
// is infinite outside that box (L = 1 for every loss here).
enum class LossKind { kSmoothHinge, kLogistic, kHinge, kSmoothedHinge };

struct Loss {
  LossKind kind = LossKind::kSmoothHinge;
  double gamma = 1.0;  // smoothing parameter: 1 for smooth hinge, 0 for hinge
};

Loss smooth_hinge_loss();
Loss logistic_loss();
Loss hinge_loss();
Loss smoothed_hinge_loss(double gamma);

// Nesterov smoothing of the hinge: adds (gamma/2)||alpha||^2 to the
// conjugate, which makes the primal loss (1/gamma)-smooth and within
// gamma*L^2/2 of the hinge pointwise. gamma = 1 recovers the smooth hinge.
Loss smooth(const Loss& base, double gamma);

struct LossInfo {
  double smoothness = 0.0;  // 1/gamma; 0 means non-smooth
  double lipschitz = 1.0;   // L
};

LossInfo loss_info(const Loss& loss);

// phi_i(a) at margin score a = x_i . w.
double loss_eval(const Loss& loss, double a, int y);

// A (sub)gradient phi_i'(a). At the hinge kink the -y endpoint is returned.
double loss_deriv(const Loss& loss, double a, int y);

// Conjugate value phi_i*(-b); throws std::domain_error when y*b is outside
// [0, 1].
double loss_conj(const Loss& loss, double b, int y);

// Exact maximizer of the 1-d dual restriction
//   psi(D) = -phi*(-(alpha + D)) - a*D - (s/2)*D^2,
// with s = ||x_i||^2 / (lambda_eff * n_ell). Closed form for the hinge
// family; derivative bisection (|psi'| <= 1e-12 or 80 halvings) for
// logistic. s = 0 falls back to the unconstrained conjugate maximizer
// -phi'(a) clipped to the box. Returns the step D; alpha + D stays feasible.
double coord_update(const Loss& loss, double alpha, double a, double s, int y);

std::string loss_name(const Loss& loss);
Loss loss_from_name(const std::string& name, double gamma = 1.0);

}  // namespace dualforge

#endif  // DUALFORGE_LOSSES_HPP
