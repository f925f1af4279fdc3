#include "dualforge/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dualforge {

namespace {

// Margin-side forms: z = y*a, b = y*alpha. The generalized smoothed hinge
// with parameter g covers the hinge family:
//   l_g(z) = 0            if z >= 1
//          = 1 - z - g/2  if z <= 1 - g
//          = (1-z)^2/(2g) otherwise,
// with l_0 = plain hinge. Its conjugate on the dual box is
//   l_g*(-b) = -b + (g/2) b^2,  b in [0, 1].

double hinge_family_value(double z, double g) {
  if (z >= 1.0) return 0.0;
  if (g == 0.0) return 1.0 - z;
  if (z <= 1.0 - g) return 1.0 - z - 0.5 * g;
  const double r = 1.0 - z;
  return r * r / (2.0 * g);
}

double hinge_family_dz(double z, double g) {
  if (z > 1.0) return 0.0;
  if (g == 0.0) return -1.0;  // kink at z == 1 takes the -1 endpoint
  if (z >= 1.0) return 0.0;
  if (z <= 1.0 - g) return -1.0;
  return -(1.0 - z) / g;
}

double logistic_value(double z) {
  // log(1 + exp(-z)) without overflow.
  if (z > 0.0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

double logistic_dz(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(z));
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

double hinge_gamma(const Loss& loss) {
  switch (loss.kind) {
    case LossKind::kSmoothHinge: return 1.0;
    case LossKind::kHinge: return 0.0;
    case LossKind::kSmoothedHinge: return loss.gamma;
    default: throw std::logic_error("not a hinge-family loss");
  }
}

}  // namespace

Loss smooth_hinge_loss() { return {LossKind::kSmoothHinge, 1.0}; }
Loss logistic_loss() { return {LossKind::kLogistic, 0.0}; }
Loss hinge_loss() { return {LossKind::kHinge, 0.0}; }

Loss smoothed_hinge_loss(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("smoothed hinge: gamma must be positive");
  return {LossKind::kSmoothedHinge, gamma};
}

Loss smooth(const Loss& base, double gamma) {
  if (base.kind != LossKind::kHinge)
    throw std::invalid_argument("smooth: only the hinge loss can be smoothed");
  return smoothed_hinge_loss(gamma);
}

LossInfo loss_info(const Loss& loss) {
  switch (loss.kind) {
    case LossKind::kSmoothHinge: return {1.0, 1.0};
    case LossKind::kLogistic: return {0.25, 1.0};
    case LossKind::kHinge: return {0.0, 1.0};
    case LossKind::kSmoothedHinge: return {1.0 / loss.gamma, 1.0};
  }
  return {};
}

double loss_eval(const Loss& loss, double a, int y) {
  const double z = y * a;
  if (loss.kind == LossKind::kLogistic) return logistic_value(z);
  return hinge_family_value(z, hinge_gamma(loss));
}

double loss_deriv(const Loss& loss, double a, int y) {
  const double z = y * a;
  if (loss.kind == LossKind::kLogistic) return y * logistic_dz(z);
  return y * hinge_family_dz(z, hinge_gamma(loss));
}

double loss_conj(const Loss& loss, double b, int y) {
  const double bb = y * b;
  if (bb < 0.0 || bb > 1.0) throw std::domain_error("loss_conj: y*b outside [0, 1]");
  if (loss.kind == LossKind::kLogistic) return xlogx(bb) + xlogx(1.0 - bb);
  const double g = hinge_gamma(loss);
  return -bb + 0.5 * g * bb * bb;
}

double coord_update(const Loss& loss, double alpha, double a, double s, int y) {
  const double z = y * a;
  const double b = y * alpha;

  if (loss.kind == LossKind::kLogistic) {
    double bn;
    if (s == 0.0) {
      // unconstrained conjugate maximizer: sigmoid(-z)
      bn = z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
    } else {
      // psi'(x) = -log(x/(1-x)) - z - s*(x - b) is strictly decreasing on
      // (0,1) with a sign change, so bisection is exact up to tolerance.
      double lo = 0.0, hi = 1.0, mid = 0.5;
      for (int it = 0; it < 80; ++it) {
        mid = 0.5 * (lo + hi);
        const double v = -std::log(mid / (1.0 - mid)) - z - s * (mid - b);
        if (std::abs(v) <= 1e-12) break;
        if (v > 0.0) lo = mid; else hi = mid;
      }
      bn = mid;
    }
    return y * (bn - b);
  }

  const double g = hinge_gamma(loss);
  double bn;
  if (g + s > 0.0) {
    bn = clamp01(b + (1.0 - z - g * b) / (g + s));
  } else {
    // raw hinge with a zero-norm example: the 1-d objective is linear in b
    bn = z < 1.0 ? 1.0 : (z > 1.0 ? 0.0 : 1.0);
  }
  return y * (bn - b);
}

std::string loss_name(const Loss& loss) {
  switch (loss.kind) {
    case LossKind::kSmoothHinge: return "smooth-hinge";
    case LossKind::kLogistic: return "logistic";
    case LossKind::kHinge: return "hinge";
    case LossKind::kSmoothedHinge: return "smoothed-hinge";
  }
  return "?";
}

Loss loss_from_name(const std::string& name, double gamma) {
  if (name == "smooth-hinge") return smooth_hinge_loss();
  if (name == "logistic") return logistic_loss();
  if (name == "hinge") return hinge_loss();
  if (name == "smoothed-hinge") return smoothed_hinge_loss(gamma);
  throw std::invalid_argument("unknown loss: " + name);
}

}  // namespace dualforge
