#include "dualforge/regularizer.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace dualforge {

ShiftedElasticNet elastic_net(double lambda, double mu) {
  if (!(lambda > 0.0)) throw std::invalid_argument("elastic_net: lambda must be positive");
  if (mu < 0.0) throw std::invalid_argument("elastic_net: mu must be nonnegative");
  ShiftedElasticNet reg;
  reg.lambda_eff = lambda;
  reg.mu = mu;
  return reg;
}

ShiftedElasticNet shift(const ShiftedElasticNet& base, double kappa, Vec center) {
  if (kappa < 0.0) throw std::invalid_argument("shift: kappa must be nonnegative");
  if (kappa == 0.0) return base;
  if (base.kappa != 0.0) throw std::invalid_argument("shift: base is already shifted");
  ShiftedElasticNet reg;
  reg.lambda_eff = base.lambda_eff + kappa;
  reg.mu = base.mu;
  reg.kappa = kappa;
  reg.center = std::move(center);
  return reg;
}

void grad_conj(const ShiftedElasticNet& reg, const Vec& u, Vec& w_out) {
  const double t = reg.l1_threshold();
  w_out.resize(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) w_out[j] = soft_threshold(u[j], t);
}

Vec grad_conj(const ShiftedElasticNet& reg, const Vec& u) {
  Vec w;
  grad_conj(reg, u, w);
  return w;
}

double conj_value(const ShiftedElasticNet& reg, const Vec& u) {
  const double t = reg.l1_threshold();
  double s = 0.0;
  for (double v : u) {
    const double r = std::max(std::abs(v) - t, 0.0);
    s += 0.5 * r * r;
  }
  return s;
}

double primal_value(const ShiftedElasticNet& reg, const Vec& w, std::size_t n) {
  const double lambda = reg.lambda_base();
  const double nd = static_cast<double>(n);
  double value = 0.5 * lambda * nd * squared_norm(w) + reg.mu * nd * l1_norm(w);
  if (reg.kappa > 0.0) {
    double sq = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double r = w[j] - reg.center_at(j);
      sq += r * r;
    }
    value += 0.5 * reg.kappa * nd * sq;
  }
  return value;
}

double stage_constant(const ShiftedElasticNet& reg, std::size_t n) {
  if (reg.kappa == 0.0 || reg.center.empty()) return 0.0;
  return 0.5 * reg.kappa * static_cast<double>(n) * squared_norm(reg.center);
}

}  // namespace dualforge
