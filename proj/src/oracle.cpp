#include "dualforge/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "dualforge/localsolver.hpp"
#include "dualforge/rng.hpp"

namespace dualforge {
namespace oracle {

GridSupResult grid_sup(const std::function<double(double)>& f, double lo, double hi,
                       double step) {
  GridSupResult best{f(lo), lo};
  for (double x = lo + step; x <= hi + 0.5 * step; x += step) {
    const double v = f(std::min(x, hi));
    if (v > best.sup) best = {v, std::min(x, hi)};
  }
  return best;
}

namespace {

double smooth_part(const Dataset& data, const ShiftedElasticNet& reg, const Loss& loss,
                   const Vec& w) {
  double value = 0.0;
  for (const Example& ex : data.examples) value += loss_eval(loss, sparse_dot(ex, w), ex.label);
  const double nd = static_cast<double>(data.n());
  value += 0.5 * reg.lambda_base() * nd * squared_norm(w);
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

void smooth_grad(const Dataset& data, const ShiftedElasticNet& reg, const Loss& loss,
                 const Vec& w, Vec& grad) {
  grad.assign(w.size(), 0.0);
  for (const Example& ex : data.examples) {
    const double d = loss_deriv(loss, sparse_dot(ex, w), ex.label);
    if (d == 0.0) continue;
    for (std::size_t k = 0; k < ex.nnz(); ++k) grad[ex.indices[k]] += d * ex.values[k];
  }
  const double nd = static_cast<double>(data.n());
  const double lambda_n = reg.lambda_base() * nd;
  const double kappa_n = reg.kappa * nd;
  for (std::size_t j = 0; j < w.size(); ++j) {
    grad[j] += lambda_n * w[j];
    if (kappa_n > 0.0) grad[j] += kappa_n * (w[j] - reg.center_at(j));
  }
}

// P(w) - D(alpha) with alpha_i = -phi'(x_i . w), the standard dual
// certificate construction.
double certificate_gap(const Dataset& data, const ShiftedElasticNet& reg, const Loss& loss,
                       const Vec& w, double primal, std::vector<double>* alpha_out) {
  const std::size_t n = data.n();
  const double lam_n = reg.lambda_eff * static_cast<double>(n);
  Vec u(w.size(), 0.0);
  double conj_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = data.examples[i];
    const double alpha_i = -loss_deriv(loss, sparse_dot(ex, w), ex.label);
    if (alpha_out) (*alpha_out)[i] = alpha_i;
    conj_sum += loss_conj(loss, alpha_i, ex.label);
    for (std::size_t k = 0; k < ex.nnz(); ++k)
      u[ex.indices[k]] += ex.values[k] * (alpha_i / lam_n);
  }
  if (reg.kappa > 0.0 && !reg.center.empty()) {
    const double c = reg.kappa / reg.lambda_eff;
    for (std::size_t j = 0; j < u.size(); ++j) u[j] += c * reg.center[j];
  }
  const double dual =
      -conj_sum - lam_n * conj_value(reg, u) + stage_constant(reg, data.n());
  return primal - dual;
}

}  // namespace

Certificate prox_grad_reference(const Dataset& data, const ShiftedElasticNet& reg,
                                const Loss& loss, double tol, std::size_t max_iter) {
  if (loss_info(loss).smoothness <= 0.0)
    throw std::invalid_argument("prox_grad_reference: needs a smooth (or smoothed) loss");

  const std::size_t d = data.dim;
  const double nd = static_cast<double>(data.n());
  const double mu_n = reg.mu * nd;

  Vec w(d, 0.0), z(d, 0.0), w_prev(d, 0.0), grad(d), w_next(d);
  double step_l = 1.0;  // local Lipschitz estimate, grown by backtracking
  double theta = 1.0;
  double f_z = smooth_part(data, reg, loss, z);
  double p_prev = f_z + mu_n * l1_norm(z);
  std::vector<double> alpha(data.n());
  bool just_restarted = false;

  for (std::size_t it = 1; it <= max_iter; ++it) {
    smooth_grad(data, reg, loss, z, grad);
    double f_next = 0.0;
    for (;;) {
      const double inv = 1.0 / step_l;
      double quad = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        w_next[j] = soft_threshold(z[j] - inv * grad[j], inv * mu_n);
        const double diff = w_next[j] - z[j];
        quad += grad[j] * diff + 0.5 * step_l * diff * diff;
      }
      f_next = smooth_part(data, reg, loss, w_next);
      if (f_next <= f_z + quad + 1e-12 * (1.0 + std::abs(f_z))) break;
      step_l *= 2.0;
      if (!std::isfinite(step_l)) throw std::runtime_error("prox_grad_reference: backtracking diverged");
    }

    const double p_next = f_next + mu_n * l1_norm(w_next);
    if (p_next > p_prev && !just_restarted) {
      // function-value restart; the follow-up plain prox step is accepted
      // unconditionally (its increase is bounded by the backtracking slack),
      // which rules out a deterministic restart livelock near the floor
      theta = 1.0;
      z = w;
      f_z = smooth_part(data, reg, loss, z);
      just_restarted = true;
      continue;
    }
    just_restarted = false;

    w_prev = w;
    w = w_next;
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    const double beta = (theta - 1.0) / theta_next;
    for (std::size_t j = 0; j < d; ++j) z[j] = w[j] + beta * (w[j] - w_prev[j]);
    theta = theta_next;
    f_z = smooth_part(data, reg, loss, z);
    p_prev = p_next;

    if (it % 10 == 0 || it == max_iter) {
      const double gap = certificate_gap(data, reg, loss, w, p_next, &alpha);
      if (gap <= tol) {
        Certificate cert;
        cert.w_star = w;
        cert.primal_at_star = p_next;
        cert.certified_gap = gap;
        cert.iterations = it;
        return cert;
      }
      step_l *= 0.9;  // allow the estimate to relax between certificates
    }
  }
  throw std::runtime_error("prox_grad_reference: iteration cap reached before tolerance");
}

SdcaTrajectory single_machine_sdca(const Dataset& data, const ShiftedElasticNet& reg,
                                   const Loss& loss, std::size_t epochs,
                                   std::uint64_t seed) {
  const std::size_t n = data.n();
  const std::size_t d = data.dim;
  // Shard order matches the one-worker partition of the same seed; the
  // expressions below mirror the worker's coordinate arithmetic so the m=1
  // reduction is exact.
  const Partition part = make_partition(n, 1, seed);
  const std::vector<std::uint32_t>& order = part.assignments[0];
  const double lam_n = reg.lambda_eff * static_cast<double>(n);
  const double threshold = reg.l1_threshold();

  std::vector<double> alpha(n, 0.0);
  Vec u(d, 0.0);
  SdcaTrajectory traj;
  {
    const auto g = full_gap(data, reg, loss, grad_conj(reg, u), alpha);
    traj.gap0 = g.gap;
  }

  std::vector<std::uint32_t> visit(n);
  for (std::size_t e = 1; e <= epochs; ++e) {
    for (std::size_t j = 0; j < n; ++j) visit[j] = static_cast<std::uint32_t>(j);
    Rng rng = Rng::stream({seed, 0, e});
    rng.partial_shuffle(visit, n);

    Vec u_work = u;
    Vec delta(d, 0.0);
    for (std::uint32_t j : visit) {
      const Example& ex = data.examples[order[j]];
      double a = 0.0;
      for (std::size_t k = 0; k < ex.nnz(); ++k)
        a += ex.values[k] * soft_threshold(u_work[ex.indices[k]], threshold);
      const double s = ex.squared_norm / lam_n;
      const double dstep = coord_update(loss, alpha[order[j]], a, s, ex.label);
      if (dstep == 0.0) continue;
      alpha[order[j]] += dstep;
      const double scale = dstep / lam_n;
      for (std::size_t k = 0; k < ex.nnz(); ++k) {
        const std::uint32_t col = ex.indices[k];
        u_work[col] += ex.values[k] * scale;
        delta[col] += ex.values[k] * scale;
      }
    }
    for (std::size_t j = 0; j < d; ++j) u[j] += delta[j];

    Vec w = grad_conj(reg, u);
    const auto g = full_gap(data, reg, loss, w, alpha);
    traj.alpha.push_back(alpha);
    traj.w.push_back(std::move(w));
    traj.primal.push_back(g.primal);
    traj.dual.push_back(g.dual);
    traj.gap.push_back(g.gap);
  }
  return traj;
}

GapValues full_gap(const Dataset& data, const ShiftedElasticNet& reg, const Loss& loss,
                   const Vec& w, const std::vector<double>& alpha) {
  const std::size_t n = data.n();
  const double lam_n = reg.lambda_eff * static_cast<double>(n);
  double loss_sum = 0.0, conj_sum = 0.0;
  Vec u(data.dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = data.examples[i];
    loss_sum += loss_eval(loss, sparse_dot(ex, w), ex.label);
    conj_sum += loss_conj(loss, alpha[i], ex.label);
    if (alpha[i] != 0.0)
      for (std::size_t k = 0; k < ex.nnz(); ++k)
        u[ex.indices[k]] += ex.values[k] * (alpha[i] / lam_n);
  }
  if (reg.kappa > 0.0 && !reg.center.empty()) {
    const double c = reg.kappa / reg.lambda_eff;
    for (std::size_t j = 0; j < u.size(); ++j) u[j] += c * reg.center[j];
  }
  GapValues g;
  g.primal = loss_sum + primal_value(reg, w, n);
  g.dual = -conj_sum - lam_n * conj_value(reg, u) + stage_constant(reg, n);
  g.gap = g.primal - g.dual;
  return g;
}

}  // namespace oracle
}  // namespace dualforge
