#include "dualforge/localsolver.hpp"

#include <cmath>
#include <stdexcept>

namespace dualforge {

std::size_t LocalStepConfig::batch_size(std::size_t n_ell) const {
  const double m = std::round(sp * static_cast<double>(n_ell));
  const auto batch = static_cast<std::size_t>(std::max(1.0, m));
  return std::min(batch, n_ell);
}

double conservative_smooth_step(double gamma, double lambda_eff, std::size_t n_ell,
                                std::size_t batch, double R) {
  const double num = gamma * lambda_eff * static_cast<double>(n_ell);
  return num / (num + static_cast<double>(batch) * R);
}

double sparse_dot(const Example& ex, const Vec& w) {
  double s = 0.0;
  for (std::size_t k = 0; k < ex.nnz(); ++k) s += ex.values[k] * w[ex.indices[k]];
  return s;
}

namespace {

// x_i . grad_conj(u) without materializing w.
double sparse_dot_soft(const Example& ex, const Vec& u, double threshold) {
  double s = 0.0;
  for (std::size_t k = 0; k < ex.nnz(); ++k)
    s += ex.values[k] * soft_threshold(u[ex.indices[k]], threshold);
  return s;
}

void exact_sequential_pass(WorkerState& state, const Dataset& data,
                           std::span<const std::uint32_t> shard, const ShiftedElasticNet& reg,
                           const Loss& loss, std::span<const std::uint32_t> batch_local,
                           Vec& delta_v, double& increase_lb) {
  const double lam_n = reg.lambda_eff * static_cast<double>(shard.size());
  const double threshold = reg.l1_threshold();
  for (std::uint32_t j : batch_local) {
    const Example& ex = data.examples[shard[j]];
    const double a = sparse_dot_soft(ex, state.u_local, threshold);
    const double s = ex.squared_norm / lam_n;
    const double d = coord_update(loss, state.alpha[j], a, s, ex.label);
    if (d == 0.0) continue;
    const double before = -loss_conj(loss, state.alpha[j], ex.label);
    state.alpha[j] += d;
    increase_lb += -loss_conj(loss, state.alpha[j], ex.label) - before - a * d - 0.5 * s * d * d;
    const double scale = d / lam_n;
    for (std::size_t k = 0; k < ex.nnz(); ++k) {
      const std::uint32_t col = ex.indices[k];
      state.u_local[col] += ex.values[k] * scale;
      delta_v[col] += ex.values[k] * scale;
    }
  }
}

void conservative_pass(WorkerState& state, const Dataset& data,
                       std::span<const std::uint32_t> shard, const ShiftedElasticNet& reg,
                       const Loss& loss, const LocalStepConfig& cfg,
                       std::span<const std::uint32_t> batch_local, Vec& delta_v) {
  const std::size_t n_ell = shard.size();
  const double lam_n = reg.lambda_eff * static_cast<double>(n_ell);

  double step;
  if (cfg.mode == LocalMode::kConservativeSmooth) {
    if (cfg.s_override) {
      step = *cfg.s_override;
    } else {
      const double gamma_inv = loss_info(loss).smoothness;
      if (gamma_inv <= 0.0)
        throw std::invalid_argument("conservative-smooth mode needs a smooth loss");
      step = conservative_smooth_step(1.0 / gamma_inv, reg.lambda_eff, n_ell,
                                      batch_local.size(), cfg.max_sq_norm);
    }
  } else {
    // Lipschitz analysis: dalpha_i = (q n_ell / M_ell)(u_i - alpha_i).
    const double q = cfg.q_override ? *cfg.q_override
                                    : static_cast<double>(batch_local.size()) /
                                          static_cast<double>(n_ell);
    step = q * static_cast<double>(n_ell) / static_cast<double>(batch_local.size());
  }
  if (step < 0.0 || step > 1.0)
    throw std::invalid_argument("conservative step outside [0, 1]");

  // All u_i evaluated against the round-start iterate, as in the analysis.
  const Vec w = grad_conj(reg, state.u_at_sync);
  for (std::uint32_t j : batch_local) {
    const Example& ex = data.examples[shard[j]];
    const double u_i = -loss_deriv(loss, sparse_dot(ex, w), ex.label);
    const double d = step * (u_i - state.alpha[j]);
    if (d == 0.0) continue;
    state.alpha[j] += d;
    const double scale = d / lam_n;
    for (std::size_t k = 0; k < ex.nnz(); ++k) {
      const std::uint32_t col = ex.indices[k];
      state.u_local[col] += ex.values[k] * scale;
      delta_v[col] += ex.values[k] * scale;
    }
  }
}

}  // namespace

LocalResult local_step(WorkerState& state, const Dataset& data,
                       std::span<const std::uint32_t> shard, const ShiftedElasticNet& reg,
                       const Loss& loss, const LocalStepConfig& cfg, Rng& rng) {
  if (!state.synced) throw std::logic_error("local_step: worker state not synchronized");
  if (shard.size() != state.alpha.size())
    throw std::logic_error("local_step: shard/alpha size mismatch");

  const std::size_t n_ell = shard.size();
  const std::size_t batch = cfg.batch_size(n_ell);

  // Sample without replacement; the sampled prefix is already shuffled.
  std::vector<std::uint32_t> order(n_ell);
  for (std::size_t j = 0; j < n_ell; ++j) order[j] = static_cast<std::uint32_t>(j);
  rng.partial_shuffle(order, batch);
  order.resize(batch);

  LocalResult result;
  result.delta_v.assign(state.u_local.size(), 0.0);
  state.u_at_sync = state.u_local;

  if (cfg.mode == LocalMode::kExactSequential) {
    for (int pass = 0; pass < std::max(1, cfg.passes); ++pass) {
      if (pass > 0) rng.partial_shuffle(order, order.size());
      exact_sequential_pass(state, data, shard, reg, loss, order, result.delta_v,
                            result.dual_increase_lb);
    }
  } else {
    conservative_pass(state, data, shard, reg, loss, cfg, order, result.delta_v);
  }

  add_scaled(state.v_raw, 1.0, result.delta_v);
  state.synced = false;
  return result;
}

void apply_sync(WorkerState& state, const Vec& delta_v_tilde) {
  if (delta_v_tilde.size() != state.u_local.size())
    throw std::logic_error("apply_sync: dimension mismatch");
  // The broadcast increment applies to the pre-step snapshot: the worker's
  // own drift is superseded by the aggregated direction.
  for (std::size_t j = 0; j < state.u_local.size(); ++j)
    state.u_local[j] = state.u_at_sync[j] + delta_v_tilde[j];
  state.u_at_sync = state.u_local;
  state.synced = true;
}

double local_dual_value(const WorkerState& state, const ShiftedElasticNet& reg,
                        const Loss& loss, const Dataset& data,
                        std::span<const std::uint32_t> shard) {
  double conj_sum = 0.0;
  for (std::size_t j = 0; j < shard.size(); ++j)
    conj_sum += loss_conj(loss, state.alpha[j], data.examples[shard[j]].label);
  const double lam_n = reg.lambda_eff * static_cast<double>(shard.size());
  return -conj_sum - lam_n * conj_value(reg, state.u_local) + stage_constant(reg, shard.size());
}

LocalPrimalTerms local_primal_terms(const WorkerState& state, const Dataset& data,
                                    std::span<const std::uint32_t> shard, const Loss& loss,
                                    const Vec& w) {
  LocalPrimalTerms terms;
  for (std::size_t j = 0; j < shard.size(); ++j) {
    const Example& ex = data.examples[shard[j]];
    terms.loss_sum += loss_eval(loss, sparse_dot(ex, w), ex.label);
    terms.conj_sum += loss_conj(loss, state.alpha[j], ex.label);
  }
  return terms;
}

}  // namespace dualforge
