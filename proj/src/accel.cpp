#include "dualforge/accel.hpp"

#include <cmath>
#include <stdexcept>

#include "dualforge/log.hpp"
#include "dualforge/oracle.hpp"

namespace dualforge {

double default_kappa(std::size_t m, double R, double gamma, std::size_t n, double lambda) {
  if (m == 0 || n == 0 || R <= 0 || gamma <= 0 || lambda <= 0)
    throw std::invalid_argument("default_kappa: bad inputs");
  return std::max(0.0, static_cast<double>(m) * R / (gamma * static_cast<double>(n)) - lambda);
}

double lipschitz_kappa(std::size_t m, double L, double R, std::size_t n,
                       double eps_normalized, double lambda) {
  if (m == 0 || n == 0 || L <= 0 || R <= 0 || eps_normalized <= 0 || lambda <= 0)
    throw std::invalid_argument("lipschitz_kappa: bad inputs");
  return std::max(0.0, static_cast<double>(m) * L * L * R /
                           (static_cast<double>(n) * eps_normalized) -
                       lambda);
}

Schedule make_schedule(double lambda, double kappa, double gap0, NuMode nu_mode,
                       double nu_value) {
  if (!(lambda > 0) || kappa < 0 || gap0 < 0)
    throw std::invalid_argument("make_schedule: bad inputs");
  Schedule s;
  s.kappa = kappa;
  s.inv_eta_sq = (lambda + 2.0 * kappa) / lambda;
  s.eta = std::sqrt(lambda / (lambda + 2.0 * kappa));
  s.nu_theory = (1.0 - s.eta) / (1.0 + s.eta);
  switch (nu_mode) {
    case NuMode::kZero: s.nu = 0.0; break;
    case NuMode::kTheory: s.nu = s.nu_theory; break;
    case NuMode::kValue: s.nu = nu_value; break;
  }
  s.xi0 = (1.0 + s.inv_eta_sq) * gap0;
  return s;
}

double stage_target(const Schedule& sched, double xi_prev) {
  return sched.eta * xi_prev / (2.0 + 2.0 * sched.inv_eta_sq);
}

SmoothWrap smooth_wrap(const Loss& base, double eps_normalized, double L) {
  if (!(eps_normalized > 0)) throw std::invalid_argument("smooth_wrap: eps must be positive");
  SmoothWrap wrap;
  wrap.loss = smooth(base, eps_normalized / (L * L));
  wrap.inner_eps_normalized = eps_normalized / 2.0;
  return wrap;
}

AccResult run_acc(const Dataset& data, const Partition& part, const ShiftedElasticNet& base,
                  const Loss& loss, const AccConfig& cfg, const WarmStart* warm) {
  if (base.kappa != 0.0) throw std::invalid_argument("run_acc: base regularizer must be unshifted");
  const LossInfo info = loss_info(loss);
  if (info.smoothness <= 0.0)
    throw std::invalid_argument("run_acc: loss must be smooth (apply smooth_wrap first)");
  const std::size_t n = data.n();
  const std::size_t d = data.dim;
  const double gamma = 1.0 / info.smoothness;
  const double lambda = base.lambda_eff;
  const double R = data.stats.max_squared_norm;

  double kappa = cfg.kappa;
  if (kappa < 0.0) {
    kappa = cfg.kappa_variant_s10
                ? std::max(0.0, static_cast<double>(part.workers()) * R / (lambda * gamma) -
                                    lambda)
                : default_kappa(part.workers(), R, gamma, n, lambda);
  }

  AccResult out;
  out.kappa = kappa;

  // Initial state and the exactly computed starting gap (warm or cold).
  std::vector<double> alpha = warm ? warm->alpha : std::vector<double>(n, 0.0);
  Vec u_base;  // direction in base (kappa = 0) coordinates
  if (warm) {
    u_base = warm->u;
  } else {
    u_base.assign(d, 0.0);
  }
  Vec w_prev = grad_conj(base, u_base);
  Vec w = w_prev;
  const oracle::GapValues initial = oracle::full_gap(data, base, loss, w, alpha);
  const double gap0 = initial.gap;
  out.schedule = make_schedule(lambda, kappa, gap0, cfg.nu_mode, cfg.nu_value);

  if (kappa == 0.0) {
    // Well-conditioned: a single plain DADM stage with the final target.
    RunConfig inner = cfg.inner;
    inner.target_gap = cfg.target_gap;
    inner.max_rounds = cfg.inner_max_rounds;
    OriginalView view;
    view.base = base;
    view.target_gap = cfg.target_gap;
    inner.original = &view;
    WarmStart ws{alpha, u_base};
    out.final_run = run(data, part, base, loss, inner, &ws);
    out.stages = 1;
    out.total_rounds = out.final_run.rounds;
    out.reached_target = out.final_run.reached_target;
    out.final_center.assign(d, 0.0);
    out.trace = out.final_run.trace;
    return out;
  }

  const ShiftedElasticNet probe_stage = shift(base, kappa, Vec(d, 0.0));
  const double lambda_eff = probe_stage.lambda_eff;
  const double kappa_over = kappa / lambda_eff;

  Vec y = w;  // y^(0) = w^(0)
  Vec y_prev = y;
  // Stage coordinates: u = (sum_i x_i alpha_i + kappa n y) / (lambda_eff n).
  Vec u(d);
  for (std::size_t j = 0; j < d; ++j)
    u[j] = (lambda / lambda_eff) * u_base[j] + kappa_over * y[j];

  double xi = out.schedule.xi0;
  std::int32_t round_offset = cfg.inner.round_offset;
  std::size_t metrics_round_offset = cfg.inner.metrics_round_offset;
  std::size_t comms_offset = cfg.inner.comms_offset;
  double epoch_offset = cfg.inner.epoch_offset;
  const auto clock_start =
      cfg.inner.clock_start.value_or(std::chrono::steady_clock::now());

  OriginalView view;
  view.base = base;
  view.target_gap = cfg.stop_inner_on_original ? cfg.target_gap : 0.0;

  std::size_t t = 0;
  while (t < cfg.outer_max) {
    ++t;
    ShiftedElasticNet stage = shift(base, kappa, y);
    const double eps_t = stage_target(out.schedule, xi);

    RunConfig inner = cfg.inner;
    inner.target_gap = eps_t;
    inner.max_rounds = cfg.inner_max_rounds;
    inner.round_offset = round_offset;
    inner.stage_id = static_cast<int>(t);
    inner.metrics_round_offset = metrics_round_offset;
    inner.comms_offset = comms_offset;
    inner.epoch_offset = epoch_offset;
    inner.original = &view;
    inner.clock_start = clock_start;
    inner.metrics_sink = &out.trace;
    inner.min_rounds = 1;
    inner.trace_iterates = false;
    inner.tail_from.reset();

    WarmStart ws{std::move(alpha), u};
    RunResult stage_run = run(data, part, stage, loss, inner, &ws);
    alpha = std::move(stage_run.alpha);

    round_offset += stage_run.rounds_issued + 1;  // +1 for the finalize exchange
    metrics_round_offset += stage_run.rounds + 1;
    comms_offset += stage_run.comm.rounds;  // completed pairs, finalize included
    epoch_offset += static_cast<double>(stage_run.rounds) * cfg.inner.sp;

    if (!stage_run.reached_target && !stage_run.reached_original_target) {
      out.inner_cap_warnings += 1;
      if (!out.trace.empty()) out.trace.back().note = "inner-cap";
      logf(LogLevel::kWarn, "stage %zu hit the inner round cap before its target", t);
    }

    w_prev = std::move(w);
    w = stage_run.w;
    u = stage_run.u;
    out.stages = t;
    out.total_rounds += stage_run.rounds;
    out.final_center = y;

    const bool done = stage_run.reached_original_target ||
                      (view.target_gap <= 0.0 && stage_run.original_gap <= cfg.target_gap);
    out.final_run = std::move(stage_run);
    if (done) {
      out.reached_target = true;
      break;
    }

    // y^(t) = w^(t) + nu (w^(t) - w^(t-1)); re-base u to the new center.
    y_prev = y;
    for (std::size_t j = 0; j < d; ++j)
      y[j] = w[j] + out.schedule.nu * (w[j] - w_prev[j]);
    for (std::size_t j = 0; j < d; ++j) u[j] += kappa_over * (y[j] - y_prev[j]);
    xi *= (1.0 - out.schedule.eta / 2.0);

    // An empty stage that also left the center unchanged is a fixed point of
    // everything but xi; burn schedule stages until the target undercuts the
    // (unchanged) stage gap.
    if (out.final_run.rounds == 0 && max_abs_diff(y, y_prev) == 0.0) {
      while (t < cfg.outer_max && stage_target(out.schedule, xi) >= out.final_run.gap) {
        xi *= (1.0 - out.schedule.eta / 2.0);
        ++t;
      }
      out.stages = t;
    }
  }

  out.final_run.alpha = std::move(alpha);  // reclaimed for the warm start above
  return out;
}

}  // namespace dualforge
