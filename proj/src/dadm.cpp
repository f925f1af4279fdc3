#include "dualforge/dadm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dualforge/log.hpp"
#include "dualforge/rng.hpp"

namespace dualforge {

namespace {

struct WorkerCtx {
  int id = 0;
  const Dataset* data = nullptr;
  std::span<const std::uint32_t> shard;
  std::vector<double> alpha0;
  Vec u0;
  Vec v0;
  ShiftedElasticNet reg;
  Loss loss;
  LocalStepConfig lcfg;
  std::uint64_t seed = 0;
};

void worker_main(Hub& hub, WorkerCtx ctx) {
  try {
    WorkerState st(ctx.id, ctx.shard.size(), ctx.u0.size());
    st.alpha = std::move(ctx.alpha0);
    st.u_local = std::move(ctx.u0);
    st.u_at_sync = st.u_local;
    st.v_raw = std::move(ctx.v0);

    std::vector<double> alpha_prev = st.alpha;
    Vec last_delta(st.u_local.size(), 0.0);

    for (;;) {
      const RoundBroadcast msg = hub.worker_recv(static_cast<std::size_t>(ctx.id));
      if (msg.kind == MsgKind::kShutdown) return;

      if (msg.kind == MsgKind::kFinalizeRevert) {
        st.alpha = alpha_prev;
        st.u_local = st.u_at_sync;
        add_scaled(st.v_raw, -1.0, last_delta);
        RoundResult res;
        res.worker_id = ctx.id;
        res.round = msg.round;
        res.n_ell = ctx.shard.size();
        res.delta_v.assign(st.u_local.size(), 0.0);
        res.alpha = st.alpha;
        hub.worker_send(res);
        return;
      }

      apply_sync(st, msg.delta_v_tilde);

      RoundResult res;
      res.worker_id = ctx.id;
      res.round = msg.round;
      res.n_ell = ctx.shard.size();
      if (msg.want_loss) {
        const Vec w = grad_conj(ctx.reg, st.u_local);
        for (std::uint32_t i : ctx.shard) {
          const Example& ex = ctx.data->examples[i];
          res.loss_sum += loss_eval(ctx.loss, sparse_dot(ex, w), ex.label);
        }
      }

      alpha_prev = st.alpha;
      Rng rng = Rng::stream({ctx.seed, static_cast<std::uint64_t>(ctx.id),
                             static_cast<std::uint64_t>(msg.round)});
      LocalResult lr = local_step(st, *ctx.data, ctx.shard, ctx.reg, ctx.loss, ctx.lcfg, rng);
      last_delta = std::move(lr.delta_v);

      for (std::size_t j = 0; j < ctx.shard.size(); ++j)
        res.conj_sum += loss_conj(ctx.loss, st.alpha[j], ctx.data->examples[ctx.shard[j]].label);
      res.delta_v = last_delta;
      if (msg.want_alpha) res.alpha = st.alpha;
      hub.worker_send(res);
    }
  } catch (const std::exception& e) {
    hub.worker_fail(static_cast<std::size_t>(ctx.id), e.what());
  }
}

}  // namespace

std::vector<Vec> compute_beta(const SyncSnapshot& snap, const ShiftedElasticNet& reg) {
  std::vector<Vec> beta(snap.v_raw.size());
  for (std::size_t l = 0; l < snap.v_raw.size(); ++l) {
    const double scale = reg.lambda_eff * static_cast<double>(snap.n_ell[l]);
    beta[l].resize(snap.v_raw_global.size());
    for (std::size_t j = 0; j < beta[l].size(); ++j)
      beta[l][j] = scale * (snap.v_raw[l][j] - snap.v_raw_global[j]);
  }
  return beta;
}

GapReport duality_gap(const SyncSnapshot& snap, const ShiftedElasticNet& reg, std::size_t n) {
  GapReport rep;
  const double lam_n = reg.lambda_eff * static_cast<double>(n);
  double loss_total = 0.0, conj_total = 0.0;
  for (double v : snap.loss_sums) loss_total += v;
  for (double v : snap.conj_sums) conj_total += v;
  rep.primal = loss_total + primal_value(reg, snap.w, n);
  rep.dual = -conj_total - lam_n * conj_value(reg, snap.u) + stage_constant(reg, n);
  rep.gap = rep.primal - rep.dual;

  // Per-machine gaps at the closed-form beta, each term by its own formula.
  const std::vector<Vec> beta = compute_beta(snap, reg);
  const double kappa_over = reg.kappa > 0.0 ? reg.kappa / reg.lambda_eff : 0.0;
  const std::size_t d = snap.u.size();
  Vec u_l(d);
  for (std::size_t l = 0; l < beta.size(); ++l) {
    const double n_l = static_cast<double>(snap.n_ell[l]);
    const double lam_nl = reg.lambda_eff * n_l;
    for (std::size_t j = 0; j < d; ++j) {
      u_l[j] = snap.v_raw[l][j] - beta[l][j] / lam_nl;
      if (kappa_over > 0.0) u_l[j] += kappa_over * reg.center_at(j);
    }
    const double d_l = -snap.conj_sums[l] - lam_nl * conj_value(reg, u_l) +
                       stage_constant(reg, snap.n_ell[l]);
    const double p_l = snap.loss_sums[l] + primal_value(reg, snap.w, snap.n_ell[l]) +
                       dot(beta[l], snap.w);
    rep.local_gaps.push_back(p_l - d_l);
  }
  return rep;
}

Vec tail_average(const std::vector<Vec>& trace, std::size_t t0) {
  if (trace.empty() || t0 + 1 >= trace.size())
    throw std::invalid_argument("tail_average: need rounds beyond T0");
  Vec mean(trace.front().size(), 0.0);
  const std::size_t count = trace.size() - 1 - t0;
  for (std::size_t t = t0 + 1; t < trace.size(); ++t) add_scaled(mean, 1.0, trace[t]);
  for (double& v : mean) v /= static_cast<double>(count);
  return mean;
}

double smooth_rounds_bound(double R, double gamma, double lambda, double max_shard_ratio,
                           double dual0_over_eps) {
  if (R <= 0 || gamma <= 0 || lambda <= 0 || max_shard_ratio <= 0 || dual0_over_eps <= 0)
    throw std::invalid_argument("smooth_rounds_bound: inputs must be positive");
  const double c = R / (gamma * lambda) + max_shard_ratio;
  return std::ceil(c * std::log(c * dual0_over_eps));
}

LipschitzBound lipschitz_rounds_bound(double R, double L, double lambda,
                                      double max_shard_ratio, double n, double dual0,
                                      double eps_normalized) {
  if (R <= 0 || L <= 0 || lambda <= 0 || max_shard_ratio <= 0 || n <= 0 ||
      eps_normalized <= 0)
    throw std::invalid_argument("lipschitz_rounds_bound: inputs must be positive");
  const double ntilde = max_shard_ratio;
  const double G = 4.0 * R * L * L;
  LipschitzBound b;
  b.t0 = std::max(0.0, std::ceil(ntilde * std::log(2.0 * lambda * ntilde * dual0 / (n * G))));
  b.T0 = std::max(b.t0, 4.0 * G / (lambda * eps_normalized) - 2.0 * ntilde + b.t0);
  b.T = std::ceil(b.T0 + std::max(ntilde, G / (lambda * eps_normalized)));
  b.T0 = std::ceil(b.T0);
  return b;
}

double acc_outer_bound(double lambda, double kappa, double gap0, double eps) {
  if (lambda <= 0 || kappa < 0 || gap0 <= 0 || eps <= 0)
    throw std::invalid_argument("acc_outer_bound: bad inputs");
  const double inv_eta_sq = (lambda + 2.0 * kappa) / lambda;
  const double eta = std::sqrt(lambda / (lambda + 2.0 * kappa));
  const double xi0 = (1.0 + inv_eta_sq) * gap0;
  return std::ceil(1.0 + (2.0 / eta) * std::log(xi0 / eps));
}

double acc_inner_bound(double R, double gamma, double lambda, double kappa,
                       double max_shard_ratio) {
  if (R <= 0 || gamma <= 0 || lambda <= 0 || kappa < 0 || max_shard_ratio <= 0)
    throw std::invalid_argument("acc_inner_bound: bad inputs");
  const double chi = R / (gamma * (lambda + kappa)) + max_shard_ratio;
  return std::ceil(chi * (std::log(chi) + 7.0 + 2.5 * std::log((lambda + 2.0 * kappa) / lambda)));
}

namespace {

struct CoordinatorState {
  Vec u, w, v_raw_global;
  std::vector<Vec> v_raw;
  std::vector<double> conj_sums;
  std::vector<std::size_t> n_ell;
};

SyncSnapshot make_snapshot(const CoordinatorState& st, const std::vector<double>& loss_sums) {
  SyncSnapshot snap;
  snap.u = st.u;
  snap.w = st.w;
  snap.v_raw = st.v_raw;
  snap.v_raw_global = st.v_raw_global;
  snap.loss_sums = loss_sums;
  snap.conj_sums = st.conj_sums;
  snap.n_ell = st.n_ell;
  return snap;
}

}  // namespace

RunResult run(const Dataset& data, const Partition& part, const ShiftedElasticNet& reg,
              const Loss& loss, const RunConfig& cfg, const WarmStart* warm) {
  const std::size_t n = data.n();
  const std::size_t d = data.dim;
  const std::size_t m = part.workers();
  if (n == 0 || d == 0) throw std::invalid_argument("run: empty dataset");
  if (cfg.max_rounds < 1) throw std::invalid_argument("run: max_rounds must be >= 1");
  if (!(cfg.target_gap > 0)) throw std::invalid_argument("run: target gap must be positive");
  if (!(cfg.sp > 0.0 && cfg.sp <= 1.0)) throw std::invalid_argument("run: sp must be in (0, 1]");
  {
    std::size_t total = 0;
    for (std::size_t l = 0; l < m; ++l) total += part.size_of(l);
    if (total != n) throw std::invalid_argument("run: partition does not match dataset");
  }

  const double lam_n = reg.lambda_eff * static_cast<double>(n);
  const double stage_const = stage_constant(reg, n);
  const double kappa_over = reg.kappa > 0.0 ? reg.kappa / reg.lambda_eff : 0.0;

  // --- initial state -------------------------------------------------------
  std::vector<double> alpha0(n, 0.0);
  if (warm) {
    if (warm->alpha.size() != n) throw std::invalid_argument("run: warm alpha length");
    alpha0 = warm->alpha;
    for (std::size_t i = 0; i < n; ++i)
      loss_conj(loss, alpha0[i], data.examples[i].label);  // feasibility; throws if outside
  }

  CoordinatorState st;
  st.n_ell.resize(m);
  st.v_raw.assign(m, Vec(d, 0.0));
  st.conj_sums.assign(m, 0.0);
  for (std::size_t l = 0; l < m; ++l) {
    st.n_ell[l] = part.size_of(l);
    const double lam_nl = reg.lambda_eff * static_cast<double>(st.n_ell[l]);
    for (std::uint32_t i : part.assignments[l]) {
      const Example& ex = data.examples[i];
      st.conj_sums[l] += loss_conj(loss, alpha0[i], ex.label);
      if (alpha0[i] != 0.0)
        for (std::size_t k = 0; k < ex.nnz(); ++k)
          st.v_raw[l][ex.indices[k]] += ex.values[k] * (alpha0[i] / lam_nl);
    }
  }
  st.v_raw_global.assign(d, 0.0);
  for (std::size_t l = 0; l < m; ++l)
    add_scaled(st.v_raw_global, static_cast<double>(st.n_ell[l]) / static_cast<double>(n),
               st.v_raw[l]);

  Vec u_scratch = st.v_raw_global;
  if (kappa_over > 0.0)
    for (std::size_t j = 0; j < d; ++j) u_scratch[j] += kappa_over * reg.center_at(j);

  if (warm) {
    if (warm->u.size() != d) throw std::invalid_argument("run: warm u length");
    const double err = max_abs_diff(warm->u, u_scratch);
    if (err > 1e-9 * (1.0 + max_abs(u_scratch)))
      throw std::invalid_argument("run: warm start u inconsistent with alpha");
    st.u = warm->u;
  } else {
    st.u = u_scratch;
  }
  st.w = grad_conj(reg, st.u);

  const auto clock_start = cfg.clock_start.value_or(std::chrono::steady_clock::now());
  auto now_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     clock_start)
        .count();
  };

  RunResult result;
  auto dual_value = [&](const Vec& u) {
    double conj_total = 0.0;
    for (double c : st.conj_sums) conj_total += c;
    return -conj_total - lam_n * conj_value(reg, u) + stage_const;
  };

  auto original_values = [&](const std::vector<double>& loss_sums, double& primal,
                             double& dual) {
    const ShiftedElasticNet& base = cfg.original->base;
    double loss_total = 0.0;
    for (double v : loss_sums) loss_total += v;
    primal = loss_total + primal_value(base, st.w, n);
    Vec v_orig(d);
    const double rescale = reg.lambda_eff / base.lambda_eff;
    for (std::size_t j = 0; j < d; ++j)
      v_orig[j] = (st.u[j] - kappa_over * reg.center_at(j)) * rescale;
    double conj_total = 0.0;
    for (double c : st.conj_sums) conj_total += c;
    dual = -conj_total - base.lambda_eff * static_cast<double>(n) * conj_value(base, v_orig);
  };

  // Certifies the current sync from per-shard loss sums: identity checks,
  // metrics row, and the stop decision. Returns true when the run is done.
  auto certify = [&](std::size_t state, const std::vector<double>& loss_sums,
                     std::size_t comms_used, double& primal_out, double& dual_out,
                     double& gap_out, double& loss_total_out) -> bool {
    double loss_total = 0.0;
    for (double v : loss_sums) loss_total += v;
    const double primal = loss_total + primal_value(reg, st.w, n);
    const double dual = dual_value(st.u);
    const double gap = primal - dual;
    if (!std::isfinite(primal) || !std::isfinite(dual)) {
      std::ostringstream oss;
      oss << "run: non-finite objective at round " << state << " (primal=" << primal
          << ", dual=" << dual << "); the problem scale may exceed double range";
      throw std::runtime_error(oss.str());
    }
    if (gap < -1e-9 * (1.0 + std::abs(primal))) {
      std::ostringstream oss;
      oss << "run: negative duality gap " << gap << " at round " << state;
      throw std::runtime_error(oss.str());
    }
    if (state == 0) result.gap0 = gap;

    double primal_orig = primal, dual_orig = dual, gap_orig = gap;
    if (cfg.original != nullptr) {
      original_values(loss_sums, primal_orig, dual_orig);
      gap_orig = primal_orig - dual_orig;
      if (gap_orig < -1e-9 * (1.0 + std::abs(primal_orig))) {
        std::ostringstream oss;
        oss << "run: negative original-problem gap " << gap_orig << " at round " << state;
        throw std::runtime_error(oss.str());
      }
    }

    if (cfg.audit_identities) {
      const SyncSnapshot snap = make_snapshot(st, loss_sums);
      const GapReport rep = duality_gap(snap, reg, n);
      double local_total = 0.0;
      for (double g : rep.local_gaps) local_total += g;
      const double err = std::abs(rep.gap - local_total);
      result.audit.max_decomp_err = std::max(result.audit.max_decomp_err, err);
      result.audit.max_decomp_err_rel =
          std::max(result.audit.max_decomp_err_rel, err / (1.0 + std::abs(rep.primal)));
      const std::vector<Vec> beta = compute_beta(snap, reg);
      Vec beta_sum(d, 0.0);
      for (const Vec& b : beta) add_scaled(beta_sum, 1.0, b);
      result.audit.max_beta_sum = std::max(result.audit.max_beta_sum, max_abs(beta_sum));
      result.audit.syncs_checked += 1;
    }

    MetricsRow row;
    row.round = cfg.metrics_round_offset + state;
    row.stage = cfg.stage_id;
    row.epoch_equiv = cfg.epoch_offset + static_cast<double>(state) * cfg.sp;
    row.comms = cfg.comms_offset + comms_used;
    row.time_ms = now_ms();
    row.primal = primal_orig;
    row.dual = dual_orig;
    row.gap = gap_orig;
    row.gap_normalized = gap_orig / static_cast<double>(n);
    row.kappa = reg.kappa;
    result.trace.push_back(row);
    if (cfg.metrics_sink != nullptr) cfg.metrics_sink->push_back(row);

    const bool hit_target = gap <= cfg.target_gap && state >= cfg.min_rounds;
    const bool hit_original = cfg.original != nullptr && cfg.original->target_gap > 0 &&
                              gap_orig <= cfg.original->target_gap;
    const bool hit_cap = state >= cfg.max_rounds;
    primal_out = primal;
    dual_out = dual;
    gap_out = gap;
    loss_total_out = loss_total;
    if (hit_target || hit_original || hit_cap) {
      result.rounds = state;
      result.reached_target = hit_target;
      result.reached_original_target = hit_original;
      result.original_gap = gap_orig;
      if (!hit_target && !hit_original) result.trace.back().note = "round-cap";
      return true;
    }
    return false;
  };

  // Round 0 is certified directly from the initial state, so a warm start
  // that already meets the target costs no communication.
  {
    std::vector<double> loss_sums0(m, 0.0);
    for (std::size_t l = 0; l < m; ++l)
      for (std::uint32_t i : part.assignments[l]) {
        const Example& ex = data.examples[i];
        loss_sums0[l] += loss_eval(loss, sparse_dot(ex, st.w), ex.label);
      }
    double primal = 0, dual = 0, gap = 0, loss_total = 0;
    if (certify(0, loss_sums0, 0, primal, dual, gap, loss_total)) {
      result.w = st.w;
      result.u = st.u;
      result.alpha = alpha0;
      result.primal = primal;
      result.dual = dual;
      result.gap = gap;
      result.loss_sum = loss_total;
      double conj_total = 0.0;
      for (double c : st.conj_sums) conj_total += c;
      result.conj_sum = conj_total;
      result.dual_trace.push_back(dual);
      if (cfg.trace_iterates) {
        result.w_trace.push_back(st.w);
        result.alpha_trace.push_back(alpha0);
      }
      return result;
    }
  }

  // --- workers --------------------------------------------------------------
  Hub hub(m, d, cfg.gather_timeout_s);
  LocalStepConfig lcfg;
  lcfg.sp = cfg.sp;
  lcfg.mode = cfg.mode;
  lcfg.passes = cfg.local_passes;
  lcfg.s_override = cfg.s_override;
  lcfg.q_override = cfg.q_override;
  lcfg.max_sq_norm = data.stats.max_squared_norm;

  std::vector<std::jthread> threads;
  struct HubCloser {
    Hub& hub;
    ~HubCloser() { hub.shutdown(); }
  } closer{hub};
  threads.reserve(m);
  for (std::size_t l = 0; l < m; ++l) {
    WorkerCtx ctx;
    ctx.id = static_cast<int>(l);
    ctx.data = &data;
    ctx.shard = std::span<const std::uint32_t>(part.assignments[l]);
    ctx.alpha0.reserve(st.n_ell[l]);
    for (std::uint32_t i : part.assignments[l]) ctx.alpha0.push_back(alpha0[i]);
    ctx.u0 = st.u;
    ctx.v0 = st.v_raw[l];
    ctx.reg = reg;
    ctx.loss = loss;
    ctx.lcfg = lcfg;
    ctx.seed = cfg.seed;
    threads.emplace_back(worker_main, std::ref(hub), std::move(ctx));
  }

  result.dual_trace.push_back(dual_value(st.u));
  if (cfg.trace_iterates) {
    result.w_trace.push_back(st.w);
    result.alpha_trace.push_back(alpha0);
  }
  Vec pending_delta(d, 0.0);

  auto finalize = [&](std::int32_t t, double primal, double dual, double gap,
                      double loss_total) -> void {
    RoundBroadcast fin;
    fin.kind = MsgKind::kFinalizeRevert;
    fin.round = cfg.round_offset + t;
    fin.delta_v_tilde.assign(d, 0.0);
    hub.broadcast(fin);
    const std::vector<RoundResult> replies = hub.gather();
    result.alpha.assign(n, 0.0);
    for (std::size_t l = 0; l < m; ++l)
      for (std::size_t j = 0; j < st.n_ell[l]; ++j)
        result.alpha[part.assignments[l][j]] = replies[l].alpha[j];
    result.w = st.w;
    result.u = st.u;
    result.primal = primal;
    result.dual = dual;
    result.gap = gap;
    result.loss_sum = loss_total;
    double conj_total = 0.0;
    for (double c : st.conj_sums) conj_total += c;
    result.conj_sum = conj_total;
    result.rounds_issued = t;
  };

  for (std::int32_t t = 1;; ++t) {
    const std::size_t state = static_cast<std::size_t>(t) - 1;  // certified this gather
    const bool want_loss =
        (state >= 1 && state % cfg.gap_every == 0) || state >= cfg.max_rounds;

    RoundBroadcast msg;
    msg.kind = MsgKind::kStep;
    msg.round = cfg.round_offset + t;
    msg.want_loss = want_loss;
    msg.want_alpha = cfg.trace_iterates;
    msg.delta_v_tilde = pending_delta;
    msg.kappa = reg.kappa;
    msg.y_version = cfg.stage_id;
    hub.broadcast(msg);
    const std::vector<RoundResult> results = hub.gather();

    if (want_loss) {
      std::vector<double> loss_sums(m);
      for (std::size_t l = 0; l < m; ++l) loss_sums[l] = results[l].loss_sum;
      double primal = 0, dual = 0, gap = 0, loss_total = 0;
      if (certify(state, loss_sums, static_cast<std::size_t>(t), primal, dual, gap,
                  loss_total)) {
        finalize(t, primal, dual, gap, loss_total);
        break;
      }
    }

    // advance to round t
    Vec agg(d, 0.0);
    for (std::size_t l = 0; l < m; ++l)
      add_scaled(agg, static_cast<double>(st.n_ell[l]) / static_cast<double>(n),
                 results[l].delta_v);
    for (std::size_t j = 0; j < d; ++j) st.u[j] += agg[j];
    add_scaled(st.v_raw_global, 1.0, agg);
    for (std::size_t l = 0; l < m; ++l) {
      add_scaled(st.v_raw[l], 1.0, results[l].delta_v);
      st.conj_sums[l] = results[l].conj_sum;
    }
    st.w = grad_conj(reg, st.u);
    pending_delta = std::move(agg);

    result.dual_trace.push_back(dual_value(st.u));
    if (cfg.trace_iterates) {
      result.w_trace.push_back(st.w);
      std::vector<double> alpha_t(n, 0.0);
      for (std::size_t l = 0; l < m; ++l)
        for (std::size_t j = 0; j < st.n_ell[l]; ++j)
          alpha_t[part.assignments[l][j]] = results[l].alpha[j];
      result.alpha_trace.push_back(std::move(alpha_t));
    }
  }

  if (cfg.tail_from) {
    if (cfg.trace_iterates && result.w_trace.size() > *cfg.tail_from + 1) {
      result.w_tail = tail_average(result.w_trace, *cfg.tail_from);
      result.alpha_tail = tail_average(result.alpha_trace, *cfg.tail_from);
    } else {
      logf(LogLevel::kWarn, "tail averaging requested but no iterate trace is available");
    }
  }

  result.comm = hub.stats();
  return result;
}

}  // namespace dualforge
