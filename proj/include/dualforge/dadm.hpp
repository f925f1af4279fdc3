#ifndef DUALFORGE_DADM_HPP
#define DUALFORGE_DADM_HPP

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

#include "dualforge/comm.hpp"
#include "dualforge/dataio.hpp"
#include "dualforge/localsolver.hpp"
#include "dualforge/losses.hpp"
#include "dualforge/metrics.hpp"
#include "dualforge/regularizer.hpp"
#include "dualforge/vecops.hpp"

namespace dualforge {

// Warm start for a run: duals in example order plus the dual direction in
// the run's (possibly stage-shifted) coordinates. beta is never stored; it
// is a closed-form function of alpha after every sync.
struct WarmStart {
  std::vector<double> alpha;
  Vec u;
};

// When a stage objective is being solved on behalf of an outer accelerated
// loop, the coordinator also reports (and can stop on) the gap of the
// original kappa = 0 problem, reconstructed from the same tracked sums.
struct OriginalView {
  ShiftedElasticNet base;      // kappa = 0 regularizer of the original problem
  double target_gap = 0.0;     // absolute; 0 disables early stop
};

struct RunConfig {
  double sp = 1.0;
  std::uint64_t seed = 0;
  double target_gap = 1e-6;       // absolute gap of the objective being solved
  std::size_t max_rounds = 1000;  // cap on the certified round counter
  LocalMode mode = LocalMode::kExactSequential;
  int local_passes = 1;
  std::optional<double> s_override;
  std::optional<double> q_override;
  std::size_t gap_every = 1;      // evaluate the stopping gap every k-th sync
  std::size_t min_rounds = 0;     // do not stop on the gap before this round
  bool trace_iterates = false;    // keep per-round (w, alpha); small runs only
  bool audit_identities = false;  // check the gap decomposition and beta sum per sync
  std::optional<std::size_t> tail_from;  // tail-average output over rounds > T0
  double gather_timeout_s = 120.0;

  // Stage plumbing used by the accelerated outer loop.
  std::int32_t round_offset = 0;     // worker streams are keyed by absolute round
  int stage_id = 0;
  std::size_t metrics_round_offset = 0;
  std::size_t comms_offset = 0;
  double epoch_offset = 0.0;
  const OriginalView* original = nullptr;
  std::optional<std::chrono::steady_clock::time_point> clock_start;
  std::vector<MetricsRow>* metrics_sink = nullptr;  // appended to when set
};

struct AuditReport {
  double max_decomp_err = 0.0;      // |global gap - sum of local gaps|, worst sync
  double max_decomp_err_rel = 0.0;  // same, divided by 1 + |P| at that sync
  double max_beta_sum = 0.0;        // ||sum_l beta_l||_inf, worst sync
  std::size_t syncs_checked = 0;
};

struct RunResult {
  Vec w;
  std::vector<double> alpha;  // example order
  Vec u;                      // working dual direction of the returned state
  double primal = 0.0, dual = 0.0, gap = 0.0;
  double gap0 = 0.0;          // certified gap of round 0
  std::size_t rounds = 0;     // certified round counter of the returned state
  bool reached_target = false;
  bool reached_original_target = false;
  double loss_sum = 0.0, conj_sum = 0.0;  // at the returned state
  double original_gap = 0.0;              // when an OriginalView was given

  std::vector<MetricsRow> trace;
  std::vector<double> dual_trace;              // dual value at every round
  std::vector<Vec> w_trace;                    // when trace_iterates
  std::vector<std::vector<double>> alpha_trace;
  std::optional<Vec> w_tail;
  std::optional<std::vector<double>> alpha_tail;
  AuditReport audit;
  CommStats comm;

  // total step-broadcasts issued, including the one rolled back at the stop;
  // the outer loop continues absolute round numbering from here
  std::int32_t rounds_issued = 0;
};

// One synchronous DADM run on the given objective. Per round: broadcast the
// direction increment, workers evaluate the synced loss then ascend their
// local duals, gather, aggregate in ascending worker order, soft-threshold
// the direction into the primal iterate, certify the previous round's gap
// from the piggybacked sums, and stop once the certified gap meets the
// target or the round cap. The returned state is exactly the certified one
// (workers roll back their trailing step on the finalize exchange).
RunResult run(const Dataset& data, const Partition& part, const ShiftedElasticNet& reg,
              const Loss& loss, const RunConfig& cfg, const WarmStart* warm = nullptr);

// Coordinator-side sync snapshot; everything below is a pure function of it.
struct SyncSnapshot {
  Vec u;                       // synced dual direction (every worker holds this)
  Vec w;                       // grad_conj(u)
  std::vector<Vec> v_raw;      // per worker: sum_{S_l} x_i alpha_i / (lambda_eff n_l)
  Vec v_raw_global;            // n_l/n - weighted average of v_raw
  std::vector<double> loss_sums, conj_sums;
  std::vector<std::size_t> n_ell;
};

struct GapReport {
  double primal = 0.0, dual = 0.0, gap = 0.0;
  std::vector<double> local_gaps;  // P~_l - D~_l with the closed-form beta
};

// Optimal per-machine multipliers (h = 0): beta_l = lambda_eff n_l (v_l - v).
std::vector<Vec> compute_beta(const SyncSnapshot& snap, const ShiftedElasticNet& reg);

// Global gap plus the per-machine decomposition, each side evaluated by its
// literal formula so the identity check is meaningful.
GapReport duality_gap(const SyncSnapshot& snap, const ShiftedElasticNet& reg, std::size_t n);

// Arithmetic mean of trace entries with round index in (T0, T].
Vec tail_average(const std::vector<Vec>& trace, std::size_t t0);

// ---------------------------------------------------------------------------
// Round-count calculators from the convergence analysis, evaluated exactly
// as stated. All return ceil'd counts as doubles (they can be astronomically
// large for tiny lambda).
// ---------------------------------------------------------------------------

// Smooth losses: T >= C log(C * dual0/eps), C = R/(gamma lambda) + max n_l/M_l.
double smooth_rounds_bound(double R, double gamma, double lambda, double max_shard_ratio,
                           double dual0_over_eps);

struct LipschitzBound {
  double t0 = 0.0;
  double T0 = 0.0;
  double T = 0.0;
};

// Lipschitz losses with tail averaging; eps is the normalized gap target.
LipschitzBound lipschitz_rounds_bound(double R, double L, double lambda,
                                      double max_shard_ratio, double n, double dual0,
                                      double eps_normalized);

// Accelerated outer-stage count: 1 + (2/eta) log(xi0/eps) with
// xi0 = (1 + eta^-2) gap0.
double acc_outer_bound(double lambda, double kappa, double gap0, double eps);

// Accelerated per-stage inner count: chi (log chi + 7 + (5/2) log((l+2k)/l)).
double acc_inner_bound(double R, double gamma, double lambda, double kappa,
                       double max_shard_ratio);

}  // namespace dualforge

#endif  // DUALFORGE_DADM_HPP
