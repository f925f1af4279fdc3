#ifndef DUALFORGE_ACCEL_HPP
#define DUALFORGE_ACCEL_HPP

#include <cstdint>

#include "dualforge/dadm.hpp"

namespace dualforge {

// kappa = max(0, m R / (gamma n) - lambda); 0 means the problem is already
// well conditioned and plain DADM suffices.
double default_kappa(std::size_t m, double R, double gamma, std::size_t n, double lambda);

// Lipschitz-path choice kappa = m L^2 R / (n eps) - lambda, clamped at 0.
double lipschitz_kappa(std::size_t m, double L, double R, std::size_t n,
                       double eps_normalized, double lambda);

enum class NuMode { kZero, kTheory, kValue };

struct Schedule {
  double kappa = 0.0;
  double eta = 1.0;         // sqrt(lambda / (lambda + 2 kappa))
  double inv_eta_sq = 1.0;  // (lambda + 2 kappa) / lambda
  double nu = 0.0;          // momentum weight actually used
  double nu_theory = 0.0;   // (1 - eta) / (1 + eta)
  double xi0 = 0.0;         // (1 + eta^-2) * gap0
};

Schedule make_schedule(double lambda, double kappa, double gap0,
                       NuMode nu_mode = NuMode::kZero, double nu_value = 0.0);

// Stage target: eta * xi_prev / (2 + 2 eta^-2).
double stage_target(const Schedule& sched, double xi_prev);

// Nesterov smoothing wrapper for the hinge: gamma = eps / L^2; solving the
// smoothed problem to eps/2 normalized suboptimality gives eps on the
// original.
struct SmoothWrap {
  Loss loss;
  double inner_eps_normalized = 0.0;
};

SmoothWrap smooth_wrap(const Loss& base, double eps_normalized, double L);

struct AccConfig {
  RunConfig inner;                  // sp, seed, mode, gap_every, audit, ...
  double kappa = -1.0;              // < 0 selects the default choice
  bool kappa_variant_s10 = false;   // override: m R / (lambda gamma) - lambda
  NuMode nu_mode = NuMode::kZero;
  double nu_value = 0.0;
  double target_gap = 1e-6;         // absolute, original problem
  std::size_t outer_max = 100000;
  std::size_t inner_max_rounds = 100000;
  bool stop_inner_on_original = true;  // break a stage once the outer target is met
};

struct AccResult {
  RunResult final_run;        // state of the last inner run (original-problem P/D/gap)
  double kappa = 0.0;
  Schedule schedule;
  std::size_t stages = 0;
  std::size_t total_rounds = 0;  // certified rounds summed over stages
  bool reached_target = false;
  Vec final_center;               // y of the last stage solved
  std::vector<MetricsRow> trace;  // per-sync rows across all stages
  std::size_t inner_cap_warnings = 0;
};

// Algorithm: repeat { build the proximal stage objective around the momentum
// center, warm-start DADM on it with the scheduled stage target, update the
// center y = w + nu (w - w_prev) and shrink xi by (1 - eta/2) } until the
// certified original-problem gap meets the target. alpha carries across
// stages unchanged; the dual direction is re-based algebraically.
AccResult run_acc(const Dataset& data, const Partition& part, const ShiftedElasticNet& base,
                  const Loss& loss, const AccConfig& cfg, const WarmStart* warm = nullptr);

}  // namespace dualforge

#endif  // DUALFORGE_ACCEL_HPP
