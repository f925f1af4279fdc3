#ifndef DUALFORGE_LOCALSOLVER_HPP
#define DUALFORGE_LOCALSOLVER_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dualforge/dataio.hpp"
#include "dualforge/losses.hpp"
#include "dualforge/regularizer.hpp"
#include "dualforge/rng.hpp"
#include "dualforge/vecops.hpp"

namespace dualforge {

enum class LocalMode { kExactSequential, kConservativeSmooth, kConservativeLipschitz };

struct LocalStepConfig {
  double sp = 1.0;  // mini-batch fraction M_ell / n_ell, in (0, 1]
  LocalMode mode = LocalMode::kExactSequential;
  int passes = 1;   // shuffled passes over the chosen mini-batch per round
  std::optional<double> s_override;  // conservative-smooth step s_ell
  std::optional<double> q_override;  // conservative-lipschitz q
  double max_sq_norm = 0.0;          // R, needed by the conservative steps

  std::size_t batch_size(std::size_t n_ell) const;
};

// Fractional step of the conservative smooth analysis:
//   s_ell = gamma*lambda*n_ell / (gamma*lambda*n_ell + M_ell*R).
double conservative_smooth_step(double gamma, double lambda_eff, std::size_t n_ell,
                                std::size_t batch, double R);

// Per-worker mutable state. alpha is in shard order; u_local is the local
// dual direction, which drifts by x_i dalpha_i / (lambda_eff n_ell) during a
// step and is restored from the pre-step snapshot plus the broadcast
// increment at every sync, so after a sync it equals the global direction
// bitwise. v_raw tracks sum_{i in S_ell} x_i alpha_i / (lambda_eff n_ell).
struct WorkerState {
  int worker_id = 0;
  std::vector<double> alpha;
  Vec u_local;
  Vec u_at_sync;  // pre-step snapshot; baseline for the next sync
  Vec v_raw;
  bool synced = false;

  WorkerState() = default;
  WorkerState(int id, std::size_t shard_size, std::size_t dim)
      : worker_id(id),
        alpha(shard_size, 0.0),
        u_local(dim, 0.0),
        u_at_sync(dim, 0.0),
        v_raw(dim, 0.0),
        synced(true) {}
};

struct LocalResult {
  Vec delta_v;                  // sum over updated i of x_i * dalpha_i / (lambda_eff n_ell)
  double dual_increase_lb = 0;  // summed 1-d surrogate improvements (diagnostic only)
};

// One local round on a shard: samples a mini-batch without replacement and
// ascends the local dual. Exact-sequential mode maximizes each coordinate's
// 1-d restriction in Gauss-Seidel order, refreshing the direction after
// every update; the conservative modes apply the fixed fractional steps of
// the smooth/Lipschitz analyses against the round-start iterate. Marks the
// state unsynced; v_raw is advanced by the returned delta.
LocalResult local_step(WorkerState& state, const Dataset& data,
                       std::span<const std::uint32_t> shard, const ShiftedElasticNet& reg,
                       const Loss& loss, const LocalStepConfig& cfg, Rng& rng);

// Applies a broadcast direction increment and marks the state synced.
void apply_sync(WorkerState& state, const Vec& delta_v_tilde);

// Local dual value of the (possibly stage-shifted) objective:
//   -sum phi*(-alpha_i) - lambda_eff n_ell f*(u_local) + (kappa n_ell/2)||y||^2.
double local_dual_value(const WorkerState& state, const ShiftedElasticNet& reg,
                        const Loss& loss, const Dataset& data,
                        std::span<const std::uint32_t> shard);

struct LocalPrimalTerms {
  double loss_sum = 0;  // sum_{i in S_ell} phi_i(x_i . w)
  double conj_sum = 0;  // sum_{i in S_ell} phi*(-alpha_i)
};

LocalPrimalTerms local_primal_terms(const WorkerState& state, const Dataset& data,
                                    std::span<const std::uint32_t> shard, const Loss& loss,
                                    const Vec& w);

// x_i . w for a sparse example against a dense vector.
double sparse_dot(const Example& ex, const Vec& w);

}  // namespace dualforge

#endif  // DUALFORGE_LOCALSOLVER_HPP
