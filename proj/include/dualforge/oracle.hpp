#ifndef DUALFORGE_ORACLE_HPP
#define DUALFORGE_ORACLE_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "dualforge/dataio.hpp"
#include "dualforge/losses.hpp"
#include "dualforge/regularizer.hpp"
#include "dualforge/vecops.hpp"

namespace dualforge {
namespace oracle {

// Reference computations for tests and the `verify` subcommand. The
// proximal-gradient solver is deliberately a different algorithm family from
// the dual coordinate path it checks.

struct GridSupResult {
  double sup = 0.0;
  double argmax = 0.0;
};

// Grid maximum of a 1-d function on [lo, hi]; error is bounded by
// step * (local Lipschitz constant).
GridSupResult grid_sup(const std::function<double(double)>& f, double lo, double hi,
                       double step);

struct Certificate {
  Vec w_star;
  double primal_at_star = 0.0;
  double certified_gap = 0.0;  // from the dual point alpha_i = -phi'(x_i . w)
  std::size_t iterations = 0;
};

// Accelerated proximal gradient (backtracking, function-value restart) on
//   P(w) = sum_i phi_i(x_i.w) + lambda n g(w) [+ (kappa n/2)||w - y||^2]
// until the duality-gap certificate drops below tol. Throws on the
// iteration cap.
Certificate prox_grad_reference(const Dataset& data, const ShiftedElasticNet& reg,
                                const Loss& loss, double tol,
                                std::size_t max_iter = 400000);

struct SdcaTrajectory {
  // State after each epoch; alpha is in example order.
  std::vector<std::vector<double>> alpha;
  std::vector<Vec> w;
  std::vector<double> primal, dual, gap;
  double gap0 = 0.0;  // before the first epoch
};

// Plain sequential proximal SDCA on the single-machine dual. Visit order and
// update arithmetic mirror a one-worker full-pass round exactly: the shard
// order comes from make_partition(n, 1, seed), each epoch e draws a fresh
// permutation from stream {seed, 0, e}, and the synced direction advances by
// the epoch's accumulated delta.
SdcaTrajectory single_machine_sdca(const Dataset& data, const ShiftedElasticNet& reg,
                                   const Loss& loss, std::size_t epochs,
                                   std::uint64_t seed);

// Full-batch primal and optimal-beta dual at (w, alpha); the brute-force
// evaluation used to cross-check the coordinator's tracked aggregates.
struct GapValues {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
};

GapValues full_gap(const Dataset& data, const ShiftedElasticNet& reg, const Loss& loss,
                   const Vec& w, const std::vector<double>& alpha);

}  // namespace oracle
}  // namespace dualforge

#endif  // DUALFORGE_ORACLE_HPP
