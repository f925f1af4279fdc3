#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "dualforge/dadm.hpp"
#include "dualforge/oracle.hpp"

using namespace dualforge;

namespace {

Dataset tiny(const std::string& text) {
  std::istringstream in(text);
  return parse_libsvm(in, {});
}

Dataset default_instance(std::size_t n = 200, std::size_t d = 12) {
  return gen_synthetic({.n = n, .d = d, .density = 0.4, .seed = 42, .label_noise = 0.1});
}

Vec u_from_scratch(const Dataset& data, const std::vector<double>& alpha, double lam_n) {
  Vec u(data.dim, 0.0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Example& ex = data.examples[i];
    if (alpha[i] == 0.0) continue;
    for (std::size_t k = 0; k < ex.nnz(); ++k)
      u[ex.indices[k]] += ex.values[k] * (alpha[i] / lam_n);
  }
  return u;
}

}  // namespace

TEST_CASE("round-0 gap of the zero state is half the sample count") {
  const Dataset data = default_instance();
  const Partition part = make_partition(data.n(), 4, 1);
  RunConfig cfg;
  cfg.sp = 0.5;
  cfg.seed = 1;
  cfg.target_gap = 1e-3;
  cfg.max_rounds = 5;
  const RunResult res = run(data, part, elastic_net(1e-3, 1e-5), smooth_hinge_loss(), cfg);
  CHECK(res.gap0 == doctest::Approx(0.5 * data.n()).epsilon(1e-12));
  CHECK(res.trace.front().round == 0);
  CHECK(res.trace.front().gap == res.gap0);
}

TEST_CASE("one-round aggregation folds worker deltas with n_l/n weights") {
  // orthogonal singletons make every local delta explicit:
  // shard 0 owns features 1,2; shard 1 owns features 3,4; with
  // lambda_eff * n_ell = 1 and the hinge loss every alpha moves to 1,
  // so u after the round is exactly (1/2, 1/2, 1/2, 1/2).
  const Dataset data = tiny("1 1:1\n1 2:1\n1 3:1\n1 4:1\n");
  Partition part;
  part.assignments = {{0, 1}, {2, 3}};
  RunConfig cfg;
  cfg.sp = 1.0;
  cfg.seed = 3;
  cfg.target_gap = 1e-12;
  cfg.max_rounds = 1;
  cfg.trace_iterates = true;
  const RunResult res = run(data, part, elastic_net(0.5, 0.0), hinge_loss(), cfg);
  REQUIRE(res.w_trace.size() >= 2);
  CHECK(res.w_trace[1] == Vec{0.5, 0.5, 0.5, 0.5});
  for (double a : res.alpha_trace[1]) CHECK(a == 1.0);
}

TEST_CASE("m = 1 full-pass DADM reproduces the sdca oracle bitwise") {
  const Dataset data = default_instance(120, 10);
  const ShiftedElasticNet reg = elastic_net(0.02, 1e-4);
  const std::uint64_t seed = 11;
  const std::size_t epochs = 5;

  const Partition part = make_partition(data.n(), 1, seed);
  RunConfig cfg;
  cfg.sp = 1.0;
  cfg.seed = seed;
  cfg.target_gap = 1e-14;  // never reached in 5 rounds
  cfg.max_rounds = epochs;
  cfg.trace_iterates = true;
  const RunResult res = run(data, part, reg, smooth_hinge_loss(), cfg);
  const oracle::SdcaTrajectory traj =
      oracle::single_machine_sdca(data, reg, smooth_hinge_loss(), epochs, seed);

  REQUIRE(res.alpha_trace.size() == epochs + 1);
  for (std::size_t e = 1; e <= epochs; ++e) {
    double max_alpha = 0.0, max_w = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i)
      max_alpha = std::max(max_alpha, std::abs(res.alpha_trace[e][i] - traj.alpha[e - 1][i]));
    for (std::size_t j = 0; j < data.dim; ++j)
      max_w = std::max(max_w, std::abs(res.w_trace[e][j] - traj.w[e - 1][j]));
    CHECK(max_alpha == 0.0);  // contract is <= 1e-12; the reduction is exact
    CHECK(max_w == 0.0);
  }
}

TEST_CASE("compute_beta closed form and its invariants") {
  const ShiftedElasticNet reg = elastic_net(0.5, 0.0);
  SyncSnapshot snap;
  snap.v_raw = {Vec{1.0, 0.0}, Vec{0.0, 1.0}};
  snap.n_ell = {2, 2};
  snap.v_raw_global = Vec{0.5, 0.5};
  snap.u = snap.v_raw_global;
  snap.w = snap.u;
  snap.loss_sums = {0.0, 0.0};
  snap.conj_sums = {0.0, 0.0};

  const std::vector<Vec> beta = compute_beta(snap, reg);
  CHECK(beta[0] == Vec{0.5, -0.5});
  CHECK(beta[1] == Vec{-0.5, 0.5});
  Vec sum(2, 0.0);
  for (const Vec& b : beta) add_scaled(sum, 1.0, b);
  CHECK(max_abs(sum) <= 1e-15);

  // m = 1 and identical v_raw both give zero multipliers
  SyncSnapshot one = snap;
  one.v_raw = {Vec{1.0, 0.0}};
  one.n_ell = {4};
  one.v_raw_global = Vec{1.0, 0.0};
  CHECK(max_abs(compute_beta(one, reg)[0]) == 0.0);

  SyncSnapshot same = snap;
  same.v_raw = {Vec{0.3, 0.7}, Vec{0.3, 0.7}};
  same.v_raw_global = Vec{0.3, 0.7};
  for (const Vec& b : compute_beta(same, reg)) CHECK(max_abs(b) == 0.0);
}

TEST_CASE("duality gap decomposes into local gaps at the closed-form beta") {
  const Dataset data = default_instance(80, 8);
  const ShiftedElasticNet reg = elastic_net(0.05, 1e-3);
  const Loss loss = smooth_hinge_loss();
  const Partition part = make_partition(data.n(), 3, 5);

  // a synthetic post-sync state: random feasible alpha
  Rng rng(9);
  std::vector<double> alpha(data.n());
  for (std::size_t i = 0; i < data.n(); ++i)
    alpha[i] = data.examples[i].label * rng.uniform();

  SyncSnapshot snap;
  snap.n_ell.resize(part.workers());
  snap.v_raw.assign(part.workers(), Vec(data.dim, 0.0));
  snap.loss_sums.assign(part.workers(), 0.0);
  snap.conj_sums.assign(part.workers(), 0.0);
  snap.v_raw_global.assign(data.dim, 0.0);
  for (std::size_t l = 0; l < part.workers(); ++l) {
    snap.n_ell[l] = part.size_of(l);
    const double lam_nl = reg.lambda_eff * static_cast<double>(snap.n_ell[l]);
    for (std::uint32_t i : part.assignments[l]) {
      const Example& ex = data.examples[i];
      snap.conj_sums[l] += loss_conj(loss, alpha[i], ex.label);
      for (std::size_t k = 0; k < ex.nnz(); ++k)
        snap.v_raw[l][ex.indices[k]] += ex.values[k] * (alpha[i] / lam_nl);
    }
    add_scaled(snap.v_raw_global,
               static_cast<double>(snap.n_ell[l]) / static_cast<double>(data.n()),
               snap.v_raw[l]);
  }
  snap.u = snap.v_raw_global;
  snap.w = grad_conj(reg, snap.u);
  for (std::size_t l = 0; l < part.workers(); ++l)
    for (std::uint32_t i : part.assignments[l])
      snap.loss_sums[l] +=
          loss_eval(loss, sparse_dot(data.examples[i], snap.w), data.examples[i].label);

  const GapReport rep = duality_gap(snap, reg, data.n());
  CHECK(rep.gap >= 0.0);
  double local_total = 0.0;
  for (double g : rep.local_gaps) local_total += g;
  CHECK(std::abs(rep.gap - local_total) <= 1e-9 * (1.0 + std::abs(rep.primal)));

  // and the global values agree with the brute-force evaluation
  const oracle::GapValues direct = oracle::full_gap(data, reg, loss, snap.w, alpha);
  CHECK(rep.primal == doctest::Approx(direct.primal).epsilon(1e-12));
  CHECK(rep.dual == doctest::Approx(direct.dual).epsilon(1e-12));
}

TEST_CASE("a run audit holds the identities at every sync") {
  const Dataset data = default_instance();
  const Partition part = make_partition(data.n(), 4, 7);
  RunConfig cfg;
  cfg.sp = 0.3;
  cfg.seed = 7;
  cfg.target_gap = 1e-6;
  cfg.max_rounds = 60;
  cfg.audit_identities = true;
  const RunResult res = run(data, part, elastic_net(1e-3, 1e-5), smooth_hinge_loss(), cfg);
  CHECK(res.audit.syncs_checked >= 60);
  CHECK(res.audit.max_decomp_err <= 1e-9 * (1.0 + std::abs(res.primal)));
  CHECK(res.audit.max_beta_sum <= 1e-9);
}

TEST_CASE("dual values never decrease across rounds") {
  const Dataset data = default_instance();
  const Partition part = make_partition(data.n(), 4, 2);
  RunConfig cfg;
  cfg.sp = 0.25;
  cfg.seed = 2;
  cfg.target_gap = 1e-12;
  cfg.max_rounds = 80;
  const RunResult res = run(data, part, elastic_net(1e-3, 1e-5), smooth_hinge_loss(), cfg);
  REQUIRE(res.dual_trace.size() >= 80);
  for (std::size_t t = 1; t < res.dual_trace.size(); ++t)
    CHECK(res.dual_trace[t] >= res.dual_trace[t - 1] - 1e-10);
}

TEST_CASE("identical configurations reproduce the trace bitwise") {
  const Dataset data = default_instance(150, 10);
  const Partition part = make_partition(data.n(), 3, 21);
  RunConfig cfg;
  cfg.sp = 0.4;
  cfg.seed = 21;
  cfg.target_gap = 1e-8;
  cfg.max_rounds = 40;
  const RunResult a = run(data, part, elastic_net(5e-3, 1e-5), smooth_hinge_loss(), cfg);
  const RunResult b = run(data, part, elastic_net(5e-3, 1e-5), smooth_hinge_loss(), cfg);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].primal == b.trace[i].primal);
    CHECK(a.trace[i].dual == b.trace[i].dual);
    CHECK(a.trace[i].gap == b.trace[i].gap);
  }
  CHECK(a.alpha == b.alpha);
  CHECK(a.w == b.w);
}

TEST_CASE("returned state is self-consistent and dual-feasible") {
  const Dataset data = default_instance(100, 9);
  const ShiftedElasticNet reg = elastic_net(0.01, 1e-4);
  const Partition part = make_partition(data.n(), 4, 3);
  RunConfig cfg;
  cfg.sp = 0.5;
  cfg.seed = 3;
  cfg.target_gap = 1e-5;
  cfg.max_rounds = 2000;
  const RunResult res = run(data, part, reg, smooth_hinge_loss(), cfg);
  CHECK(res.reached_target);
  CHECK(res.gap == doctest::Approx(res.primal - res.dual).epsilon(1e-12));
  CHECK(res.gap <= 1e-5);
  CHECK(res.w == grad_conj(reg, res.u));

  const Vec scratch =
      u_from_scratch(data, res.alpha, reg.lambda_eff * static_cast<double>(data.n()));
  CHECK(max_abs_diff(res.u, scratch) <= 1e-8);

  const oracle::GapValues direct =
      oracle::full_gap(data, reg, smooth_hinge_loss(), res.w, res.alpha);
  CHECK(direct.gap == doctest::Approx(res.gap).epsilon(1e-9));

  // the returned alpha warm-starts a continuation run at the same gap
  WarmStart warm{res.alpha, res.u};
  RunConfig cont = cfg;
  cont.target_gap = res.gap * 1.0000001;
  const RunResult res2 = run(data, part, reg, smooth_hinge_loss(), cont, &warm);
  CHECK(res2.rounds == 0);
  CHECK(res2.comm.rounds == 0);  // certified without any communication
  CHECK(res2.gap == doctest::Approx(res.gap).epsilon(1e-12));
}

TEST_CASE("warm starts are validated") {
  const Dataset data = default_instance(50, 6);
  const ShiftedElasticNet reg = elastic_net(0.1, 0.0);
  const Partition part = make_partition(data.n(), 2, 1);
  RunConfig cfg;
  cfg.target_gap = 1e-3;
  cfg.max_rounds = 5;

  WarmStart bad_u{std::vector<double>(data.n(), 0.0), Vec(data.dim, 1.0)};
  CHECK_THROWS_AS(run(data, part, reg, smooth_hinge_loss(), cfg, &bad_u),
                  std::invalid_argument);

  WarmStart bad_alpha{std::vector<double>(data.n(), 5.0), Vec(data.dim, 0.0)};
  CHECK_THROWS_AS(run(data, part, reg, smooth_hinge_loss(), cfg, &bad_alpha),
                  std::domain_error);
}

TEST_CASE("gap_every certifies only every k-th sync") {
  const Dataset data = default_instance(80, 8);
  const Partition part = make_partition(data.n(), 2, 9);
  RunConfig cfg;
  cfg.sp = 0.5;
  cfg.seed = 9;
  cfg.target_gap = 1e-12;
  cfg.max_rounds = 12;
  cfg.gap_every = 4;
  const RunResult res = run(data, part, elastic_net(1e-2, 0.0), smooth_hinge_loss(), cfg);
  REQUIRE(res.trace.size() == 4);  // rounds 0, 4, 8, 12
  CHECK(res.trace[1].round == 4);
  CHECK(res.trace[3].round == 12);
}

TEST_CASE("theory bound calculators reproduce the worked values") {
  CHECK(smooth_rounds_bound(1.0, 1.0, 0.1, 10.0, std::exp(1.0)) == 80.0);

  const LipschitzBound b = lipschitz_rounds_bound(1.0, 1.0, 1.0, 10.0, 100.0,
                                                  /*dual0=*/100.0 / (2.0 * 10.0) * 4.0,
                                                  /*eps=*/0.1);
  // t0 = max(0, ceil(ntilde log(2 lambda ntilde dual0 / (n G)))) with the
  // dual0 above chosen so the log argument is exactly 1
  CHECK(b.t0 == 0.0);
  CHECK(b.T0 == 140.0);
  CHECK(b.T == 180.0);

  CHECK(acc_outer_bound(0.01, 0.08, 100.0, 1.0) == 63.0);
  CHECK(acc_inner_bound(1.0, 1.0, 0.01, 0.08, 5.0) > 0.0);
  CHECK_THROWS_AS(smooth_rounds_bound(-1.0, 1.0, 0.1, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("tail averaging over rounds past T0") {
  const std::vector<Vec> constant = {{2.0}, {2.0}, {2.0}};
  CHECK(tail_average(constant, 0) == Vec{2.0});

  const std::vector<Vec> pair = {{9.0}, {0.0}, {2.0}};  // rounds 0,1,2; T0=0 -> mean(1,2)
  CHECK(tail_average(pair, 0) == Vec{1.0});
  CHECK(tail_average(pair, 1) == Vec{2.0});  // T0 = rounds-1 -> last iterate
  CHECK_THROWS_AS(tail_average(pair, 2), std::invalid_argument);

  // through a run
  const Dataset data = default_instance(60, 6);
  const Partition part = make_partition(data.n(), 2, 4);
  RunConfig cfg;
  cfg.sp = 1.0;
  cfg.seed = 4;
  cfg.target_gap = 1e-12;
  cfg.max_rounds = 6;
  cfg.trace_iterates = true;
  cfg.tail_from = 3;
  const RunResult res = run(data, part, elastic_net(0.05, 0.0), smooth_hinge_loss(), cfg);
  REQUIRE(res.w_tail.has_value());
  Vec mean(data.dim, 0.0);
  for (std::size_t t = 4; t < res.w_trace.size(); ++t) add_scaled(mean, 1.0, res.w_trace[t]);
  for (double& v : mean) v /= static_cast<double>(res.w_trace.size() - 4);
  CHECK(*res.w_tail == mean);
}

TEST_CASE("conservative-smooth runs converge linearly in the dual") {
  const Dataset data = default_instance(100, 8);
  const Partition part = make_partition(data.n(), 2, 6);
  RunConfig cfg;
  cfg.sp = 0.5;
  cfg.seed = 6;
  cfg.mode = LocalMode::kConservativeSmooth;
  cfg.target_gap = 1e-12;
  cfg.max_rounds = 400;
  const RunResult res = run(data, part, elastic_net(0.1, 0.0), smooth_hinge_loss(), cfg);
  // log-gap must trend down: compare the first and last certified gaps
  CHECK(res.trace.back().gap < 0.05 * res.trace.front().gap);
  for (std::size_t t = 1; t < res.dual_trace.size(); ++t)
    CHECK(res.dual_trace[t] >= res.dual_trace[t - 1] - 1e-10);
}

TEST_CASE("conservative-lipschitz mode with tail averaging makes progress") {
  const Dataset data = default_instance(120, 8);
  const Partition part = make_partition(data.n(), 3, 12);
  RunConfig cfg;
  cfg.sp = 0.4;
  cfg.seed = 12;
  cfg.mode = LocalMode::kConservativeLipschitz;
  cfg.target_gap = 1e-12;
  cfg.max_rounds = 300;
  cfg.trace_iterates = true;
  cfg.tail_from = 150;
  const RunResult res = run(data, part, elastic_net(0.2, 1e-4), hinge_loss(), cfg);
  // no per-round monotonicity for the fractional Lipschitz step, but the
  // certified gap must come down substantially
  CHECK(res.trace.back().gap < 0.2 * res.trace.front().gap);
  REQUIRE(res.w_tail.has_value());
  // the averaged tail competes with the last iterate on the certified gap
  const oracle::GapValues tail_gap =
      oracle::full_gap(data, elastic_net(0.2, 1e-4), hinge_loss(), *res.w_tail,
                       *res.alpha_tail);
  CHECK(tail_gap.gap < 0.3 * res.trace.front().gap);
  CHECK(tail_gap.gap >= 0.0);
}

TEST_CASE("zero-norm examples flow through a full run") {
  Dataset data = default_instance(60, 6);
  data.examples[7].indices.clear();   // make one example empty
  data.examples[7].values.clear();
  data.examples[7].squared_norm = 0.0;
  data.stats = compute_stats(data);
  const Partition part = make_partition(data.n(), 2, 3);
  RunConfig cfg;
  cfg.sp = 1.0;
  cfg.seed = 3;
  cfg.target_gap = 1e-6;
  cfg.max_rounds = 2000;
  const RunResult res = run(data, part, elastic_net(0.05, 0.0), smooth_hinge_loss(), cfg);
  CHECK(res.reached_target);
  // the empty example's dual sits at the unconstrained conjugate maximizer
  const int y7 = data.examples[7].label;
  CHECK(res.alpha[7] == doctest::Approx(static_cast<double>(y7)).epsilon(1e-9));
}

TEST_CASE("extra local passes keep the dual monotone and speed up rounds") {
  const Dataset data = default_instance(100, 8);
  const Partition part = make_partition(data.n(), 2, 5);
  RunConfig cfg;
  cfg.sp = 0.3;
  cfg.seed = 5;
  cfg.target_gap = 1e-4;
  cfg.max_rounds = 4000;
  const RunResult one = run(data, part, elastic_net(5e-3, 1e-5), smooth_hinge_loss(), cfg);
  cfg.local_passes = 4;
  const RunResult four = run(data, part, elastic_net(5e-3, 1e-5), smooth_hinge_loss(), cfg);
  CHECK(four.reached_target);
  CHECK(four.rounds <= one.rounds);
  for (std::size_t t = 1; t < four.dual_trace.size(); ++t)
    CHECK(four.dual_trace[t] >= four.dual_trace[t - 1] - 1e-10);
}

TEST_CASE("a forced feature dimension rides through training") {
  std::istringstream in("1 1:1\n-1 2:1\n1 1:0.5 2:-0.5\n-1 1:-1\n");
  const Dataset data = parse_libsvm(in, ParseOptions{.min_dim = 6});
  REQUIRE(data.dim == 6);
  const Partition part = make_partition(data.n(), 2, 1);
  RunConfig cfg;
  cfg.target_gap = 1e-8;
  cfg.max_rounds = 4000;
  cfg.seed = 1;
  const RunResult res = run(data, part, elastic_net(0.1, 0.0), smooth_hinge_loss(), cfg);
  CHECK(res.reached_target);
  CHECK(res.w.size() == 6);
  for (std::size_t j = 2; j < 6; ++j) CHECK(res.w[j] == 0.0);  // untouched features
}
