// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Desk-scale default instance: n=2000, d=50, density=0.3, seed=42,
// m=4, sp=0.2 unless a criterion states otherwise.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dualforge/accel.hpp"
#include "dualforge/dadm.hpp"
#include "dualforge/oracle.hpp"
#include "dualforge/rng.hpp"

namespace fs = std::filesystem;
using namespace dualforge;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
};

void expect(Outcome& out, bool cond, const std::string& what) {
  if (!cond) {
    out.pass = false;
    out.detail << (out.detail.str().empty() ? "" : "; ") << what;
  }
}

Dataset default_instance() {
  return gen_synthetic({.n = 2000, .d = 50, .density = 0.3, .seed = 42, .label_noise = 0.1});
}

double shard_ratio(const Partition& part, double sp) {
  double worst = 0.0;
  for (std::size_t l = 0; l < part.workers(); ++l) {
    LocalStepConfig c;
    c.sp = sp;
    const double m_l = static_cast<double>(c.batch_size(part.size_of(l)));
    worst = std::max(worst, static_cast<double>(part.size_of(l)) / m_l);
  }
  return worst;
}

// ---------------------------------------------------------------------------

Outcome criterion1_duality_identities() {
  Outcome out;
  const Dataset data = default_instance();
  const Partition part = make_partition(data.n(), 4, 42);
  RunConfig cfg;
  cfg.sp = 0.2;
  cfg.seed = 42;
  cfg.target_gap = 1e-14;
  cfg.max_rounds = 250;
  cfg.audit_identities = true;
  const RunResult res = run(data, part, elastic_net(1e-3, 1e-5), smooth_hinge_loss(), cfg);
  out.detail << "syncs=" << res.audit.syncs_checked
             << " decomp_rel=" << res.audit.max_decomp_err_rel
             << " beta_sum=" << res.audit.max_beta_sum;
  expect(out, res.audit.syncs_checked >= 250, "expected at least 250 audited syncs");
  expect(out, res.audit.max_decomp_err_rel <= 1e-9, "gap decomposition beyond 1e-9*(1+|P|)");
  expect(out, res.audit.max_beta_sum <= 1e-9, "sum of beta_l not within 1e-9 of zero");
  return out;
}

Outcome criterion2_m1_reduction() {
  Outcome out;
  const Dataset data = default_instance();
  const ShiftedElasticNet reg = elastic_net(1e-3, 1e-5);
  const std::uint64_t seed = 42;
  const std::size_t epochs = 5;

  const Partition part = make_partition(data.n(), 1, seed);
  RunConfig cfg;
  cfg.sp = 1.0;
  cfg.seed = seed;
  cfg.target_gap = 1e-16;
  cfg.max_rounds = epochs;
  cfg.trace_iterates = true;
  const RunResult res = run(data, part, reg, smooth_hinge_loss(), cfg);
  const oracle::SdcaTrajectory traj =
      oracle::single_machine_sdca(data, reg, smooth_hinge_loss(), epochs, seed);

  double worst = 0.0;
  for (std::size_t e = 1; e <= epochs; ++e) {
    for (std::size_t i = 0; i < data.n(); ++i)
      worst = std::max(worst, std::abs(res.alpha_trace[e][i] - traj.alpha[e - 1][i]));
    for (std::size_t j = 0; j < data.dim; ++j)
      worst = std::max(worst, std::abs(res.w_trace[e][j] - traj.w[e - 1][j]));
  }
  out.detail << "max |diff| over 5 epochs = " << worst;
  expect(out, worst <= 1e-12, "m=1 reduction drifted from the sdca oracle");
  return out;
}

Outcome criterion3_dual_monotonicity() {
  Outcome out;
  const Dataset data = default_instance();
  const Partition part = make_partition(data.n(), 4, 42);
  RunConfig cfg;
  cfg.sp = 0.2;
  cfg.seed = 42;
  cfg.target_gap = 1e-14;
  cfg.max_rounds = 200;
  const RunResult res = run(data, part, elastic_net(1e-3, 1e-5), smooth_hinge_loss(), cfg);
  double worst_drop = 0.0;
  for (std::size_t t = 1; t < res.dual_trace.size(); ++t)
    worst_drop = std::min(worst_drop, res.dual_trace[t] - res.dual_trace[t - 1]);
  out.detail << "rounds=" << res.dual_trace.size() - 1 << " worst dual step=" << worst_drop;
  expect(out, res.dual_trace.size() >= 201, "expected 200 rounds of dual values");
  expect(out, worst_drop >= -1e-10, "dual value decreased by more than 1e-10");
  return out;
}

Outcome criterion4_conservative_bound() {
  Outcome out;
  const Dataset data = default_instance();
  const Partition part = make_partition(data.n(), 4, 42);
  const double lambda = 0.05;
  const double gap0 = 0.5 * static_cast<double>(data.n());  // smooth hinge, zero start

  RunConfig cfg;
  cfg.sp = 0.2;
  cfg.seed = 42;
  cfg.mode = LocalMode::kConservativeSmooth;
  cfg.target_gap = 1e-6 * gap0;
  const double bound = smooth_rounds_bound(data.stats.max_squared_norm, 1.0, lambda,
                                           shard_ratio(part, cfg.sp), gap0 / cfg.target_gap);
  cfg.max_rounds = static_cast<std::size_t>(bound);
  const RunResult res = run(data, part, elastic_net(lambda, 1e-5), smooth_hinge_loss(), cfg);
  out.detail << "gap0=" << res.gap0 << " rounds=" << res.rounds << " bound=" << bound;
  expect(out, std::abs(res.gap0 - gap0) <= 1e-9, "measured gap0 is not 0.5 n");
  expect(out, res.reached_target, "conservative run missed 1e-6*gap0 within the bound");
  expect(out, static_cast<double>(res.rounds) <= bound, "rounds exceeded the smooth-case bound");
  return out;
}

Outcome criterion5_optimum_agreement() {
  Outcome out;
  const Dataset data = default_instance();
  const Partition part = make_partition(data.n(), 4, 42);
  for (const Loss& loss : {smooth_hinge_loss(), logistic_loss()}) {
    const ShiftedElasticNet reg = elastic_net(1e-3, 1e-5);
    RunConfig cfg;
    cfg.sp = 0.2;
    cfg.seed = 42;
    cfg.target_gap = 1e-10;  // comfortably inside "gap <= 1e-8"
    cfg.max_rounds = 60000;
    cfg.gap_every = 5;
    const RunResult res = run(data, part, reg, loss, cfg);
    const oracle::Certificate cert = oracle::prox_grad_reference(data, reg, loss, 1e-10);
    const double w_diff = max_abs_diff(res.w, cert.w_star);
    const double p_diff = std::abs(res.primal - cert.primal_at_star);
    out.detail << loss_name(loss) << ": gap=" << res.gap << " |w-w*|=" << w_diff
               << " |P-P*|=" << p_diff << "  ";
    expect(out, res.reached_target, loss_name(loss) + ": did not reach gap 1e-8");
    expect(out, w_diff <= 1e-4, loss_name(loss) + ": w differs from the oracle optimum");
    expect(out, p_diff <= 2e-8, loss_name(loss) + ": P differs from the oracle optimum");
  }
  return out;
}

Outcome criterion6_acceleration_benefit() {
  Outcome out;
  Dataset data =
      gen_synthetic({.n = 2000, .d = 200, .density = 0.3, .seed = 42, .label_noise = 0.1});
  normalize_unit_norm(data);  // R = 1, as in the unit-normalized public datasets
  const Partition part = make_partition(data.n(), 8, 42);
  const ShiftedElasticNet base = elastic_net(1e-7, 1e-5);
  const double target = 1e-3 * static_cast<double>(data.n());

  RunConfig cfg;
  cfg.sp = 1.0;
  cfg.seed = 42;
  cfg.target_gap = target;
  cfg.max_rounds = 300;
  const RunResult plain = run(data, part, base, smooth_hinge_loss(), cfg);
  const std::size_t plain_rounds = plain.reached_target ? plain.rounds : 300;

  AccConfig acfg;
  acfg.inner = cfg;
  acfg.inner.max_rounds = 1000;
  acfg.target_gap = target;
  const AccResult acc = run_acc(data, part, base, smooth_hinge_loss(), acfg);
  out.detail << "acc rounds=" << acc.total_rounds << " (stages=" << acc.stages
             << ") vs dadm rounds=" << plain_rounds
             << (plain.reached_target ? "" : " (capped)");
  expect(out, acc.reached_target, "acc-dadm never reached normalized gap 1e-3");
  expect(out, acc.total_rounds * 2 <= plain_rounds,
         "acc-dadm needed more than half of dadm's rounds");
  return out;
}

Outcome criterion7_smoothing_bound() {
  Outcome out;
  for (double gamma : {1.0, 0.1, 0.01}) {
    const Loss sm = smooth(hinge_loss(), gamma);
    double max_signed = -1e300, max_abs_gap = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const double a = -5.0 + 10.0 * k / 9999.0;
      for (int y : {1, -1}) {
        const double diff = loss_eval(sm, a, y) - loss_eval(hinge_loss(), a, y);
        max_signed = std::max(max_signed, diff);
        max_abs_gap = std::max(max_abs_gap, std::abs(diff));
      }
    }
    out.detail << "gamma=" << gamma << " max(smoothed-hinge)=" << max_signed
               << " max|gap|=" << max_abs_gap << "  ";
    expect(out, max_signed >= 0.0 && max_signed <= gamma / 2.0,
           "max of (smoothed - hinge) outside [0, gamma/2]");
    expect(out, max_abs_gap <= gamma / 2.0 + 1e-12, "smoothing gap above gamma L^2 / 2");
  }
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double a = -5.0 + 10.0 * k / 9999.0;
    for (int y : {1, -1})
      worst = std::max(worst, std::abs(loss_eval(smooth(hinge_loss(), 1.0), a, y) -
                                       loss_eval(smooth_hinge_loss(), a, y)));
  }
  out.detail << "|SmoothedHinge(1)-SmoothHinge|=" << worst;
  expect(out, worst <= 1e-12, "SmoothedHinge(1) differs from the smooth hinge");
  return out;
}

Outcome criterion8_conjugate_oracles() {
  Outcome out;
  const Loss losses[] = {smooth_hinge_loss(), logistic_loss(), hinge_loss(),
                         smoothed_hinge_loss(0.3)};
  Rng rng(4242);

  double worst_conj = 0.0;
  for (const Loss& loss : losses)
    for (double bb : {0.2, 0.5, 0.8}) {
      for (int y : {1, -1}) {
        const double b = y * bb;
        const auto grid = oracle::grid_sup(
            [&](double a) { return -b * a - loss_eval(loss, a, y); }, -2.5, 2.5, 4e-7);
        worst_conj = std::max(worst_conj, std::abs(loss_conj(loss, b, y) - grid.sup));
      }
    }
  expect(out, worst_conj <= 1e-6, "conjugate drifted from the grid-sup oracle");

  double worst_fy = 0.0;
  for (const Loss& loss : losses)
    for (int trial = 0; trial < 1000; ++trial) {
      const int y = rng.uniform() < 0.5 ? 1 : -1;
      const double a = (rng.uniform() - 0.5) * 8.0;
      const double b = y * rng.uniform();
      if (loss_eval(loss, a, y) + loss_conj(loss, b, y) < -a * b - 1e-12) {
        worst_fy = 1.0;
      }
      const double b_eq = -loss_deriv(loss, a, y);
      worst_fy = std::max(
          worst_fy, std::abs(loss_eval(loss, a, y) + loss_conj(loss, b_eq, y) + a * b_eq));
    }
  expect(out, worst_fy <= 1e-8, "Fenchel-Young check failed");

  const ShiftedElasticNet reg = elastic_net(1.0, 0.1);
  double worst_prox = 0.0;
  for (int trial = 0; trial < 12; ++trial) {
    const double u = (rng.uniform() - 0.5) * 4.0;
    const auto grid = oracle::grid_sup(
        [&](double w) { return u * w - (0.5 * w * w + reg.l1_threshold() * std::abs(w)); },
        -3.0, 3.0, 2.5e-7);
    worst_prox = std::max(worst_prox, std::abs(grad_conj(reg, Vec{u})[0] - grid.argmax));
  }
  expect(out, worst_prox <= 1e-6, "grad_conj drifted from the grid argmax");

  double worst_fd = 0.0;
  for (const Loss& loss : losses)
    for (int trial = 0; trial < 400; ++trial) {
      const int y = rng.uniform() < 0.5 ? 1 : -1;
      const double a = (rng.uniform() - 0.5) * 8.0;
      const double z = y * a;
      if (loss.kind != LossKind::kLogistic &&
          (std::abs(z - 1.0) < 1e-3 ||
           std::abs(z - (1.0 - (loss.kind == LossKind::kSmoothedHinge ? loss.gamma : 1.0))) <
               1e-3))
        continue;
      const double h = 1e-6;
      const double fd = (loss_eval(loss, a + h, y) - loss_eval(loss, a - h, y)) / (2 * h);
      worst_fd = std::max(worst_fd, std::abs(loss_deriv(loss, a, y) - fd));
    }
  expect(out, worst_fd <= 1e-5, "analytic derivative drifted from finite differences");

  out.detail << "conj=" << worst_conj << " fy=" << worst_fy << " prox=" << worst_prox
             << " fd=" << worst_fd;
  return out;
}

Outcome criterion9_cli_determinism() {
  Outcome out;
  const char* bin = std::getenv("DUALFORGE_BIN");
  if (bin == nullptr) {
    expect(out, false, "DUALFORGE_BIN not set (run via ctest)");
    return out;
  }
  const fs::path dir =
      fs::temp_directory_path() / ("dualforge_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string dataset = (dir / "default.libsvm").string();
  write_libsvm_file(default_instance(), dataset);

  auto slurp_no_time = [](const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream clean;
    std::string line;
    while (std::getline(in, line)) {
      std::size_t col = 0, start = 0;
      for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
          if (col != 4) clean << line.substr(start, i - start) << ',';
          start = i + 1;
          ++col;
        }
      }
      clean << '\n';
    }
    return clean.str();
  };

  for (int m : {1, 4, 8}) {
    const std::string csv1 = (dir / ("m" + std::to_string(m) + "_a.csv")).string();
    const std::string csv2 = (dir / ("m" + std::to_string(m) + "_b.csv")).string();
    const std::string base = std::string(bin) + " train " + dataset +
                             " --loss smooth-hinge --lambda 1e-3 --mu 1e-5 --sp 0.2 --seed 42"
                             " --target-gap-normalized 1e-4 --max-rounds 60 --m " +
                             std::to_string(m);
    const int rc1 = std::system((base + " --metrics " + csv1 + " >/dev/null 2>&1").c_str());
    const int rc2 = std::system((base + " --metrics " + csv2 + " >/dev/null 2>&1").c_str());
    expect(out, rc1 == 0 && rc2 == 0, "train invocation failed for m=" + std::to_string(m));
    if (rc1 == 0 && rc2 == 0) {
      const bool same = slurp_no_time(csv1) == slurp_no_time(csv2);
      expect(out, same, "CSVs differ beyond time_ms for m=" + std::to_string(m));
      out.detail << "m=" << m << (same ? " identical  " : " DIFFERS  ");
    }
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  return out;
}

Outcome criterion10_schedule_formulas() {
  Outcome out;
  const Schedule s = make_schedule(0.01, 0.08, 1.0, NuMode::kTheory);
  expect(out, s.inv_eta_sq == 17.0, "eta^-2 is not exactly 17");
  expect(out, std::abs(s.nu - (1.0 - s.eta) / (1.0 + s.eta)) <= 1e-12,
         "nu differs from (1-eta)/(1+eta)");

  double xi = s.xi0;
  const double factor = 1.0 - s.eta / 2.0;
  bool recursion_ok = true;
  for (int t = 0; t < 100; ++t) {
    const double prev = xi;
    xi *= factor;
    if (std::abs(xi / prev - factor) > 4e-16 * factor) recursion_ok = false;
  }
  expect(out, recursion_ok, "xi recursion drifted beyond ulp scale");

  Rng rng(1010);
  bool kappa_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.below(32);
    const double R = 0.1 + 100.0 * rng.uniform();
    const double gamma = std::vector<double>{1.0, 4.0, 10.0 / 3.0}[rng.below(3)];
    const std::size_t n = 100 + rng.below(1000000);
    const double lambda = std::pow(10.0, -8.0 * rng.uniform());
    const double expect_value =
        std::max(0.0, static_cast<double>(m) * R / (gamma * static_cast<double>(n)) - lambda);
    if (default_kappa(m, R, gamma, n, lambda) != expect_value) kappa_ok = false;
  }
  expect(out, kappa_ok, "default_kappa drifted from the closed form");
  out.detail << "eta^-2=" << s.inv_eta_sq << " nu=" << s.nu << " xi0=" << s.xi0;
  return out;
}

Outcome criterion11_lipschitz_path() {
  Outcome out;
  const Dataset data = default_instance();
  const Partition part = make_partition(data.n(), 4, 42);
  const double lambda = 0.1;
  const ShiftedElasticNet reg = elastic_net(lambda, 1e-5);
  const double n = static_cast<double>(data.n());

  // (a) plain DADM with exact hinge updates beats the Lipschitz-case bound
  RunConfig cfg;
  cfg.sp = 0.2;
  cfg.seed = 42;
  cfg.target_gap = 1e-2 * n;
  const double gap0 = n;  // hinge at the zero state: phi(0) = 1 per example
  const LipschitzBound bound =
      lipschitz_rounds_bound(data.stats.max_squared_norm, 1.0, lambda,
                             shard_ratio(part, cfg.sp), n, gap0, 1e-2);
  cfg.max_rounds = static_cast<std::size_t>(std::min(bound.T, 20000.0));
  const RunResult plain = run(data, part, reg, hinge_loss(), cfg);
  out.detail << "hinge rounds=" << plain.rounds << " bound=" << bound.T;
  expect(out, plain.reached_target, "hinge run missed normalized gap 1e-2");
  expect(out, static_cast<double>(plain.rounds) <= bound.T, "rounds above the Lipschitz-case bound");

  // (b) smoothed acceleration certified against the smoothed-problem oracle
  const SmoothWrap wrap = smooth_wrap(hinge_loss(), 1e-2, 1.0);
  AccConfig acfg;
  acfg.inner = cfg;
  acfg.inner.max_rounds = 5000;
  acfg.target_gap = wrap.inner_eps_normalized * n;  // eps/2, absolute
  acfg.outer_max = 100000;
  const AccResult acc = run_acc(data, part, reg, wrap.loss, acfg);
  expect(out, acc.reached_target, "smoothed acc-dadm missed its eps/2 target");

  const oracle::Certificate cert = oracle::prox_grad_reference(data, reg, wrap.loss, 1e-6);
  const oracle::GapValues at_acc =
      oracle::full_gap(data, reg, wrap.loss, acc.final_run.w, acc.final_run.alpha);
  const double smoothed_subopt = (at_acc.primal - cert.primal_at_star) / n;
  const double original_bound = smoothed_subopt + wrap.loss.gamma / 2.0;
  out.detail << "  smoothed subopt/n=" << smoothed_subopt
             << " certified original subopt/n<=" << original_bound;
  expect(out, smoothed_subopt <= wrap.inner_eps_normalized + 1e-6,
         "smoothed suboptimality above eps/2");
  expect(out, original_bound <= 1e-2 + 1e-6, "certified original suboptimality above eps");
  return out;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> fn;
    double budget_s;  // 0 = no stated budget
  };
  const Entry entries[] = {
      {1, "gap decomposition and multiplier identities at every sync",
       criterion1_duality_identities, 10},
      {2, "m=1 reduction matches the sdca oracle to 1e-12", criterion2_m1_reduction, 5},
      {3, "dual monotonicity over 200 rounds", criterion3_dual_monotonicity, 0},
      {4, "conservative-smooth linear convergence within the calculated bound",
       criterion4_conservative_bound, 30},
      {5, "optimum agreement against the prox-grad reference", criterion5_optimum_agreement, 0},
      {6, "acceleration reaches 1e-3 in at most half of DADM's rounds",
       criterion6_acceleration_benefit, 120},
      {7, "hinge smoothing bound and gamma=1 equivalence", criterion7_smoothing_bound, 0},
      {8, "conjugate/prox/derivative oracles", criterion8_conjugate_oracles, 0},
      {9, "bitwise-deterministic train CSVs for m in {1,4,8}", criterion9_cli_determinism, 0},
      {10, "schedule and kappa closed forms", criterion10_schedule_formulas, 0},
      {11, "Lipschitz path: hinge bound and smoothed certification",
       criterion11_lipschitz_path, 0},
  };

  int failures = 0;
  for (const Entry& e : entries) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = e.fn();
    } catch (const std::exception& ex) {
      out.pass = false;
      out.detail << "exception: " << ex.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (e.budget_s > 0 && secs > e.budget_s) {
      out.pass = false;
      out.detail << "; runtime " << secs << "s above the " << e.budget_s << "s budget";
    }
    std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << e.id << ": " << e.name
              << "  [" << secs << "s]";
    if (!out.detail.str().empty()) std::cout << "  (" << out.detail.str() << ")";
    std::cout << '\n';
    if (!out.pass) ++failures;
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all 11 criteria passed\n";
  return 0;
}
