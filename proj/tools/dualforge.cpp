// Command-line driver: train / gen / inspect / plot / verify.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dualforge/accel.hpp"
#include "dualforge/dadm.hpp"
#include "dualforge/dataio.hpp"
#include "dualforge/format.hpp"
#include "dualforge/log.hpp"
#include "dualforge/metrics.hpp"
#include "dualforge/oracle.hpp"
#include "dualforge/svgplot.hpp"

namespace df = dualforge;
using nlohmann::json;

namespace {

struct TrainArgs {
  std::string dataset;
  std::string algo = "dadm";
  std::string loss = "smooth-hinge";
  double smooth_gamma = 1.0;       // for --loss smoothed-hinge
  double smooth_eps = 0.0;         // hinge smoothing wrapper (acc-dadm)
  double lambda = 1e-3;
  double mu = 0.0;
  std::size_t m = 1;
  double sp = 1.0;
  std::uint64_t seed = 0;
  double target_gap = -1.0;          // absolute
  double target_gap_norm = 1e-3;     // used when target_gap < 0
  std::size_t max_rounds = 1000;
  std::size_t outer_max = 100000;
  std::size_t inner_max_rounds = 100000;
  std::string kappa = "auto";      // auto | s10 | <number>
  std::string nu = "0";            // 0 | theory | <number>
  std::string mode = "exact";      // exact | conservative-smooth | conservative-lipschitz
  int local_passes = 1;
  std::size_t gap_every = 1;
  bool normalize = false;
  std::size_t dim = 0;
  long long tail_from = -1;
  std::string metrics_out;
  std::string format = "csv";     // csv | jsonl
  std::string model_out;
  std::string manifest_out;
  std::string save_state;
  std::string load_state;
};

json args_to_manifest(const TrainArgs& a) {
  json j;
  j["format_version"] = 1;
  j["dataset"] = a.dataset;
  j["algo"] = a.algo;
  j["loss"] = a.loss;
  j["smooth_gamma"] = a.smooth_gamma;
  j["smooth_eps"] = a.smooth_eps;
  j["lambda"] = a.lambda;
  j["mu"] = a.mu;
  j["m"] = a.m;
  j["sp"] = a.sp;
  j["seed"] = a.seed;
  j["target_gap"] = a.target_gap;
  j["target_gap_normalized"] = a.target_gap_norm;
  j["max_rounds"] = a.max_rounds;
  j["outer_max"] = a.outer_max;
  j["inner_max_rounds"] = a.inner_max_rounds;
  j["kappa"] = a.kappa;
  j["nu"] = a.nu;
  j["mode"] = a.mode;
  j["local_passes"] = a.local_passes;
  j["gap_every"] = a.gap_every;
  j["normalize"] = a.normalize;
  j["dim"] = a.dim;
  j["tail_from"] = a.tail_from;
  return j;
}

void manifest_to_args(const json& j, TrainArgs& a) {
  a.dataset = j.at("dataset").get<std::string>();
  a.algo = j.at("algo").get<std::string>();
  a.loss = j.at("loss").get<std::string>();
  a.smooth_gamma = j.at("smooth_gamma").get<double>();
  a.smooth_eps = j.at("smooth_eps").get<double>();
  a.lambda = j.at("lambda").get<double>();
  a.mu = j.at("mu").get<double>();
  a.m = j.at("m").get<std::size_t>();
  a.sp = j.at("sp").get<double>();
  a.seed = j.at("seed").get<std::uint64_t>();
  a.target_gap = j.at("target_gap").get<double>();
  a.target_gap_norm = j.at("target_gap_normalized").get<double>();
  a.max_rounds = j.at("max_rounds").get<std::size_t>();
  a.outer_max = j.at("outer_max").get<std::size_t>();
  a.inner_max_rounds = j.at("inner_max_rounds").get<std::size_t>();
  a.kappa = j.at("kappa").get<std::string>();
  a.nu = j.at("nu").get<std::string>();
  a.mode = j.at("mode").get<std::string>();
  a.local_passes = j.at("local_passes").get<int>();
  a.gap_every = j.at("gap_every").get<std::size_t>();
  a.normalize = j.at("normalize").get<bool>();
  a.dim = j.at("dim").get<std::size_t>();
  a.tail_from = j.at("tail_from").get<long long>();
}

df::LocalMode parse_mode(const std::string& mode) {
  if (mode == "exact") return df::LocalMode::kExactSequential;
  if (mode == "conservative-smooth") return df::LocalMode::kConservativeSmooth;
  if (mode == "conservative-lipschitz") return df::LocalMode::kConservativeLipschitz;
  throw CLI::ValidationError("--mode", "unknown mode: " + mode);
}

json vec_to_json(const df::Vec& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

df::Vec json_to_vec(const json& arr) {
  df::Vec v;
  v.reserve(arr.size());
  for (const auto& x : arr) v.push_back(x.get<double>());
  return v;
}

int cmd_train(const TrainArgs& args_in) {
  TrainArgs args = args_in;
  df::ParseOptions popts;
  popts.min_dim = args.dim;
  popts.normalize = args.normalize;
  df::Dataset data = df::parse_libsvm_file(args.dataset, popts);
  if (data.n() == 0) throw std::runtime_error("train: dataset is empty");

  df::Loss loss = df::loss_from_name(args.loss, args.smooth_gamma);
  df::ShiftedElasticNet reg = df::elastic_net(args.lambda, args.mu);
  const std::size_t n = data.n();
  double target_abs = args.target_gap > 0 ? args.target_gap
                                          : args.target_gap_norm * static_cast<double>(n);

  df::Partition part = df::make_partition(n, args.m, args.seed);

  df::RunConfig cfg;
  cfg.sp = args.sp;
  cfg.seed = args.seed;
  cfg.max_rounds = args.max_rounds;
  cfg.mode = parse_mode(args.mode);
  cfg.local_passes = args.local_passes;
  cfg.gap_every = args.gap_every;
  if (args.tail_from >= 0) {
    cfg.tail_from = static_cast<std::size_t>(args.tail_from);
    cfg.trace_iterates = true;
  }

  // Warm start from a checkpoint (base coordinates).
  std::optional<df::WarmStart> warm;
  if (!args.load_state.empty()) {
    std::ifstream in(args.load_state);
    if (!in) throw std::runtime_error("cannot open state file: " + args.load_state);
    json ck = json::parse(in);
    if (ck.at("n").get<std::size_t>() != n || ck.at("d").get<std::size_t>() != data.dim)
      throw std::runtime_error("load-state: checkpoint shape does not match dataset");
    if (ck.at("lambda").get<double>() != args.lambda || ck.at("mu").get<double>() != args.mu ||
        ck.at("loss").get<std::string>() != args.loss)
      throw std::runtime_error("load-state: checkpoint problem parameters do not match");
    warm = df::WarmStart{};
    warm->alpha = ck.at("alpha").get<std::vector<double>>();
    warm->u = json_to_vec(ck.at("u"));
  }

  json manifest = args_to_manifest(args);
  manifest["n"] = n;
  manifest["d"] = data.dim;
  manifest["R"] = data.stats.max_squared_norm;
  manifest["target_gap_resolved"] = target_abs;

  std::vector<df::MetricsRow> rows;
  df::Vec w_final;
  std::vector<double> alpha_final;
  double primal = 0, dual = 0, gap = 0;
  std::size_t rounds = 0;
  bool reached = false;

  if (args.algo == "dadm") {
    cfg.target_gap = target_abs;
    const df::RunResult res = df::run(data, part, reg, loss, cfg, warm ? &*warm : nullptr);
    rows = res.trace;
    w_final = res.w;
    alpha_final = res.alpha;
    primal = res.primal;
    dual = res.dual;
    gap = res.gap;
    rounds = res.rounds;
    reached = res.reached_target;
    manifest["kappa_resolved"] = 0.0;
    manifest["nu_resolved"] = 0.0;
    manifest["smoothing_gamma_resolved"] =
        loss.kind == df::LossKind::kSmoothedHinge ? loss.gamma : 0.0;
    if (res.w_tail) {
      manifest["tail_average"] = true;
      w_final = *res.w_tail;  // reported model is the averaged iterate
      alpha_final = *res.alpha_tail;
    }
  } else if (args.algo == "acc-dadm") {
    df::AccConfig acfg;
    acfg.inner = cfg;
    acfg.target_gap = target_abs;
    acfg.outer_max = args.outer_max;
    acfg.inner_max_rounds = args.inner_max_rounds;
    if (args.kappa == "auto") {
      acfg.kappa = -1.0;
    } else if (args.kappa == "s10") {
      acfg.kappa = -1.0;
      acfg.kappa_variant_s10 = true;
    } else {
      acfg.kappa = std::stod(args.kappa);
    }
    if (args.nu == "0") acfg.nu_mode = df::NuMode::kZero;
    else if (args.nu == "theory") acfg.nu_mode = df::NuMode::kTheory;
    else {
      acfg.nu_mode = df::NuMode::kValue;
      acfg.nu_value = std::stod(args.nu);
    }

    if (loss.kind == df::LossKind::kHinge) {
      if (!(args.smooth_eps > 0))
        throw CLI::ValidationError("--smooth-eps",
                                   "acc-dadm with the hinge loss needs --smooth-eps");
      const df::SmoothWrap wrap =
          df::smooth_wrap(loss, args.smooth_eps, df::loss_info(loss).lipschitz);
      loss = wrap.loss;
      acfg.target_gap = wrap.inner_eps_normalized * static_cast<double>(n);
      manifest["smoothed_target_resolved"] = acfg.target_gap;
    }

    const df::AccResult res = df::run_acc(data, part, reg, loss, acfg, warm ? &*warm : nullptr);
    rows = res.trace;
    w_final = res.final_run.w;
    alpha_final = res.final_run.alpha;
    // Report the original-problem certificate.
    const df::oracle::GapValues orig =
        df::oracle::full_gap(data, reg, loss, w_final, alpha_final);
    primal = orig.primal;
    dual = orig.dual;
    gap = orig.gap;
    rounds = res.total_rounds;
    reached = res.reached_target;
    manifest["kappa_resolved"] = res.kappa;
    manifest["nu_resolved"] = res.schedule.nu;
    manifest["eta_resolved"] = res.schedule.eta;
    manifest["stages"] = res.stages;
    manifest["inner_cap_warnings"] = res.inner_cap_warnings;
    manifest["smoothing_gamma_resolved"] =
        loss.kind == df::LossKind::kSmoothedHinge ? loss.gamma : 0.0;
  } else {
    throw CLI::ValidationError("--algo", "unknown algorithm: " + args.algo);
  }

  manifest["rounds_used"] = rounds;
  manifest["reached_target"] = reached;
  manifest["final_primal"] = primal;
  manifest["final_dual"] = dual;
  manifest["final_gap"] = gap;

  if (!args.metrics_out.empty()) {
    std::ofstream out(args.metrics_out);
    if (!out) throw std::runtime_error("cannot open metrics file: " + args.metrics_out);
    if (args.format == "jsonl") df::write_metrics_jsonl(rows, out);
    else df::write_metrics_csv(rows, out);
  }
  if (!args.model_out.empty()) {
    json model;
    model["w"] = vec_to_json(w_final);
    model["primal"] = primal;
    model["dual"] = dual;
    model["gap"] = gap;
    model["loss"] = df::loss_name(loss);
    std::ofstream out(args.model_out);
    if (!out) throw std::runtime_error("cannot open model file: " + args.model_out);
    out << model.dump(2) << '\n';
  }
  if (!args.save_state.empty()) {
    // Checkpoints are stored in base (kappa = 0) coordinates; u is rebuilt
    // from alpha so the file is valid for any later algorithm choice.
    const std::size_t d = data.dim;
    df::Vec u_base(d, 0.0);
    const double lam_n = args.lambda * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const df::Example& ex = data.examples[i];
      if (alpha_final[i] == 0.0) continue;
      for (std::size_t k = 0; k < ex.nnz(); ++k)
        u_base[ex.indices[k]] += ex.values[k] * (alpha_final[i] / lam_n);
    }
    json ck;
    ck["format_version"] = 1;
    ck["n"] = n;
    ck["d"] = d;
    ck["m"] = args.m;
    ck["lambda"] = args.lambda;
    ck["mu"] = args.mu;
    ck["kappa"] = 0.0;
    ck["loss"] = args.loss;
    ck["seed"] = args.seed;
    ck["round"] = rounds;
    ck["alpha"] = alpha_final;
    ck["u"] = vec_to_json(u_base);
    ck["w"] = vec_to_json(df::grad_conj(reg, u_base));
    ck["y"] = vec_to_json(df::Vec(d, 0.0));
    std::ofstream out(args.save_state);
    if (!out) throw std::runtime_error("cannot open state file: " + args.save_state);
    out << ck.dump() << '\n';
  }
  if (!args.manifest_out.empty()) {
    std::ofstream out(args.manifest_out);
    if (!out) throw std::runtime_error("cannot open manifest file: " + args.manifest_out);
    out << manifest.dump(2) << '\n';
  }

  std::cout << manifest.dump(2) << '\n';
  return 0;
}

int cmd_gen(const df::SyntheticSpec& spec, const std::string& out_path) {
  const df::Dataset data = df::gen_synthetic(spec);
  df::write_libsvm_file(data, out_path);
  std::cout << "wrote " << data.n() << " examples, d=" << data.dim
            << ", nnz=" << data.stats.nnz << " to " << out_path << '\n';
  return 0;
}

int cmd_inspect(const std::string& path, std::size_t dim) {
  df::ParseOptions popts;
  popts.min_dim = dim;
  const df::Dataset data = df::parse_libsvm_file(path, popts);
  std::cout << "dataset:  " << path << '\n'
            << "size n:   " << data.n() << '\n'
            << "features: " << data.dim << '\n'
            << "nnz:      " << data.stats.nnz << '\n'
            << "sparsity: " << df::fmt_double(100.0 * data.stats.sparsity) << "%\n"
            << "R:        " << df::fmt_double(data.stats.max_squared_norm) << '\n';
  return 0;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& x_axis,
             const std::string& out_path) {
  std::vector<df::PlotSeries> series;
  for (const std::string& path : csvs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics csv: " + path);
    const std::vector<df::MetricsRow> rows = df::read_metrics_csv(in);
    df::PlotSeries s;
    const std::size_t slash = path.find_last_of('/');
    s.label = slash == std::string::npos ? path : path.substr(slash + 1);
    for (const df::MetricsRow& r : rows) {
      s.x.push_back(x_axis == "time" ? r.time_ms : static_cast<double>(r.comms));
      s.y.push_back(r.gap_normalized);
    }
    series.push_back(std::move(s));
  }
  const std::string svg = df::render_semilogy(
      series, x_axis == "time" ? "time (ms)" : "communications", "normalized duality gap");
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + out_path);
  out << svg;
  return 0;
}

int cmd_verify(const std::string& path, const std::string& loss_name, double lambda,
               double mu, double tol, std::uint64_t seed, std::size_t epochs,
               std::size_t dim) {
  df::ParseOptions popts;
  popts.min_dim = dim;
  const df::Dataset data = df::parse_libsvm_file(path, popts);
  const df::Loss loss = df::loss_from_name(loss_name);
  const df::ShiftedElasticNet reg = df::elastic_net(lambda, mu);

  const df::oracle::Certificate cert = df::oracle::prox_grad_reference(data, reg, loss, tol);
  std::cout << "prox-grad reference: P* = " << df::fmt_double(cert.primal_at_star)
            << " (certified gap " << df::fmt_double(cert.certified_gap) << ", "
            << cert.iterations << " iterations)\n";

  const df::oracle::SdcaTrajectory traj =
      df::oracle::single_machine_sdca(data, reg, loss, epochs, seed);
  std::cout << "sdca after " << epochs << " epochs: P = "
            << df::fmt_double(traj.primal.back())
            << ", gap = " << df::fmt_double(traj.gap.back()) << '\n';
  std::cout << "primal agreement |dP| = "
            << df::fmt_double(std::abs(traj.primal.back() - cert.primal_at_star)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dualforge: distributed dual coordinate optimization"};
  app.require_subcommand(1);

  // --- train ---------------------------------------------------------------
  TrainArgs targs;
  std::string from_manifest;
  auto* train = app.add_subcommand("train", "run DADM or Acc-DADM on a dataset");
  train->add_option("dataset", targs.dataset, "LIBSVM input file");
  train->add_option("--from-manifest", from_manifest,
                    "load every problem parameter from a run manifest");
  train->add_option("--algo", targs.algo, "dadm | acc-dadm");
  train->add_option("--loss", targs.loss, "smooth-hinge | logistic | hinge | smoothed-hinge");
  train->add_option("--smooth-gamma", targs.smooth_gamma, "gamma for --loss smoothed-hinge");
  train->add_option("--smooth-eps", targs.smooth_eps,
                    "hinge smoothing target for acc-dadm (normalized)");
  train->add_option("--lambda", targs.lambda, "l2 regularization weight");
  train->add_option("--mu", targs.mu, "l1 regularization weight");
  train->add_option("--m", targs.m, "number of workers");
  train->add_option("--sp", targs.sp, "mini-batch fraction per round, (0,1]");
  train->add_option("--seed", targs.seed, "base seed");
  train->add_option("--target-gap", targs.target_gap, "absolute duality-gap target");
  train->add_option("--target-gap-normalized", targs.target_gap_norm,
                    "normalized target, used when --target-gap is unset");
  train->add_option("--max-rounds", targs.max_rounds, "round cap (per inner run for acc)");
  train->add_option("--outer-max", targs.outer_max, "acc-dadm stage cap");
  train->add_option("--inner-max-rounds", targs.inner_max_rounds, "acc-dadm per-stage cap");
  train->add_option("--kappa", targs.kappa, "auto | s10 | <value>");
  train->add_option("--nu", targs.nu, "0 | theory | <value>");
  train->add_option("--mode", targs.mode,
                    "exact | conservative-smooth | conservative-lipschitz");
  train->add_option("--local-passes", targs.local_passes, "passes over each mini-batch");
  train->add_option("--gap-every", targs.gap_every, "evaluate the gap every k-th round");
  train->add_flag("--normalize", targs.normalize, "rescale examples to unit l2 norm");
  train->add_option("--dim", targs.dim, "force a minimum feature dimension");
  train->add_option("--tail-from", targs.tail_from, "tail-average output over rounds > T0");
  train->add_option("--metrics", targs.metrics_out, "metrics output path");
  train->add_option("--format", targs.format, "metrics format: csv | jsonl");
  train->add_option("--model-out", targs.model_out, "final model JSON path");
  train->add_option("--manifest-out", targs.manifest_out, "run manifest JSON path");
  train->add_option("--save-state", targs.save_state, "checkpoint JSON path");
  train->add_option("--load-state", targs.load_state, "warm-start checkpoint path");

  // --- gen -------------------------------------------------------------------
  df::SyntheticSpec gspec;
  std::string gen_out = "synthetic.libsvm";
  auto* gen = app.add_subcommand("gen", "generate a synthetic LIBSVM dataset");
  gen->add_option("--n", gspec.n, "examples")->required();
  gen->add_option("--d", gspec.d, "features")->required();
  gen->add_option("--density", gspec.density, "per-entry density, (0,1]");
  gen->add_option("--seed", gspec.seed, "seed");
  gen->add_option("--label-noise", gspec.label_noise, "flip probability, [0,0.5)");
  gen->add_option("--out", gen_out, "output path");

  // --- inspect ----------------------------------------------------------------
  std::string inspect_path;
  std::size_t inspect_dim = 0;
  auto* inspect = app.add_subcommand("inspect", "print dataset statistics");
  inspect->add_option("dataset", inspect_path, "LIBSVM input file")->required();
  inspect->add_option("--dim", inspect_dim, "force a minimum feature dimension");

  // --- plot --------------------------------------------------------------------
  std::vector<std::string> plot_csvs;
  std::string plot_x = "comms";
  std::string plot_out = "plot.svg";
  auto* plot = app.add_subcommand("plot", "render convergence curves to SVG");
  plot->add_option("csv", plot_csvs, "metrics CSV files")->required();
  plot->add_option("--x", plot_x, "x axis: comms | time");
  plot->add_option("--out", plot_out, "output SVG path");

  // --- verify --------------------------------------------------------------------
  std::string verify_path, verify_loss = "smooth-hinge";
  double verify_lambda = 1e-3, verify_mu = 0.0, verify_tol = 1e-8;
  std::uint64_t verify_seed = 0;
  std::size_t verify_epochs = 50, verify_dim = 0;
  auto* verify = app.add_subcommand("verify", "cross-check oracles on a dataset");
  verify->add_option("dataset", verify_path, "LIBSVM input file")->required();
  verify->add_option("--loss", verify_loss, "loss name");
  verify->add_option("--lambda", verify_lambda, "l2 weight");
  verify->add_option("--mu", verify_mu, "l1 weight");
  verify->add_option("--tol", verify_tol, "oracle tolerance");
  verify->add_option("--seed", verify_seed, "seed");
  verify->add_option("--epochs", verify_epochs, "sdca epochs");
  verify->add_option("--dim", verify_dim, "force a minimum feature dimension");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) {
      if (!from_manifest.empty()) {
        std::ifstream in(from_manifest);
        if (!in) throw std::runtime_error("cannot open manifest: " + from_manifest);
        manifest_to_args(json::parse(in), targs);
      } else if (targs.dataset.empty()) {
        throw CLI::ValidationError("dataset", "a dataset path or --from-manifest is required");
      }
      return cmd_train(targs);
    }
    if (gen->parsed()) return cmd_gen(gspec, gen_out);
    if (inspect->parsed()) return cmd_inspect(inspect_path, inspect_dim);
    if (plot->parsed()) return cmd_plot(plot_csvs, plot_x, plot_out);
    if (verify->parsed())
      return cmd_verify(verify_path, verify_loss, verify_lambda, verify_mu, verify_tol,
                        verify_seed, verify_epochs, verify_dim);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
