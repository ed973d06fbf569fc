// Experiment runner: wires configs to the sampler, trainer, and metrics, and
// writes self-describing run directories.

#include <CLI11.hpp>

#include <nets/config.hpp>
#include <nets/metrics.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace nets;

namespace {

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

fs::path prepare_run_dir(const std::string& out) {
  const fs::path dir(out);
  if (fs::exists(dir / ".complete"))
    throw std::runtime_error("output directory '" + out +
                             "' holds a completed run; pick a fresh one");
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out.good())
    throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

void finalize_run_dir(const fs::path& dir, const WallClock& clock) {
  // Wall time lives in a sidecar so the primary outputs stay byte-identical
  // across reruns of the same seed.
  json timing;
  timing["wall_seconds"] = clock.seconds();
  write_text(dir / "timing.json", timing.dump(2) + "\n");
  write_text(dir / ".complete", "");
}

ExperimentConfig load_with_flags(const std::string& config_path,
                                 const std::vector<std::string>& overrides,
                                 long long seed_flag) {
  std::ifstream in(config_path);
  check(in.good(), "config: cannot open '" + config_path + "'");
  json tree = json::parse(in);
  for (const auto& ov : overrides) apply_override(tree, ov);
  if (seed_flag >= 0) tree["seed"] = static_cast<std::uint64_t>(seed_flag);
  return parse_experiment(std::move(tree));
}

json report_to_json(const MetricReport& rep,
                    const std::vector<int>& resample_steps) {
  json out;
  out["terminal_ess"] = rep.terminal_ess;
  out["log_z"] = rep.log_z;
  out["log_z_se"] = rep.log_z_se;
  json curve = json::array();
  for (const auto& [t, e] : rep.ess_trajectory) curve.push_back({t, e});
  out["ess_trajectory"] = std::move(curve);
  out["resample_steps"] = resample_steps;
  if (rep.w2) out["w2"] = *rep.w2;
  if (rep.mmd) out["mmd"] = *rep.mmd;
  if (rep.kl_bound) out["kl_bound"] = *rep.kl_bound;
  return out;
}

// Equal-weight field sample from a weighted terminal ensemble: systematic
// resampling followed by a stride so the subset is spread across the pool.
Mat resampled_subset(const WalkerEnsemble& ensemble, Eigen::Index m,
                     std::uint64_t seed) {
  WalkerEnsemble copy = ensemble;
  RngStream rng(seed, stream::kResample, 777);
  systematic_resample(copy, rng);
  const Eigen::Index n = copy.x.cols();
  m = std::min(m, n);
  Mat out(copy.x.rows(), m);
  for (Eigen::Index i = 0; i < m; ++i) out.col(i) = copy.x.col(i * n / m);
  return out;
}

void attach_distance_metrics(MetricReport& rep, const ExperimentConfig& cfg,
                             const std::shared_ptr<const TimePotential>& u,
                             const SamplerResult& run,
                             const EvalConfig& eval) {
  const bool want_w2 =
      std::count(eval.metrics.begin(), eval.metrics.end(), "w2") > 0;
  const bool want_mmd =
      std::count(eval.metrics.begin(), eval.metrics.end(), "mmd") > 0;
  if (!want_w2 && !want_mmd) return;
  if (!u->has_exact_sampler()) {
    std::cerr << "note: distance metrics skipped (no exact reference sampler)"
              << std::endl;
    return;
  }
  const Eigen::Index m =
      std::min<Eigen::Index>(eval.metric_samples, run.ensemble.x.cols());
  const Mat got = resampled_subset(run.ensemble, m, cfg.seed);
  RngStream rng(cfg.seed, stream::kOracle, 2);
  const Mat ref = u->sample_exact(run.ensemble.t, got.cols(), rng);
  if (want_w2) rep.w2 = w2_distance(got, ref);
  if (want_mmd) rep.mmd = mmd_rbf(got, ref);
}

int cmd_validate(const std::string& config_path,
                 const std::vector<std::string>& overrides,
                 long long seed_flag) {
  const ExperimentConfig cfg =
      load_with_flags(config_path, overrides, seed_flag);
  const auto u = potential_from_json(cfg.potential, cfg.seed);
  std::cout << "config ok: potential="
            << cfg.potential.at("kind").get<std::string>()
            << " dim=" << u->dim() << " seed=" << cfg.seed << std::endl;
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out,
              const std::vector<std::string>& overrides, long long seed_flag) {
  const WallClock clock;
  const ExperimentConfig cfg =
      load_with_flags(config_path, overrides, seed_flag);
  const fs::path dir = prepare_run_dir(out);
  write_text(dir / "resolved_config.json", cfg.raw.dump(2) + "\n");

  const auto u = potential_from_json(cfg.potential, cfg.seed);
  const TrainConfig tc = train_config_from_json(cfg.train, cfg.seed);
  Trainer trainer(u, tc);

  std::ofstream log(dir / "train_log.jsonl");
  check(log.good(), "cannot write training log");
  TrainRow row;
  for (int iter = 0; iter < tc.iters; ++iter) {
    row = trainer.step(iter);
    log << to_json(row).dump() << "\n";
    if (!std::isfinite(row.loss))
      throw std::runtime_error(
          "training diverged: non-finite loss at iter " +
          std::to_string(iter) + " (ess=" + std::to_string(row.ess) +
          ", horizon=" + std::to_string(row.t_end) + ")");
  }
  log.close();
  save_checkpoint((dir / "checkpoint.json").string(), trainer.checkpoint());

  // Quick held-out evaluation so the run reports sampling quality, not just
  // the final loss.
  const EvalConfig eval = eval_config_from_json(cfg.eval);
  SamplerOptions opt = sampler_options_from_json(cfg.integrator, cfg.seed);
  const SamplerResult run = run_sampler(*u, trainer.model(), eval.walkers, opt);
  MetricReport rep = make_report(run);
  attach_distance_metrics(rep, cfg, u, run, eval);
  if (trainer.config().objective == Objective::kPinn)
    rep.kl_bound = kl_bound_estimate(std::max(0.0, row.loss));
  validate(rep);

  json summary = report_to_json(rep, run.resample_steps);
  summary["final_loss"] = row.loss;
  summary["iters"] = tc.iters;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  finalize_run_dir(dir, clock);
  std::cout << "train done: final_loss=" << row.loss
            << " terminal_ess=" << rep.terminal_ess << " log_z=" << rep.log_z
            << " -> " << dir.string() << std::endl;
  return 0;
}

int cmd_sample(const std::string& config_path, const std::string& out,
               const std::string& checkpoint_path,
               const std::vector<std::string>& overrides, long long seed_flag,
               double eps_flag, int steps_flag) {
  const WallClock clock;
  const ExperimentConfig cfg =
      load_with_flags(config_path, overrides, seed_flag);
  const fs::path dir = prepare_run_dir(out);
  write_text(dir / "resolved_config.json", cfg.raw.dump(2) + "\n");

  const auto u = potential_from_json(cfg.potential, cfg.seed);
  std::unique_ptr<DriftModel> drift;
  if (!checkpoint_path.empty()) {
    drift = drift_from_checkpoint(load_checkpoint(checkpoint_path));
    check(drift->dim() == u->dim(),
          "checkpoint dimension " + std::to_string(drift->dim()) +
              " does not match potential dimension " +
              std::to_string(u->dim()));
  } else {
    drift = drift_from_json(cfg.drift, u);
  }

  SamplerOptions opt = sampler_options_from_json(cfg.integrator, cfg.seed);
  if (eps_flag >= 0.0) opt.eps = DiffusionSchedule::constant(eps_flag);
  if (steps_flag > 0) opt.steps = steps_flag;
  const EvalConfig eval = eval_config_from_json(cfg.eval);

  const SamplerResult run = run_sampler(*u, *drift, eval.walkers, opt);
  MetricReport rep = make_report(run);
  attach_distance_metrics(rep, cfg, u, run, eval);
  validate(rep);

  save_ensemble((dir / "ensemble.bin").string(), run.ensemble);
  write_ensemble_csv((dir / "ensemble.csv").string(), run.ensemble);
  write_text(dir / "report.json",
             report_to_json(rep, run.resample_steps).dump(2) + "\n");
  write_text(dir / "metrics.csv",
             metrics_csv_header() + "\n" +
                 metrics_csv_row("sample", static_cast<int>(eval.walkers),
                                 opt.steps, rep) +
                 "\n");
  finalize_run_dir(dir, clock);
  std::cout << "sample done: terminal_ess=" << rep.terminal_ess
            << " log_z=" << rep.log_z << " +- " << rep.log_z_se << " -> "
            << dir.string() << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// Benchmark suites
// ---------------------------------------------------------------------------

struct BenchRow {
  std::string name;
  json config;              // experiment tree for this row
  std::string checkpoint;   // trained checkpoint path, empty for baselines
};

void append_benchmark_row(std::ostream& csv, const fs::path& dir,
                          const BenchRow& row) {
  ExperimentConfig cfg = parse_experiment(row.config);
  const auto u = potential_from_json(cfg.potential, cfg.seed);
  std::unique_ptr<DriftModel> drift;
  if (!row.checkpoint.empty())
    drift = drift_from_checkpoint(load_checkpoint(row.checkpoint));
  else
    drift = drift_from_json(cfg.drift, u);

  const SamplerOptions opt = sampler_options_from_json(cfg.integrator, cfg.seed);
  const EvalConfig eval = eval_config_from_json(cfg.eval);
  const SamplerResult run = run_sampler(*u, *drift, eval.walkers, opt);
  MetricReport rep = make_report(run);
  attach_distance_metrics(rep, cfg, u, run, eval);
  validate(rep);

  csv << metrics_csv_row(row.name, static_cast<int>(eval.walkers), opt.steps,
                         rep)
      << "\n";
  write_text(dir / (row.name + "_report.json"),
             report_to_json(rep, run.resample_steps).dump(2) + "\n");
  std::cout << "  " << row.name << ": ess=" << rep.terminal_ess
            << " log_z=" << rep.log_z << std::endl;
}

// Train a drift for one benchmark row and return the checkpoint path.
std::string train_for_benchmark(const fs::path& dir, const std::string& name,
                                const json& tree) {
  const ExperimentConfig cfg = parse_experiment(tree);
  const auto u = potential_from_json(cfg.potential, cfg.seed);
  const TrainConfig tc = train_config_from_json(cfg.train, cfg.seed);
  Trainer trainer(u, tc);
  std::ofstream log(dir / (name + "_train_log.jsonl"));
  for (int iter = 0; iter < tc.iters; ++iter) {
    const TrainRow row = trainer.step(iter);
    log << to_json(row).dump() << "\n";
    if (!std::isfinite(row.loss))
      throw std::runtime_error("benchmark training diverged in " + name);
  }
  const std::string path = (dir / (name + "_checkpoint.json")).string();
  save_checkpoint(path, trainer.checkpoint());
  return path;
}

json base_tree(std::uint64_t seed, json potential, json integrator,
               json eval) {
  json tree;
  tree["seed"] = seed;
  tree["potential"] = std::move(potential);
  tree["integrator"] = std::move(integrator);
  tree["eval"] = std::move(eval);
  return tree;
}

int cmd_benchmark(const std::string& suite, const std::string& out,
                  long long seed_flag) {
  const WallClock clock;
  const std::uint64_t seed = seed_flag >= 0 ? seed_flag : 0;
  const fs::path dir = prepare_run_dir(out);
  std::ofstream csv(dir / "results.csv");
  csv << metrics_csv_header() << "\n";
  std::cout << "benchmark suite '" << suite << "'" << std::endl;

  if (suite == "gmm" || suite == "funnel" || suite == "mos") {
    json potential, train;
    if (suite == "gmm") {
      potential = {{"kind", "gmm"}, {"modes", 8}, {"radius", 10.0},
                   {"sigma", 1.0}, {"base_sigma", 4.0}};
      train = {{"kind", "vector"}, {"objective", "pinn"},
               {"dt_free_energy", "analytic"}, {"hidden", {48, 48}},
               {"iters", 800}, {"walkers", 192}, {"slices", 24},
               {"eps", 1.0}, {"lr", 2e-3}, {"t_end_start", 0.2},
               {"t_ramp_iters", 300}};
    } else if (suite == "funnel") {
      potential = {{"kind", "funnel"}, {"dim", 10}, {"sigma", 3.0}};
      train = {{"kind", "vector"}, {"objective", "pinn"},
               {"dt_free_energy", "analytic"}, {"hidden", {48, 48}},
               {"iters", 600}, {"walkers", 192}, {"slices", 24},
               {"eps", 1.0}, {"lr", 2e-3}};
    } else {
      potential = {{"kind", "student_t_mixture"}, {"dim", 50}, {"modes", 10},
                   {"nu", 2}, {"loc_scale", 10.0}};
      train = {{"kind", "vector"}, {"objective", "pinn"},
               {"dt_free_energy", "analytic"}, {"hidden", {64, 64}},
               {"iters", 600}, {"walkers", 128}, {"slices", 20},
               {"eps", 1.0}, {"lr", 2e-3}};
    }
    const json eval = {{"walkers", 2000}, {"metric_samples", 1000},
                       {"metrics", {"w2", "mmd"}}};
    const json ais_integrator = {{"scheme", "discrete"}, {"steps", 300},
                                 {"eps", 1.0}};

    json tree = base_tree(seed, potential, ais_integrator, eval);
    append_benchmark_row(csv, dir, {"ais", tree, ""});

    json train_tree = tree;
    train_tree["train"] = train;
    const std::string ckpt =
        train_for_benchmark(dir, "nets-pinn", train_tree);

    json eps0 = tree;
    eps0["integrator"] = {{"scheme", "overdamped"}, {"steps", 300},
                          {"eps", 0.0}};
    append_benchmark_row(csv, dir, {"nets-pinn-eps0", eps0, ckpt});

    json eps4 = tree;
    eps4["integrator"] = {{"scheme", "discrete"}, {"steps", 1200},
                          {"eps", 4.0}};
    append_benchmark_row(csv, dir, {"nets-pinn-eps4", eps4, ckpt});
  } else if (suite == "phi4-free" || suite == "phi4-critical") {
    const bool critical = suite == "phi4-critical";
    json potential;
    if (critical)
      potential = {{"kind", "phi4"}, {"extent", 16}, {"dims", 2},
                   {"m2_initial", 1.0}, {"m2_final", -1.0},
                   {"lambda_final", 0.8}};
    else
      potential = {{"kind", "phi4"}, {"extent", 4}, {"dims", 2},
                   {"m2_initial", 1.0}, {"m2_final", 0.5},
                   {"lambda_final", 0.0}};
    const json eval = {{"walkers", critical ? 512 : 2000}};
    const json integrator = {{"scheme", "discrete"},
                             {"steps", critical ? 500 : 300},
                             {"eps", 1.0}};
    json tree = base_tree(seed, potential, integrator, eval);
    append_benchmark_row(csv, dir, {"ais", tree, ""});

    if (critical) {
      json train_tree = tree;
      train_tree["train"] = {{"kind", "vector"}, {"objective", "pinn"},
                             {"dt_free_energy", "empirical"},
                             {"divergence", "probe"}, {"probes", 4},
                             {"hidden", {64}}, {"iters", 300},
                             {"walkers", 96}, {"slices", 12}, {"eps", 1.0},
                             {"lr", 2e-3}};
      const std::string ckpt =
          train_for_benchmark(dir, "nets-pinn", train_tree);
      append_benchmark_row(csv, dir, {"nets-pinn", tree, ckpt});
    } else {
      // Magnetization histograms: annealed-ensemble draws vs an HMC chain at
      // the target couplings.
      const ExperimentConfig cfg = parse_experiment(tree);
      const auto u = potential_from_json(cfg.potential, cfg.seed);
      ZeroDrift none(u->dim());
      const SamplerOptions opt =
          sampler_options_from_json(cfg.integrator, cfg.seed);
      const SamplerResult run = run_sampler(*u, none, 2000, opt);
      const Mat nets_fields = resampled_subset(run.ensemble, 2000, cfg.seed);

      LatticeSpec spec;
      spec.extent = 4;
      spec.m2_initial = 1.0;
      spec.m2_final = 0.5;
      HmcOptions hopt;
      hopt.leapfrog_jitter = 5;
      RngStream rng(cfg.seed, stream::kOracle, 3);
      const Phi4Potential target(spec);
      const HmcResult chain = hmc_oracle(target, 1.0, 2000, hopt, rng);

      const auto dump_mags = [&](const fs::path& path, const Mat& fields) {
        std::ofstream f(path);
        f << "magnetization\n";
        const Vec m = magnetization_batch(fields);
        f.precision(10);
        for (Eigen::Index i = 0; i < m.size(); ++i) f << m(i) << "\n";
      };
      dump_mags(dir / "nets_magnetization.csv", nets_fields);
      dump_mags(dir / "hmc_magnetization.csv", chain.samples);
      std::cout << "  magnetization histograms written (hmc acceptance="
                << chain.acceptance << ")" << std::endl;
    }
  } else {
    throw std::invalid_argument("unknown suite '" + suite +
                                "' (expected gmm, funnel, mos, phi4-free, "
                                "phi4-critical)");
  }

  csv.close();
  finalize_run_dir(dir, clock);
  std::cout << "benchmark done -> " << dir.string() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Annealed nonequilibrium sampler toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path, suite;
  std::vector<std::string> overrides;
  long long seed_flag = -1;
  double eps_flag = -1.0;
  int steps_flag = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--config", config_path, "experiment config path")
        ->required();
    cmd->add_option("--override", overrides,
                    "config override key.path=value (repeatable)");
    cmd->add_option("--seed", seed_flag, "replace the config seed");
    if (needs_out)
      cmd->add_option("--out", out_dir, "output directory")->required();
  };

  CLI::App* validate = app.add_subcommand(
      "validate-config", "parse and schema-check a config");
  add_common(validate, false);

  CLI::App* train =
      app.add_subcommand("train", "train a drift and write a checkpoint");
  add_common(train, true);

  CLI::App* sample = app.add_subcommand(
      "sample", "run the annealed sampler and emit an ensemble + report");
  add_common(sample, true);
  sample->add_option("--checkpoint", checkpoint_path,
                     "trained drift checkpoint (omit for the config drift)");
  sample->add_option("--eps", eps_flag,
                     "override the diffusivity with a constant schedule");
  sample->add_option("--steps", steps_flag, "override the integration steps");

  CLI::App* bench =
      app.add_subcommand("benchmark", "run a named comparison suite");
  bench->add_option("--suite", suite,
                    "gmm | funnel | mos | phi4-free | phi4-critical")
      ->required();
  bench->add_option("--out", out_dir, "output directory")->required();
  bench->add_option("--seed", seed_flag, "suite seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed())
      return cmd_validate(config_path, overrides, seed_flag);
    if (train->parsed())
      return cmd_train(config_path, out_dir, overrides, seed_flag);
    if (sample->parsed())
      return cmd_sample(config_path, out_dir, checkpoint_path, overrides,
                        seed_flag, eps_flag, steps_flag);
    if (bench->parsed()) return cmd_benchmark(suite, out_dir, seed_flag);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
