#pragma once

#include <nets/drift.hpp>
#include <nets/lattice.hpp>
#include <nets/models.hpp>
#include <nets/potentials.hpp>
#include <nets/sde.hpp>
#include <nets/train.hpp>

#include <json.hpp>

#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace nets {

using nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& block, const std::string& where,
                                const std::set<std::string>& allowed) {
  check(block.is_object(), "config: " + where + " must be an object");
  for (const auto& item : block.items())
    check(allowed.count(item.key()) == 1,
          "config: unknown key '" + item.key() + "' in " + where);
}

inline const json& need(const json& block, const char* key,
                        const std::string& where) {
  check(block.contains(key),
        "config: missing required key '" + std::string(key) + "' in " + where);
  return block.at(key);
}

template <typename T>
T get_or(const json& block, const char* key, T fallback) {
  if (!block.contains(key)) return fallback;
  return block.at(key).get<T>();
}

inline Vec vec_or(const json& block, const char* key, Vec fallback) {
  if (!block.contains(key)) return fallback;
  const std::vector<double> v = block.at(key).get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Potential block
// ---------------------------------------------------------------------------

inline std::shared_ptr<const TimePotential> potential_from_json(
    const json& block, std::uint64_t seed) {
  using detail::get_or;
  using detail::need;
  const std::string kind = need(block, "kind", "potential").get<std::string>();

  if (kind == "gaussian") {
    detail::reject_unknown_keys(
        block, "potential",
        {"kind", "dim", "sigma0", "sigma1", "mean0", "mean1"});
    const int dim = get_or(block, "dim", 1);
    const double s0 = get_or(block, "sigma0", 1.0);
    const double s1 = need(block, "sigma1", "potential").get<double>();
    check(s0 > 0.0 && s1 > 0.0, "config: sigmas must be positive");
    const Vec m0 = detail::vec_or(block, "mean0", Vec::Zero(dim));
    const Vec m1 = detail::vec_or(block, "mean1", Vec::Zero(dim));
    return std::make_shared<MovingGaussianPotential>(
        MovingGaussianPotential::isotropic(dim, 1.0 / (s0 * s0),
                                           1.0 / (s1 * s1), m0, m1));
  }
  if (kind == "gmm") {
    detail::reject_unknown_keys(block, "potential",
                                {"kind", "layout", "modes", "radius", "sigma",
                                 "base_sigma"});
    const std::string layout = get_or<std::string>(block, "layout", "ring");
    Mat means;
    if (layout == "ring")
      means = ring_means(get_or(block, "modes", 8),
                         get_or(block, "radius", 10.0));
    else if (layout == "grid40")
      means = gmm40_means();
    else
      throw std::invalid_argument("config: unknown gmm layout '" + layout +
                                  "'");
    return std::make_shared<GmmPotential>(
        means, get_or(block, "sigma", 1.0), get_or(block, "base_sigma", 4.0));
  }
  if (kind == "funnel") {
    detail::reject_unknown_keys(block, "potential", {"kind", "dim", "sigma"});
    return std::make_shared<FunnelPotential>(get_or(block, "dim", 10),
                                             get_or(block, "sigma", 3.0));
  }
  if (kind == "student_t_mixture") {
    detail::reject_unknown_keys(
        block, "potential", {"kind", "dim", "modes", "nu", "loc_scale"});
    const int dim = get_or(block, "dim", 50);
    const int modes = get_or(block, "modes", 10);
    const double scale = get_or(block, "loc_scale", 10.0);
    // Component locations are part of the model: drawn once from a stream
    // keyed on the experiment seed so runs are reproducible end to end.
    RngStream rng(seed, stream::kInit, 1);
    Mat means(dim, modes);
    for (int j = 0; j < modes; ++j)
      for (int i = 0; i < dim; ++i)
        means(i, j) = scale * (2.0 * rng.uniform() - 1.0);
    return std::make_shared<StudentTMixturePotential>(means,
                                                      get_or(block, "nu", 2));
  }
  if (kind == "phi4") {
    detail::reject_unknown_keys(block, "potential",
                                {"kind", "extent", "dims", "m2_initial",
                                 "m2_final", "lambda_final"});
    LatticeSpec spec;
    spec.extent = get_or(block, "extent", 4);
    spec.dims = get_or(block, "dims", 2);
    spec.m2_initial = get_or(block, "m2_initial", 1.0);
    spec.m2_final = get_or(block, "m2_final", 1.0);
    spec.lambda_final = get_or(block, "lambda_final", 0.0);
    return std::make_shared<Phi4Potential>(spec);
  }
  throw std::invalid_argument("config: unknown potential kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Drift block
// ---------------------------------------------------------------------------

inline std::unique_ptr<DriftModel> drift_from_json(
    const json& block, const std::shared_ptr<const TimePotential>& u) {
  using detail::get_or;
  const std::string kind = get_or<std::string>(block, "kind", "zero");

  if (kind == "zero") {
    detail::reject_unknown_keys(block, "drift", {"kind"});
    return std::make_unique<ZeroDrift>(u->dim());
  }
  if (kind == "analytic") {
    detail::reject_unknown_keys(block, "drift", {"kind"});
    const auto* mg = dynamic_cast<const MovingGaussianPotential*>(u.get());
    check(mg != nullptr,
          "config: analytic drift needs a gaussian potential family");
    return std::make_unique<AnalyticGaussianDrift>(*mg);
  }
  if (kind == "mlp_vector" || kind == "mlp_phi") {
    detail::reject_unknown_keys(block, "drift",
                                {"kind", "hidden", "time_freqs"});
    TimeFeatures feat;
    feat.freqs = get_or(block, "time_freqs", 2);
    const auto hidden =
        get_or<std::vector<int>>(block, "hidden", std::vector<int>{48, 48});
    if (kind == "mlp_vector")
      return std::make_unique<MlpVectorDrift>(u->dim(), hidden, feat);
    return std::make_unique<MlpPhiDrift>(u->dim(), hidden, feat);
  }
  throw std::invalid_argument("config: unknown drift kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Integrator block
// ---------------------------------------------------------------------------

inline SamplerOptions sampler_options_from_json(const json& block,
                                                std::uint64_t seed) {
  using detail::get_or;
  detail::reject_unknown_keys(block, "integrator",
                              {"scheme", "steps", "t_end", "random_grid",
                               "eps", "eps_final", "mu",
                               "resample_threshold"});
  SamplerOptions opt;
  const std::string scheme = get_or<std::string>(block, "scheme", "overdamped");
  if (scheme == "overdamped")
    opt.scheme = SamplerOptions::Scheme::Overdamped;
  else if (scheme == "discrete")
    opt.scheme = SamplerOptions::Scheme::Discrete;
  else if (scheme == "inertial")
    opt.scheme = SamplerOptions::Scheme::Inertial;
  else if (scheme == "phi_form")
    opt.scheme = SamplerOptions::Scheme::PhiForm;
  else
    throw std::invalid_argument("config: unknown scheme '" + scheme + "'");

  opt.steps = get_or(block, "steps", 100);
  opt.t_end = get_or(block, "t_end", 1.0);
  opt.random_grid = get_or(block, "random_grid", false);
  const double e0 = get_or(block, "eps", 1.0);
  if (block.contains("eps_final"))
    opt.eps = DiffusionSchedule::ramp(e0, block.at("eps_final").get<double>());
  else
    opt.eps = DiffusionSchedule::constant(e0);
  opt.mu = get_or(block, "mu", 1.0);
  opt.resample_threshold = get_or(block, "resample_threshold", -1.0);
  opt.seed = seed;
  return opt;
}

// ---------------------------------------------------------------------------
// Train block
// ---------------------------------------------------------------------------

inline TrainConfig train_config_from_json(const json& block,
                                          std::uint64_t seed) {
  using detail::get_or;
  detail::reject_unknown_keys(
      block, "train",
      {"kind", "objective", "dt_free_energy", "divergence", "probes",
       "probe_delta", "hidden", "fhead_hidden", "time_freqs", "init_scale",
       "iters", "walkers", "slices", "random_grid", "eps", "lr",
       "t_end_start", "t_ramp_iters", "ess_floor", "weight_floor"});
  TrainConfig cfg;

  const std::string kind = get_or<std::string>(block, "kind", "phi");
  if (kind == "vector")
    cfg.kind = DriftKind::kVector;
  else if (kind == "phi")
    cfg.kind = DriftKind::kPhi;
  else
    throw std::invalid_argument("config: unknown drift kind '" + kind + "'");

  const std::string obj = get_or<std::string>(block, "objective", "pinn");
  if (obj == "pinn")
    cfg.objective = Objective::kPinn;
  else if (obj == "action_matching")
    cfg.objective = Objective::kActionMatching;
  else
    throw std::invalid_argument("config: unknown objective '" + obj + "'");

  const std::string dtf =
      get_or<std::string>(block, "dt_free_energy", "head");
  if (dtf == "head")
    cfg.dtf = DtFreeEnergy::kHead;
  else if (dtf == "empirical")
    cfg.dtf = DtFreeEnergy::kEmpirical;
  else if (dtf == "analytic")
    cfg.dtf = DtFreeEnergy::kAnalytic;
  else
    throw std::invalid_argument("config: unknown dt_free_energy '" + dtf +
                                "'");

  const std::string div = get_or<std::string>(block, "divergence", "exact");
  if (div == "exact")
    cfg.divergence = DivergenceEstimator::kExact;
  else if (div == "probe")
    cfg.divergence = DivergenceEstimator::kProbe;
  else
    throw std::invalid_argument("config: unknown divergence '" + div + "'");

  cfg.probes = get_or(block, "probes", cfg.probes);
  cfg.probe_delta = get_or(block, "probe_delta", cfg.probe_delta);
  cfg.hidden = get_or(block, "hidden", cfg.hidden);
  cfg.fhead_hidden = get_or(block, "fhead_hidden", cfg.fhead_hidden);
  cfg.time_freqs = get_or(block, "time_freqs", cfg.time_freqs);
  cfg.init_scale = get_or(block, "init_scale", cfg.init_scale);
  cfg.iters = get_or(block, "iters", cfg.iters);
  cfg.walkers = get_or(block, "walkers", cfg.walkers);
  cfg.slices = get_or(block, "slices", cfg.slices);
  cfg.random_grid = get_or(block, "random_grid", cfg.random_grid);
  cfg.eps = get_or(block, "eps", cfg.eps);
  cfg.lr = get_or(block, "lr", cfg.lr);
  cfg.t_end_start = get_or(block, "t_end_start", cfg.t_end_start);
  cfg.t_ramp_iters = get_or(block, "t_ramp_iters", cfg.t_ramp_iters);
  cfg.ess_floor = get_or(block, "ess_floor", cfg.ess_floor);
  cfg.weight_floor = get_or(block, "weight_floor", cfg.weight_floor);
  cfg.seed = seed;
  return cfg;
}

// ---------------------------------------------------------------------------
// Eval block and the experiment wrapper
// ---------------------------------------------------------------------------

struct EvalConfig {
  Eigen::Index walkers = 1024;
  int reference = 2048;       // exact-sampler draws for distance metrics
  int metric_samples = 1024;  // resampled walkers entering W2/MMD
  std::vector<std::string> metrics;
};

inline EvalConfig eval_config_from_json(const json& block) {
  using detail::get_or;
  detail::reject_unknown_keys(
      block, "eval", {"walkers", "reference", "metric_samples", "metrics"});
  EvalConfig cfg;
  cfg.walkers = get_or<Eigen::Index>(block, "walkers", cfg.walkers);
  cfg.reference = get_or(block, "reference", cfg.reference);
  cfg.metric_samples = get_or(block, "metric_samples", cfg.metric_samples);
  cfg.metrics = get_or(block, "metrics", cfg.metrics);
  for (const auto& m : cfg.metrics)
    check(m == "w2" || m == "mmd", "config: unknown metric '" + m + "'");
  return cfg;
}

struct ExperimentConfig {
  std::uint64_t seed = 0;
  json potential;
  json drift;
  json integrator;
  json train;
  json eval;
  json raw;  // resolved tree, written back out with run artifacts
};

inline ExperimentConfig parse_experiment(json tree) {
  detail::reject_unknown_keys(
      tree, "experiment",
      {"seed", "potential", "drift", "integrator", "train", "eval"});
  ExperimentConfig cfg;
  cfg.seed = detail::need(tree, "seed", "experiment").get<std::uint64_t>();
  cfg.potential = detail::need(tree, "potential", "experiment");
  cfg.drift = tree.value("drift", json{{"kind", "zero"}});
  cfg.integrator = tree.value("integrator", json::object());
  cfg.train = tree.value("train", json::object());
  cfg.eval = tree.value("eval", json::object());
  cfg.raw = std::move(tree);

  // Validate every block eagerly so errors surface before any work starts.
  const auto u = potential_from_json(cfg.potential, cfg.seed);
  drift_from_json(cfg.drift, u);
  sampler_options_from_json(cfg.integrator, cfg.seed);
  train_config_from_json(cfg.train, cfg.seed);
  eval_config_from_json(cfg.eval);
  return cfg;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "config: cannot open '" + path + "'");
  json tree;
  try {
    tree = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: parse error in '" + path +
                                "': " + e.what());
  }
  return parse_experiment(std::move(tree));
}

// Apply one `path.to.key=value` override onto the raw tree; the value is
// parsed as structured text when possible and kept as a string otherwise.
inline void apply_override(json& tree, const std::string& spec) {
  const auto eq = spec.find('=');
  check(eq != std::string::npos && eq > 0,
        "override must look like key.path=value: '" + spec + "'");
  const std::string path = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);

  json* node = &tree;
  std::size_t begin = 0;
  while (true) {
    const auto dot = path.find('.', begin);
    const std::string key = path.substr(
        begin, dot == std::string::npos ? std::string::npos : dot - begin);
    check(!key.empty(), "override has an empty path segment: '" + spec + "'");
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    begin = dot + 1;
  }
}

}  // namespace nets
