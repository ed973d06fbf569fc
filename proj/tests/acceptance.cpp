// End-to-end acceptance battery for the annealed-transport sampler.
//
// Each numbered check exercises one advertised statistical guarantee end to
// end and prints exactly one PASS/FAIL line with the measured quantities and
// the tolerance it was held to. Tolerances are pinned here, in code. The
// process exits nonzero if any selected check fails.
//
// Usage:
//   nets_acceptance            runs the full battery
//   nets_acceptance 3 7 11     runs a subset by number

#include <nets/config.hpp>
#include <nets/drift.hpp>
#include <nets/ensemble.hpp>
#include <nets/lattice.hpp>
#include <nets/metrics.hpp>
#include <nets/mlp.hpp>
#include <nets/potentials.hpp>
#include <nets/sde.hpp>
#include <nets/train.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

using namespace nets;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

std::pair<double, double> mean_sd(const Vec& v) {
  const double m = v.mean();
  const double sd =
      std::sqrt((v.array() - m).square().sum() / (v.size() - 1.0));
  return {m, sd};
}

std::pair<double, double> mean_se(const Vec& v) {
  auto [m, sd] = mean_sd(v);
  return {m, sd / std::sqrt(static_cast<double>(v.size()))};
}

// The d = 2 widening family used by several checks: precision (1 + t) I,
// mean sliding from the origin to e1. Free-energy gap F1 - F0 = log 2.
MovingGaussianPotential widening_family() {
  Vec m1 = Vec::Zero(2);
  m1(0) = 1.0;
  return MovingGaussianPotential::isotropic(2, 1.0, 2.0, Vec::Zero(2), m1);
}

// ---------------------------------------------------------------------------
// 1. With the exact transport drift the weight of every walker collapses to
//    the free-energy difference: std(A_1) and |mean(A_1) + (F1 - F0)| both
//    under 5e-2 at dt = 1e-3 with 1e3 walkers, in under a minute.
Outcome check_exact_drift_collapse() {
  constexpr double kTol = 5e-2;
  const auto u = widening_family();
  const AnalyticGaussianDrift b(u);

  SamplerOptions opt;
  opt.scheme = SamplerOptions::Scheme::Overdamped;
  opt.steps = 1000;  // dt = 1e-3
  opt.seed = 101;
  const SamplerResult r = run_sampler(u, b, 1000, opt);

  const auto [mean, sd] = mean_sd(r.ensemble.log_w);
  const double want = -(u.free_energy(1.0) - u.free_energy(0.0));
  const double mean_err = std::abs(mean - want);
  return {sd < kTol && mean_err < kTol,
          fmt("std(A)=%.3g mean_err=%.3g (tol %.0e)", sd, mean_err, kTol)};
}

// ---------------------------------------------------------------------------
// 2. Zero-drift anneal N(0,1) -> N(0,4): the work-weighted estimators hit the
//    truth. log-mean-exp(A_1) = (1/2) log 4 and the weighted second moment
//    equals 4, each within three standard errors, with 1e5 walkers and 1e3
//    steps.
Outcome check_zero_drift_unbiased() {
  const auto u = MovingGaussianPotential::isotropic(1, 1.0, 0.25);
  const ZeroDrift b(1);

  SamplerOptions opt;
  opt.scheme = SamplerOptions::Scheme::Overdamped;
  opt.steps = 1000;
  // Without transport the weights carry the whole annealing dissipation,
  // which shrinks like 1/eps; eps = 4 keeps the weight distribution tight
  // enough that the empirical standard error is trustworthy.
  opt.eps = DiffusionSchedule::constant(4.0);
  opt.seed = 202;
  const SamplerResult r = run_sampler(u, b, 100000, opt);
  const WalkerEnsemble& e = r.ensemble;

  const double log_z = log_partition_ratio(e);
  const double se = log_partition_se(e);
  const double want = 0.5 * std::log(4.0);

  const Vec second = e.x.row(0).transpose().array().square();
  const auto [m2, m2_se] = weighted_mean_and_se(e.log_w, second);

  const bool ok_z = std::abs(log_z - want) < 3.0 * se;
  const bool ok_m = std::abs(m2 - 4.0) < 3.0 * m2_se;
  return {ok_z && ok_m,
          fmt("logZ=%.5f (want %.5f, 3se=%.2g) Ex2=%.4f (want 4, 3se=%.2g)",
              log_z, want, 3.0 * se, m2, 3.0 * m2_se)};
}

// ---------------------------------------------------------------------------
// 3. The discrete-kernel weights stay exact at coarse step counts: the same
//    anneal at K = 100 still recovers log Z, and on a frozen potential the
//    weight average stays at E[e^A] = 1 for K in {1, 10, 100}.
Outcome check_discrete_weights_exact() {
  const auto u = MovingGaussianPotential::isotropic(1, 1.0, 0.25);
  const ZeroDrift b(1);
  const double want = 0.5 * std::log(4.0);

  SamplerOptions opt;
  opt.scheme = SamplerOptions::Scheme::Discrete;
  opt.steps = 100;
  opt.eps = DiffusionSchedule::constant(4.0);  // see check 2
  opt.seed = 303;
  const SamplerResult r = run_sampler(u, b, 100000, opt);
  const double log_z = log_partition_ratio(r.ensemble);
  const double se = log_partition_se(r.ensemble);
  bool ok = std::abs(log_z - want) < 3.0 * se;
  std::string detail =
      fmt("K=100 logZ=%.5f (want %.5f, 3se=%.2g)", log_z, want, 3.0 * se);

  // Frozen endpoints: Z_1/Z_0 = 1 no matter how few steps are taken.
  const auto frozen = MovingGaussianPotential::isotropic(1, 1.0, 1.0);
  for (int k : {1, 10, 100}) {
    SamplerOptions so;
    so.scheme = SamplerOptions::Scheme::Discrete;
    so.steps = k;
    so.seed = 304 + static_cast<std::uint64_t>(k);
    const SamplerResult sr = run_sampler(frozen, b, 100000, so);
    const double lz = log_partition_ratio(sr.ensemble);
    const double lse = log_partition_se(sr.ensemble);
    ok = ok && std::abs(lz) < 3.0 * lse;
    detail += fmt(" | static K=%d: logZ=%.2e (3se=%.2g)", k, lz, 3.0 * lse);
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 4. The on-policy continuity loss vanishes at the exact drift when the exact
//    dF/dt is supplied: loss below 1e-8, so the divergence bound sqrt(loss)
//    sits below 1e-3.
Outcome check_loss_floor_at_exact_drift() {
  constexpr double kLossTol = 1e-8;
  constexpr double kBoundTol = 1e-3;
  const auto u = widening_family();
  const AnalyticGaussianDrift b(u);

  RolloutOptions ro;
  ro.walkers = 256;
  ro.steps = 24;
  ro.eps = 1.0;
  ro.seed = 17;
  const RolloutSlices s = rollout_slices(u, b, ro);
  const PinnValue pv = pinn_loss(u, b, s, DtFreeEnergy::kAnalytic);
  const double bound = kl_bound_estimate(pv.loss);
  return {pv.loss < kLossTol && bound < kBoundTol,
          fmt("loss=%.3g (tol %.0e) sqrt=%.3g (tol %.0e)", pv.loss, kLossTol,
              bound, kBoundTol)};
}

// ---------------------------------------------------------------------------
// 5. Training on the eight-mode ring mixture (radius 10, unit component
//    sigma) with the continuity objective, within a 4000-iteration budget,
//    yields terminal ESS >= 0.7 in pure-transport evaluation (eps = 0), and
//    the same checkpoint evaluated at eps = 4 with 4x finer steps holds or
//    improves that ESS.
Outcome check_trained_ring_mixture() {
  constexpr double kEssFloor = 0.7;
  auto gmm = std::make_shared<GmmPotential>(ring_means(8, 10.0), 1.0, 4.0);

  TrainConfig tc;
  tc.kind = DriftKind::kVector;
  tc.objective = Objective::kPinn;
  tc.dtf = DtFreeEnergy::kAnalytic;
  tc.hidden = {48, 48};
  tc.iters = 1000;
  tc.walkers = 192;
  tc.slices = 24;
  tc.lr = 2e-3;
  tc.eps = 1.0;
  tc.t_end_start = 0.2;
  tc.t_ramp_iters = 350;
  tc.seed = 5;
  Trainer trainer(gmm, tc);
  for (int i = 0; i < tc.iters; ++i) trainer.step(i);

  // ESS from one evaluation run fluctuates by a few 1e-3 with the walker
  // seed, which is the same order as the diffusivity effect at this model
  // quality, so each setting is scored as the mean of three replicas. The
  // hold allowance below is one replica-mean noise sd; an actual degradation
  // from switching on diffusivity shows up an order of magnitude larger.
  constexpr double kHoldAllowance = 5e-3;
  const auto mean_ess = [&](double eps, int steps,
                            SamplerOptions::Scheme scheme,
                            std::uint64_t seed0) {
    double acc = 0.0;
    for (int r = 0; r < 3; ++r) {
      SamplerOptions opt;
      opt.scheme = scheme;
      opt.steps = steps;
      opt.eps = DiffusionSchedule::constant(eps);
      opt.seed = seed0 + 11 * static_cast<std::uint64_t>(r);
      acc += ess(run_sampler(*gmm, trainer.model(), 2000, opt).ensemble);
    }
    return acc / 3.0;
  };
  const double ess0 =
      mean_ess(0.0, 300, SamplerOptions::Scheme::Overdamped, 55);
  const double ess4 = mean_ess(4.0, 1200, SamplerOptions::Scheme::Discrete, 56);

  return {ess0 >= kEssFloor && ess4 + kHoldAllowance >= ess0,
          fmt("iters=%d ess(eps=0)=%.4f (floor %.2f) ess(eps=4,4x steps)=%.4f",
              tc.iters, ess0, kEssFloor, ess4)};
}

// A constant shift of the scalar model; the action-matching value must not
// move under it.
class ShiftedPhi final : public DriftModel {
 public:
  ShiftedPhi(const DriftModel& base, double c) : base_(base), c_(c) {}
  int dim() const override { return base_.dim(); }
  void drift(double t, const Mat& x, Mat& b, Vec* div) const override {
    base_.drift(t, x, b, div);
  }
  bool has_potential() const override { return true; }
  void potential(double t, const Mat& x, Vec* phi, Mat* grad,
                 Vec* dt) const override {
    base_.potential(t, x, phi, grad, dt);
    if (phi) phi->array() += c_;
  }

 private:
  const DriftModel& base_;
  double c_;
};

// Tilts the scalar model by v . x, which does change the gradient field.
class TiltedPhi final : public DriftModel {
 public:
  TiltedPhi(const DriftModel& base, Vec v) : base_(base), v_(std::move(v)) {}
  int dim() const override { return base_.dim(); }
  void drift(double t, const Mat& x, Mat& b, Vec* div) const override {
    base_.drift(t, x, b, div);
    b.colwise() += v_;
  }
  bool has_potential() const override { return true; }
  void potential(double t, const Mat& x, Vec* phi, Mat* grad,
                 Vec* dt) const override {
    base_.potential(t, x, phi, grad, dt);
    if (phi) *phi += x.transpose() * v_;
    if (grad) grad->colwise() += v_;
  }

 private:
  const DriftModel& base_;
  Vec v_;
};

// ---------------------------------------------------------------------------
// 6. Action matching is gauge invariant — adding a constant to the scalar
//    model moves the value by less than 1e-10 on fixed slices — and the exact
//    scalar beats ten random tilts of itself.
Outcome check_action_matching() {
  constexpr double kGaugeTol = 1e-10;
  const auto u = widening_family();
  const AnalyticGaussianDrift exact(u);

  RolloutOptions ro;
  ro.walkers = 256;
  ro.steps = 16;
  ro.eps = 1.0;
  ro.seed = 31;
  const RolloutSlices s = rollout_slices(u, exact, ro);

  const double base = am_loss(exact, s);
  const ShiftedPhi shifted(exact, 3.7);
  const double gauge_gap = std::abs(am_loss(shifted, s) - base);

  RngStream rng(77, 5);
  int beaten = 0;
  double closest = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 10; ++rep) {
    const TiltedPhi tilted(exact, Vec(0.3 * rng.normal_vec(2)));
    const double gap = am_loss(tilted, s) - base;
    closest = std::min(closest, gap);
    if (gap > 0.0) ++beaten;
  }
  return {gauge_gap < kGaugeTol && beaten == 10,
          fmt("gauge_gap=%.3g (tol %.0e) tilts_beaten=%d/10 min_gap=%.3g",
              gauge_gap, kGaugeTol, beaten, closest)};
}

// ---------------------------------------------------------------------------
// 7. The scalar-potential weight increments agree with the divergence-form
//    increments step by step under shared noise: with a quadratic scalar
//    model, every per-step A-increment differs by less than 10 dt.
Outcome check_phi_form_agreement() {
  const int steps = 100;
  const double dt = 1.0 / steps;
  const double tol = 10.0 * dt;
  const double eps = 1.0;
  const std::uint64_t seed = 909;

  const auto u = widening_family();
  const AnalyticGaussianDrift b(u);  // gradient of a quadratic scalar

  WalkerEnsemble ea = init_ensemble(u, 256, seed);
  WalkerEnsemble eb = ea;
  PhiFormCache cache;
  double worst = 0.0;
  for (int k = 0; k < steps; ++k) {
    const Vec wa = ea.log_w, wb = eb.log_w;
    RngStream ra(seed, stream::kStep, static_cast<std::uint64_t>(k), 0);
    RngStream rb(seed, stream::kStep, static_cast<std::uint64_t>(k), 0);
    step_overdamped(ea, u, b, eps, dt, ra);
    step_phi_form(eb, cache, u, b, eps, dt, rb);
    worst = std::max(
        worst,
        ((ea.log_w - wa) - (eb.log_w - wb)).cwiseAbs().maxCoeff());
  }
  // Shared noise keeps the two position paths together to rounding error.
  const double drift_gap = (ea.x - eb.x).cwiseAbs().maxCoeff();
  return {worst < tol && drift_gap < 1e-9,
          fmt("max|dA_step|=%.3g (tol %.3g = 10 dt) path_gap=%.2g", worst, tol,
              drift_gap)};
}

// ---------------------------------------------------------------------------
// 8. The inertial integrator degenerates correctly at both ends: mu = 0
//    reproduces the noiseless transport ODE bit for bit, and mu = 100 with
//    the exact drift meets the same weight tolerances as check 1.
Outcome check_inertial_limits() {
  constexpr double kTol = 5e-2;
  const auto u = widening_family();
  const AnalyticGaussianDrift b(u);

  // mu = 0: positions must match a hand-rolled Euler transport pass exactly.
  const int steps = 200;
  const Eigen::Index n = 128;
  const std::uint64_t seed = 3;
  SamplerOptions opt;
  opt.scheme = SamplerOptions::Scheme::Inertial;
  opt.mu = 0.0;
  opt.steps = steps;
  opt.seed = seed;
  const SamplerResult r0 = run_sampler(u, b, n, opt);

  WalkerEnsemble e = init_ensemble(u, n, seed);
  const auto grid = make_uniform_grid(steps, 1.0);
  Mat x = e.x;
  double t = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double h = grid[k + 1] - grid[k];
    Mat bv;
    b.drift(t, x, bv, nullptr);
    x += h * bv;
    t += h;
  }
  const bool bitwise = (r0.ensemble.x.array() == x.array()).all();

  // mu = 100: same collapse tolerances as the exact-drift check.
  SamplerOptions heavy;
  heavy.scheme = SamplerOptions::Scheme::Inertial;
  heavy.mu = 100.0;
  heavy.steps = 1000;
  heavy.seed = 808;
  const SamplerResult r1 = run_sampler(u, b, 1000, heavy);
  const auto [mean, sd] = mean_sd(r1.ensemble.log_w);
  const double want = -(u.free_energy(1.0) - u.free_energy(0.0));
  const double mean_err = std::abs(mean - want);

  return {bitwise && sd < kTol && mean_err < kTol,
          fmt("mu=0 bitwise=%s | mu=100 std(A)=%.3g mean_err=%.3g (tol %.0e)",
              bitwise ? "yes" : "no", sd, mean_err, kTol)};
}

// ---------------------------------------------------------------------------
// 9. Lattice cross-validation. Free field at L in {4, 8}: the spectral
//    sampler and Hamiltonian Monte Carlo agree on the site variance and the
//    distance-1 correlator within three combined standard errors. Then a
//    quartic anneal on the 4^2 lattice: the zero-drift annealed estimate of
//    log Z matches thermodynamic integration within combined error bars.
Outcome check_lattice_cross_oracles() {
  bool ok = true;
  std::string detail;

  for (int extent : {4, 8}) {
    LatticeSpec spec;
    spec.extent = extent;
    spec.dims = 2;
    spec.m2_initial = 1.0;
    spec.m2_final = 1.0;
    spec.lambda_final = 0.0;
    const Phi4Potential u(spec);
    const double volume = spec.volume();

    const FourierFreeField ff = make_free_field(spec, 1.0);
    RngStream frng(11, stream::kOracle, static_cast<std::uint64_t>(extent));
    const Mat fourier = sample_free_field(ff, 20000, frng);

    // Jittered trajectory lengths (~[1.0, 1.8]) keep every lattice mode off
    // leapfrog resonance; the small step keeps acceptance high so thinned
    // draws are honest.
    HmcOptions ho;
    ho.step_size = 0.12;
    ho.leapfrog_steps = 15;
    ho.leapfrog_jitter = 7;
    ho.burn_in = 500;
    ho.thin = 10;
    RngStream hrng(13, stream::kOracle, static_cast<std::uint64_t>(extent));
    const HmcResult chain = hmc_oracle(u, 0.0, 3000, ho, hrng);

    const auto var_of = [&](const Mat& fields) {
      return mean_se(
          Vec(fields.array().square().colwise().mean().transpose()));
    };
    const auto [vf, vf_se] = var_of(fourier);
    const auto [vh, vh_se] = var_of(chain.samples);
    const double v_gap = std::abs(vf - vh);
    const double v_bar = 3.0 * std::hypot(vf_se, vh_se);

    const auto [gf, gf_se] = mean_se(two_point_function(spec, fourier, 1));
    const auto [gh, gh_se] = mean_se(two_point_function(spec, chain.samples, 1));
    const double g_gap = std::abs(gf - gh);
    const double g_bar = 3.0 * std::hypot(gf_se, gh_se);

    ok = ok && v_gap < v_bar && g_gap < g_bar;
    detail += fmt("L=%d dVar=%.2g(bar %.2g) dG1=%.2g(bar %.2g) acc=%.2f | ",
                  extent, v_gap, v_bar, g_gap, g_bar, chain.acceptance);
    (void)volume;
  }

  LatticeSpec anneal;
  anneal.extent = 4;
  anneal.dims = 2;
  anneal.m2_initial = 1.0;
  anneal.m2_final = 0.5;
  anneal.lambda_final = 0.3;
  const Phi4Potential u(anneal);

  SamplerOptions opt;
  opt.scheme = SamplerOptions::Scheme::Discrete;
  opt.steps = 1000;
  opt.seed = 99;
  const ZeroDrift zero(u.dim());
  const SamplerResult ais = run_sampler(u, zero, 6000, opt);
  const double ais_lz = log_partition_ratio(ais.ensemble);
  const double ais_se = log_partition_se(ais.ensemble);

  // 41 trapezoid knots keep the quadrature bias well under the statistical
  // bar that gates the comparison.
  TiOptions ti_opt;
  ti_opt.grid_points = 41;
  ti_opt.samples = 2000;
  ti_opt.hmc.step_size = 0.12;
  ti_opt.hmc.leapfrog_steps = 15;
  ti_opt.hmc.leapfrog_jitter = 7;
  ti_opt.hmc.burn_in = 300;
  ti_opt.hmc.thin = 5;
  RngStream trng(17, stream::kOracle, 9);
  const TiResult ti = thermodynamic_integration(u, ti_opt, trng);

  const double gap = std::abs(ais_lz - ti.log_z);
  const double bar = 3.0 * std::hypot(ais_se, ti.se);
  ok = ok && gap < bar;
  detail += fmt("logZ ais=%.4f ti=%.4f gap=%.3g (bar %.3g)", ais_lz, ti.log_z,
                gap, bar);
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 10. Gradient plumbing. Network parameter gradients match central finite
//     differences to 1e-4 relative error on 20 random coordinates, and the
//     probe divergence estimator's bias drops fourfold when the probe step
//     halves (shared probes, cubic field with known bias structure).
class CubicField final : public DriftModel {
 public:
  explicit CubicField(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  void drift(double, const Mat& x, Mat& b_out, Vec* div_out) const override {
    b_out = x.array().cube();
    if (div_out)
      *div_out = 3.0 * x.array().square().colwise().sum().transpose();
  }

 private:
  int dim_;
};

Outcome check_gradient_machinery() {
  constexpr double kRelTol = 1e-4;
  constexpr double kRatioTol = 1e-3;

  Mlp net({3, 16, 16, 2});
  RngStream init(rng_key(11, stream::kParamInit));
  net.init_params(init, 1.0);
  RngStream data(rng_key(1, 77));
  const Mat x = data.normal_mat(3, 5);
  const Mat gy = data.normal_mat(2, 5);

  Mlp::Cache cache;
  net.forward(x, &cache);
  Vec gp = Vec::Zero(net.n_params());
  net.backward(cache, gy, &gp, nullptr);

  const auto objective = [&](const Mlp& m) {
    return (m.forward(x).array() * gy.array()).sum();
  };
  const double h = 1e-6;
  double worst_rel = 0.0;
  RngStream pick(rng_key(3, 99));
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index i = static_cast<Eigen::Index>(
        pick.uniform_index(static_cast<std::uint64_t>(net.n_params())));
    Mlp mp = net;
    mp.params()(i) += h;
    Mlp mm = net;
    mm.params()(i) -= h;
    const double fd = (objective(mp) - objective(mm)) / (2.0 * h);
    const double denom = std::max(1.0, std::abs(fd));
    worst_rel = std::max(worst_rel, std::abs(gp(i) - fd) / denom);
  }

  // Shared probe streams at every delta, so subtracting the near-zero-delta
  // estimate cancels the probe noise and exposes the delta^2 bias alone.
  const CubicField field(4);
  RngStream xs(rng_key(9, 3));
  const Mat pts = xs.normal_mat(4, 6);
  RngStream p0(rng_key(11, stream::kProbe));
  const Vec est0 = hutchinson_divergence(field, 0.0, pts, 8, 1e-5, p0);
  RngStream p1(rng_key(11, stream::kProbe));
  const Vec est1 = hutchinson_divergence(field, 0.0, pts, 8, 0.2, p1);
  RngStream p2(rng_key(11, stream::kProbe));
  const Vec est2 = hutchinson_divergence(field, 0.0, pts, 8, 0.1, p2);
  double worst_ratio = 0.0;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const double ratio = (est1(i) - est0(i)) / (est2(i) - est0(i));
    worst_ratio = std::max(worst_ratio, std::abs(ratio - 4.0));
  }

  return {worst_rel < kRelTol && worst_ratio < kRatioTol,
          fmt("grad_rel=%.2g (tol %.0e) ratio_err=%.2g (tol %.0e)", worst_rel,
              kRelTol, worst_ratio, kRatioTol)};
}

// ---------------------------------------------------------------------------
// 11. Metric oracles. The transport distance matches brute-force assignment
//     for up to six points; the kernel discrepancy of a set against itself
//     stays at numerical noise; the effective-sample-size formula reproduces
//     a hand-computed case exactly: weights (1,1,1,1,1,0) over six -> 5/6.
double w2_brute_force(const Mat& a, const Mat& b) {
  std::vector<int> perm(static_cast<std::size_t>(b.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Eigen::Index i = 0; i < a.cols(); ++i)
      total += (a.col(i) - b.col(perm[static_cast<std::size_t>(i)]))
                   .squaredNorm();
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(a.cols()));
}

Outcome check_metric_oracles() {
  double worst_w2 = 0.0;
  for (int n = 1; n <= 6; ++n) {
    for (int d : {1, 2, 3}) {
      RngStream rng(rng_key(500 + static_cast<std::uint64_t>(10 * n + d), 4));
      const Mat a = rng.normal_mat(d, n);
      const Mat b = 0.7 * rng.normal_mat(d, n);
      worst_w2 = std::max(worst_w2,
                          std::abs(w2_distance(a, b) - w2_brute_force(a, b)));
    }
  }

  // A set against itself: never positive beyond rounding, and the unbiased
  // estimator's structural offset keeps it above -2/n.
  RngStream mr(rng_key(321, 4));
  const Mat pts = mr.normal_mat(3, 128);
  const double self_mmd = mmd_rbf(pts, pts);
  const bool mmd_ok = self_mmd <= 1e-12 && self_mmd >= -2.0 / 128.0;

  Vec log_w = Vec::Zero(6);
  log_w(5) = -std::numeric_limits<double>::infinity();
  const double e = ess_from_log_weights(log_w);
  const bool ess_exact = (e == 5.0 / 6.0);

  return {worst_w2 < 1e-12 && mmd_ok && ess_exact,
          fmt("w2_gap=%.2g self_mmd=%.2g (window [-2/n, 1e-12]) ess=%.17g "
              "(want %.17g)",
              worst_w2, self_mmd, e, 5.0 / 6.0)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Entry {
    int id;
    const char* label;
    double budget_s;  // wall-clock ceiling; <= 0 means unbounded
    std::function<Outcome()> fn;
  };
  const std::vector<Entry> battery = {
      {1, "exact drift collapses the weights", 60.0,
       check_exact_drift_collapse},
      {2, "zero-drift anneal is unbiased", 120.0, check_zero_drift_unbiased},
      {3, "discrete weights exact at coarse steps", 120.0,
       check_discrete_weights_exact},
      {4, "continuity loss floors at the exact drift", 0.0,
       check_loss_floor_at_exact_drift},
      {5, "trained ring-mixture sampler", 0.0, check_trained_ring_mixture},
      {6, "action matching: gauge and minimizer", 0.0, check_action_matching},
      {7, "scalar-form weights match divergence form", 0.0,
       check_phi_form_agreement},
      {8, "inertial integrator limits", 0.0, check_inertial_limits},
      {9, "lattice oracles agree", 600.0, check_lattice_cross_oracles},
      {10, "gradients and probe divergence", 0.0, check_gradient_machinery},
      {11, "metric oracles", 0.0, check_metric_oracles},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  bool all_pass = true;
  for (const Entry& entry : battery) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), entry.id) ==
            selected.end())
      continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = entry.fn();
    } catch (const std::exception& err) {
      out = {false, std::string("exception: ") + err.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (entry.budget_s > 0.0 && secs > entry.budget_s) {
      out.pass = false;
      out.detail += fmt(" [over %.0fs budget]", entry.budget_s);
    }
    std::printf("[%2d] %s  %-44s %s (%.1fs)\n", entry.id,
                out.pass ? "PASS" : "FAIL", entry.label, out.detail.c_str(),
                secs);
    std::fflush(stdout);
    all_pass = all_pass && out.pass;
  }
  return all_pass ? 0 : 1;
}
