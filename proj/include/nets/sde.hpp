#pragma once

#include <nets/drift.hpp>
#include <nets/ensemble.hpp>

#include <algorithm>
#include <vector>

namespace nets {

// Anneal-time grid t_0 < ... < t_K with t_0 = 0 and t_K = t_end.
inline std::vector<double> make_uniform_grid(int steps, double t_end = 1.0) {
  check(steps > 0, "time grid: need at least one step");
  check(t_end > 0.0, "time grid: horizon must be positive");
  std::vector<double> t(steps + 1);
  for (int k = 0; k <= steps; ++k) t[k] = t_end * k / steps;
  t.back() = t_end;
  return t;
}

// Random grid with pinned endpoints: interior knots are sorted uniforms.
inline std::vector<double> make_random_grid(int steps, double t_end,
                                            RngStream& rng) {
  check(steps > 0, "time grid: need at least one step");
  check(t_end > 0.0, "time grid: horizon must be positive");
  std::vector<double> t(steps + 1);
  t[0] = 0.0;
  t[steps] = t_end;
  for (int k = 1; k < steps; ++k) t[k] = t_end * rng.uniform();
  std::sort(t.begin() + 1, t.end() - 1);
  return t;
}

// Diffusion coefficient schedule eps_t >= 0 on [0, 1].
struct DiffusionSchedule {
  enum class Kind { Constant, Ramp, Piecewise };

  Kind kind = Kind::Constant;
  double v0 = 1.0, v1 = 1.0;
  std::vector<double> knots;   // interior breakpoints, ascending
  std::vector<double> values;  // knots.size() + 1 levels

  static DiffusionSchedule constant(double v) {
    check(v >= 0.0, "diffusion schedule: eps must be nonnegative");
    DiffusionSchedule s;
    s.kind = Kind::Constant;
    s.v0 = s.v1 = v;
    return s;
  }
  static DiffusionSchedule ramp(double v0, double v1) {
    check(v0 >= 0.0 && v1 >= 0.0, "diffusion schedule: eps must be nonnegative");
    DiffusionSchedule s;
    s.kind = Kind::Ramp;
    s.v0 = v0;
    s.v1 = v1;
    return s;
  }
  static DiffusionSchedule piecewise(std::vector<double> knots,
                                     std::vector<double> values) {
    check(values.size() == knots.size() + 1,
          "diffusion schedule: need one more level than breakpoints");
    check(std::is_sorted(knots.begin(), knots.end()),
          "diffusion schedule: breakpoints must be ascending");
    for (double v : values)
      check(v >= 0.0, "diffusion schedule: eps must be nonnegative");
    DiffusionSchedule s;
    s.kind = Kind::Piecewise;
    s.knots = std::move(knots);
    s.values = std::move(values);
    return s;
  }

  double operator()(double t) const {
    switch (kind) {
      case Kind::Constant: return v0;
      case Kind::Ramp: return v0 + t * (v1 - v0);
      case Kind::Piecewise: {
        std::size_t i = 0;
        while (i < knots.size() && t >= knots[i]) ++i;
        return values[i];
      }
    }
    return v0;
  }

  // Whether eps is constant between grid points (the Laplacian-free weight
  // path needs this).
  bool piecewise_constant() const {
    return kind != Kind::Ramp || v0 == v1;
  }
};

// One Euler-Maruyama step of the annealed dynamics
//   dX = (b - eps grad U) dt + sqrt(2 eps) dW,
// with the Jarzynski work accumulated in continuous-time (divergence) form:
//   dA = (div b - grad U . b - dtU) dt.
// Potential and drift are evaluated at the pre-step state; the noise matrix
// is drawn last, in column-major walker order.
inline void step_overdamped(WalkerEnsemble& e, const TimePotential& u,
                            const DriftModel& b, double eps, double dt,
                            RngStream& rng) {
  Vec dtu, div;
  Mat gu, bv;
  u.eval_batch(e.t, e.x, nullptr, &gu, &dtu);
  b.drift(e.t, e.x, bv, &div);
  e.log_w += dt * (div.array() - (gu.array() * bv.array()).colwise().sum().transpose() -
                   dtu.array())
                 .matrix();
  e.x += dt * (bv - eps * gu);
  if (eps > 0.0)
    e.x += std::sqrt(2.0 * eps * dt) * rng.normal_mat(e.x.rows(), e.x.cols());
  e.t += dt;
}

// Same move as step_overdamped, but the weight update is the exact
// discrete-time ratio of backward and forward Euler-Maruyama kernels:
//   A += U_t(X) - U_{t+dt}(X') + R+ - R-,
//   R+ = |X' - X + dt (eps gradU_t(X) - b_t(X))|^2 / (4 eps dt),
//   R- = |X - X' + dt (eps gradU_t(X') + b_t(X'))|^2 / (4 eps dt).
// Unbiased at any step count; needs eps > 0 for the kernels to exist.
inline void step_discrete_weights(WalkerEnsemble& e, const TimePotential& u,
                                  const DriftModel& b, double eps, double dt,
                                  RngStream& rng) {
  check(eps > 0.0, "discrete weights: eps must be positive");
  const double t0 = e.t, t1 = e.t + dt;
  Vec e0, e1;
  Mat g0, g1, b0, b1;
  u.eval_batch(t0, e.x, &e0, &g0, nullptr);
  b.drift(t0, e.x, b0, nullptr);
  Mat x1 = e.x + dt * (b0 - eps * g0) +
           std::sqrt(2.0 * eps * dt) * rng.normal_mat(e.x.rows(), e.x.cols());
  u.eval_batch(t0, x1, nullptr, &g1, nullptr);
  u.eval_batch(t1, x1, &e1, nullptr, nullptr);
  b.drift(t0, x1, b1, nullptr);
  const double q = 1.0 / (4.0 * eps * dt);
  Vec r_fwd =
      q * (x1 - e.x + dt * (eps * g0 - b0)).colwise().squaredNorm().transpose();
  Vec r_bwd =
      q * (e.x - x1 + dt * (eps * g1 + b1)).colwise().squaredNorm().transpose();
  e.log_w += e0 - e1 + r_fwd - r_bwd;
  e.x = std::move(x1);
  e.t = t1;
}

// Momentum block for the inertial variant. mu = 0 degenerates to the pure
// transport ODE: momenta start and stay exactly zero and no noise is drawn.
struct InertialState {
  Mat r;
  double mu = 0.0;
};

inline InertialState init_inertial(const WalkerEnsemble& e, double mu,
                                   RngStream& rng) {
  check(mu >= 0.0, "inertial: mu must be nonnegative");
  InertialState s;
  s.mu = mu;
  if (mu > 0.0)
    s.r = std::sqrt(mu) * rng.normal_mat(e.x.rows(), e.x.cols());
  else
    s.r = Mat::Zero(e.x.rows(), e.x.cols());
  return s;
}

// dX = (b + R) dt, dR = -mu gradU dt - mu/eps R dt + mu sqrt(2/eps) dW, with
// the same work integrand as the overdamped step.
inline void step_inertial(WalkerEnsemble& e, InertialState& s,
                          const TimePotential& u, const DriftModel& b,
                          double eps, double dt, RngStream& rng) {
  Vec dtu, div;
  Mat gu, bv;
  u.eval_batch(e.t, e.x, nullptr, &gu, &dtu);
  b.drift(e.t, e.x, bv, &div);
  e.log_w += dt * (div.array() - (gu.array() * bv.array()).colwise().sum().transpose() -
                   dtu.array())
                 .matrix();
  if (s.mu == 0.0) {
    e.x += dt * bv;
  } else {
    check(eps > 0.0, "inertial: eps must be positive when mu > 0");
    e.x += dt * (bv + s.r);
    s.r += -dt * s.mu * gu - (dt * s.mu / eps) * s.r +
           s.mu * std::sqrt(2.0 * dt / eps) *
               rng.normal_mat(e.x.rows(), e.x.cols());
  }
  e.t += dt;
}

// Cached left-endpoint potential values for the Laplacian-free weight path;
// invalidated whenever positions change outside the stepper.
struct PhiFormCache {
  Vec phi;
  bool valid = false;
};

// Euler-Maruyama step with weights accumulated through the scalar potential:
//   A += (phi_{t+dt}(X') - phi_t(X)) / eps
//        - (dtU + dtphi / eps + |grad phi|^2 / eps) dt
//        - sqrt(2 / eps) grad phi . dW,
// sharing the Brownian increment with the position update. Valid when eps is
// constant across the step.
inline void step_phi_form(WalkerEnsemble& e, PhiFormCache& cache,
                          const TimePotential& u, const DriftModel& phi,
                          double eps, double dt, RngStream& rng) {
  check(eps > 0.0, "phi-form weights: eps must be positive");
  require(phi.has_potential(), "phi-form weights: drift has no scalar potential");
  Vec phi0, dtphi, dtu;
  Mat gphi, gu;
  phi.potential(e.t, e.x, cache.valid ? nullptr : &phi0, &gphi, &dtphi);
  if (cache.valid) phi0 = cache.phi;
  u.eval_batch(e.t, e.x, nullptr, &gu, &dtu);
  Mat dw = std::sqrt(dt) * rng.normal_mat(e.x.rows(), e.x.cols());
  Mat x1 = e.x + dt * (gphi - eps * gu) + std::sqrt(2.0 * eps) * dw;
  Vec phi1;
  phi.potential(e.t + dt, x1, &phi1, nullptr, nullptr);
  e.log_w += (phi1 - phi0) / eps -
             dt * (dtu + (dtphi + gphi.colwise().squaredNorm().transpose()) / eps) -
             std::sqrt(2.0 / eps) *
                 (gphi.array() * dw.array()).colwise().sum().transpose().matrix();
  cache.phi = std::move(phi1);
  cache.valid = true;
  e.x = std::move(x1);
  e.t += dt;
}

struct SamplerOptions {
  enum class Scheme { Overdamped, Discrete, Inertial, PhiForm };

  Scheme scheme = Scheme::Overdamped;
  int steps = 100;
  double t_end = 1.0;
  bool random_grid = false;
  DiffusionSchedule eps = DiffusionSchedule::constant(1.0);
  double mu = 1.0;                  // inertial scheme only
  double resample_threshold = -1.0; // enabled when in (0, 1)
  std::uint64_t seed = 0;
};

struct SamplerResult {
  WalkerEnsemble ensemble;
  std::vector<double> grid;  // the anneal-time knots actually stepped
  Vec ess_trajectory;        // entry k: after k steps (entry 0 is the base)
  Vec log_z_trajectory;
  std::vector<int> resample_steps;
};

// Drives one annealing pass from the base to t_end, recording ESS and
// partition-ratio trajectories and resampling when ESS degrades below the
// threshold (never after the final step, so terminal weights stay intact).
inline SamplerResult run_sampler(const TimePotential& u, const DriftModel& b,
                                 Eigen::Index n_walkers,
                                 const SamplerOptions& opt) {
  check(u.dim() == b.dim(), "run_sampler: potential and drift dimensions differ");
  if (opt.scheme == SamplerOptions::Scheme::PhiForm)
    check(opt.eps.piecewise_constant(),
          "phi-form weights need a piecewise-constant diffusion schedule");

  SamplerResult out;
  out.ensemble = init_ensemble(u, n_walkers, opt.seed);
  WalkerEnsemble& e = out.ensemble;

  std::vector<double> grid;
  if (opt.random_grid) {
    RngStream grng(opt.seed, stream::kTimeGrid);
    grid = make_random_grid(opt.steps, opt.t_end, grng);
  } else {
    grid = make_uniform_grid(opt.steps, opt.t_end);
  }

  out.grid = grid;

  InertialState inertial;
  if (opt.scheme == SamplerOptions::Scheme::Inertial) {
    RngStream irng(opt.seed, stream::kInit, 1);
    inertial = init_inertial(e, opt.mu, irng);
  }
  PhiFormCache cache;

  out.ess_trajectory.resize(opt.steps + 1);
  out.log_z_trajectory.resize(opt.steps + 1);
  out.ess_trajectory[0] = ess(e);
  out.log_z_trajectory[0] = log_partition_ratio(e);

  std::uint64_t epoch = 0;
  for (int k = 0; k < opt.steps; ++k) {
    const double dt = grid[k + 1] - grid[k];
    const double eps = opt.eps(grid[k]);
    RngStream rng(opt.seed, stream::kStep, static_cast<std::uint64_t>(k), epoch);
    switch (opt.scheme) {
      case SamplerOptions::Scheme::Overdamped:
        step_overdamped(e, u, b, eps, dt, rng);
        break;
      case SamplerOptions::Scheme::Discrete:
        step_discrete_weights(e, u, b, eps, dt, rng);
        break;
      case SamplerOptions::Scheme::Inertial:
        step_inertial(e, inertial, u, b, eps, dt, rng);
        break;
      case SamplerOptions::Scheme::PhiForm:
        step_phi_form(e, cache, u, b, eps, dt, rng);
        break;
    }
    out.ess_trajectory[k + 1] = ess(e);
    out.log_z_trajectory[k + 1] = log_partition_ratio(e);

    const bool want_resample = opt.resample_threshold > 0.0 &&
                               opt.resample_threshold < 1.0 &&
                               out.ess_trajectory[k + 1] < opt.resample_threshold;
    if (want_resample && k + 1 < opt.steps) {
      RngStream rrng(opt.seed, stream::kResample, static_cast<std::uint64_t>(k));
      const auto anc = systematic_ancestors(e.log_w, rrng);
      apply_ancestors(e.x, anc);
      if (opt.scheme == SamplerOptions::Scheme::Inertial && inertial.mu > 0.0)
        apply_ancestors(inertial.r, anc);
      e.log_w.setConstant(log_mean_exp(e.log_w));
      cache.valid = false;
      out.resample_steps.push_back(k + 1);
      ++epoch;
    }
  }
  return out;
}

}  // namespace nets
