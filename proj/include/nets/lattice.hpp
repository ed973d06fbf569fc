#pragma once

#include <nets/potentials.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace nets {

// Periodic scalar-field lattice with linearly interpolated couplings. The
// base (t = 0) is the free theory, which keeps exact sampling available.
struct LatticeSpec {
  int extent = 4;             // sites per dimension
  int dims = 2;               // spacetime dimension
  double m2_initial = 1.0;    // mass-squared at t = 0, must stay positive
  double m2_final = 1.0;      // mass-squared at t = 1
  double lambda_final = 0.0;  // quartic coupling at t = 1 (zero at t = 0)

  int volume() const {
    int v = 1;
    for (int d = 0; d < dims; ++d) v *= extent;
    return v;
  }
  double m2(double t) const { return (1.0 - t) * m2_initial + t * m2_final; }
  double lambda(double t) const { return t * lambda_final; }
};

inline void validate(const LatticeSpec& spec) {
  check(spec.extent >= 2, "lattice: extent must be at least 2");
  check(spec.dims >= 1, "lattice: dimension must be at least 1");
  check(spec.m2_initial > 0.0, "lattice: base mass-squared must be positive");
  check(spec.lambda_final >= 0.0, "lattice: quartic coupling must be >= 0");
}

// Forward/backward neighbor site indices per direction, row-major layout
// with periodic wrap-around.
struct NeighborTables {
  std::vector<std::vector<int>> fwd;  // [direction][site]
  std::vector<std::vector<int>> bwd;
};

inline NeighborTables neighbor_tables(const LatticeSpec& spec) {
  const int L = spec.extent, D = spec.dims, v = spec.volume();
  NeighborTables nt;
  nt.fwd.assign(D, std::vector<int>(v));
  nt.bwd.assign(D, std::vector<int>(v));
  std::vector<int> stride(D);
  stride[D - 1] = 1;
  for (int d = D - 2; d >= 0; --d) stride[d] = stride[d + 1] * L;
  for (int s = 0; s < v; ++s) {
    for (int d = 0; d < D; ++d) {
      const int coord = (s / stride[d]) % L;
      nt.fwd[d][s] = s + ((coord + 1) % L - coord) * stride[d];
      nt.bwd[d][s] = s + ((coord + L - 1) % L - coord) * stride[d];
    }
  }
  return nt;
}

// Eigenvalues of the free quadratic form, one per wavevector k = 2*pi*l/L:
// q_k = m^2 + 2D - 2 sum_mu cos k_mu. All positive for m^2 > 0.
inline Vec free_mode_eigenvalues(const LatticeSpec& spec, double m2) {
  const int L = spec.extent, D = spec.dims, v = spec.volume();
  Vec q(v);
  for (int s = 0; s < v; ++s) {
    double acc = m2 + 2.0 * D;
    int rem = s;
    for (int d = D - 1; d >= 0; --d) {
      const int l = rem % L;
      rem /= L;
      acc -= 2.0 * std::cos(2.0 * std::numbers::pi * l / L);
    }
    q(s) = acc;
  }
  return q;
}

// Real orthonormal eigenbasis of the free action: cosine/sine pairs for
// conjugate wavevector pairs, plain cosines (values +-1/sqrt(V)) for the
// self-conjugate modes. Sampling each coefficient as N(0, 1/(2 q_k)) draws
// exactly from exp(-U_0).
struct FourierFreeField {
  Mat basis;        // columns are orthonormal real modes
  Vec eigenvalues;  // q_k per column
  Vec std_dev;      // sqrt(1 / (2 q_k))
};

inline FourierFreeField make_free_field(const LatticeSpec& spec, double m2) {
  check(m2 > 0.0, "free field: mass-squared must be positive");
  const int L = spec.extent, D = spec.dims, v = spec.volume();
  FourierFreeField ff;
  ff.basis.resize(v, v);
  ff.eigenvalues.resize(v);

  std::vector<int> l(D), lneg(D);
  int col = 0;
  for (int s = 0; s < v; ++s) {
    int rem = s, sneg = 0;
    for (int d = D - 1; d >= 0; --d) {
      l[d] = rem % L;
      rem /= L;
      lneg[d] = (L - l[d]) % L;
    }
    for (int d = 0; d < D; ++d) sneg = sneg * L + lneg[d];
    if (sneg < s) continue;  // partner of an earlier wavevector

    double q = m2 + 2.0 * D;
    for (int d = 0; d < D; ++d)
      q -= 2.0 * std::cos(2.0 * std::numbers::pi * l[d] / L);

    const bool self_conjugate = (sneg == s);
    const double norm =
        self_conjugate ? 1.0 / std::sqrt(double(v)) : std::sqrt(2.0 / v);
    const int cos_col = col++;
    const int sin_col = self_conjugate ? -1 : col++;
    ff.eigenvalues(cos_col) = q;
    if (sin_col >= 0) ff.eigenvalues(sin_col) = q;

    for (int site = 0; site < v; ++site) {
      double phase = 0.0;
      int r = site;
      for (int d = D - 1; d >= 0; --d) {
        phase += 2.0 * std::numbers::pi * l[d] * (r % L) / L;
        r /= L;
      }
      ff.basis(site, cos_col) = norm * std::cos(phase);
      if (sin_col >= 0) ff.basis(site, sin_col) = norm * std::sin(phase);
    }
  }
  require(col == v, "free field: basis construction miscounted modes");
  ff.std_dev = (0.5 * ff.eigenvalues.array().inverse()).sqrt().matrix();
  return ff;
}

inline Mat sample_free_field(const FourierFreeField& ff, Eigen::Index n,
                             RngStream& rng) {
  const Eigen::Index v = ff.basis.rows();
  Mat coeffs = rng.normal_mat(v, n);
  coeffs.array().colwise() *= ff.std_dev.array();
  return ff.basis * coeffs;
}

// Per-site marginal variance of the free field: (1/V) sum_k 1/(2 q_k).
inline double free_field_site_variance(const LatticeSpec& spec, double m2) {
  const Vec q = free_mode_eigenvalues(spec, m2);
  return (0.5 * q.array().inverse()).sum() / spec.volume();
}

// log of the free-theory normalizer: Z = pi^{V/2} / sqrt(prod_k q_k).
inline double free_field_log_z(const LatticeSpec& spec, double m2) {
  const Vec q = free_mode_eigenvalues(spec, m2);
  return 0.5 * spec.volume() * std::log(std::numbers::pi) -
         0.5 * q.array().log().sum();
}

// Interpolated quartic lattice action:
//   U_t = sum_x [ -2 sum_mu phi_x phi_{x+mu} + (2D + m2_t) phi_x^2
//                 + lambda_t phi_x^4 ],
// each forward bond counted once, periodic boundary.
class Phi4Potential final : public TimePotential {
 public:
  explicit Phi4Potential(LatticeSpec spec)
      : spec_(spec), tables_(neighbor_tables(spec)) {
    validate(spec_);
    free_ = make_free_field(spec_, spec_.m2_initial);
  }

  const LatticeSpec& spec() const { return spec_; }
  int dim() const override { return spec_.volume(); }

  double energy(double t, const Eigen::Ref<const Vec>& x) const override {
    Vec e;
    eval_cols(t, x, &e, nullptr, nullptr);
    return e(0);
  }
  Vec grad(double t, const Eigen::Ref<const Vec>& x) const override {
    Mat g;
    eval_cols(t, x, nullptr, &g, nullptr);
    return g.col(0);
  }
  double dt_energy(double t, const Eigen::Ref<const Vec>& x) const override {
    Vec dt;
    eval_cols(t, x, nullptr, nullptr, &dt);
    return dt(0);
  }
  void eval_batch(double t, const Mat& X, Vec* energy_out, Mat* grad_out,
                  Vec* dt_out) const override {
    check(X.rows() == dim(), "eval_batch: dimension mismatch");
    eval_cols(t, X, energy_out, grad_out, dt_out);
  }

  bool has_base_sampler() const override { return true; }
  Mat sample_base(Eigen::Index n, RngStream& rng) const override {
    return sample_free_field(free_, n, rng);
  }

  // Exact free energies exist only while the quartic term vanishes.
  bool has_free_energy() const override { return spec_.lambda_final == 0.0; }
  double free_energy(double t) const override {
    require(has_free_energy(), "free energy needs a vanishing quartic path");
    return -free_field_log_z(spec_, spec_.m2(t));
  }
  double dt_free_energy(double t) const override {
    require(has_free_energy(), "free energy needs a vanishing quartic path");
    const Vec q = free_mode_eigenvalues(spec_, spec_.m2(t));
    return 0.5 * (spec_.m2_final - spec_.m2_initial) *
           q.array().inverse().sum();
  }

 private:
  void eval_cols(double t, const Eigen::Ref<const Mat>& X, Vec* energy_out,
                 Mat* grad_out, Vec* dt_out) const {
    const double m2 = spec_.m2(t), lam = spec_.lambda(t);
    const double mass = 2.0 * spec_.dims + m2;
    const Eigen::Index v = X.rows(), n = X.cols();
    const Vec sq = X.array().square().colwise().sum().transpose();
    const Vec quart = X.array().pow(4).colwise().sum().transpose();

    if (energy_out) {
      Vec cross = Vec::Zero(n);
      for (int d = 0; d < spec_.dims; ++d)
        for (Eigen::Index s = 0; s < v; ++s)
          cross += (X.row(s).array() * X.row(tables_.fwd[d][s]).array())
                       .matrix()
                       .transpose();
      *energy_out = -2.0 * cross + mass * sq + lam * quart;
    }
    if (grad_out) {
      grad_out->resize(v, n);
      grad_out->setZero();
      for (int d = 0; d < spec_.dims; ++d)
        for (Eigen::Index s = 0; s < v; ++s)
          grad_out->row(s) -=
              2.0 * (X.row(tables_.fwd[d][s]) + X.row(tables_.bwd[d][s]));
      *grad_out += 2.0 * mass * X;
      if (lam != 0.0) *grad_out += 4.0 * lam * X.array().cube().matrix();
    }
    if (dt_out)
      *dt_out = (spec_.m2_final - spec_.m2_initial) * sq +
                spec_.lambda_final * quart;
  }

  LatticeSpec spec_;
  NeighborTables tables_;
  FourierFreeField free_;
};

inline double magnetization(const Eigen::Ref<const Vec>& field) {
  return field.sum();
}

inline Vec magnetization_batch(const Mat& fields) {
  return fields.colwise().sum().transpose();
}

// Per-sample estimate of the two-point function G(r): the product of field
// values r steps apart, averaged over all sites and directions.
inline Vec two_point_function(const LatticeSpec& spec, const Mat& fields,
                              int r) {
  check(fields.rows() == spec.volume(), "two point: field size mismatch");
  check(r >= 0, "two point: separation must be nonnegative");
  const NeighborTables nt = neighbor_tables(spec);
  const Eigen::Index v = fields.rows();
  Vec acc = Vec::Zero(fields.cols());
  for (int d = 0; d < spec.dims; ++d) {
    for (Eigen::Index s = 0; s < v; ++s) {
      int shifted = static_cast<int>(s);
      for (int step = 0; step < r; ++step) shifted = nt.fwd[d][shifted];
      acc += (fields.row(s).array() * fields.row(shifted).array())
                 .matrix()
                 .transpose();
    }
  }
  return acc / static_cast<double>(v * spec.dims);
}

struct HmcOptions {
  double step_size = 0.1;
  int leapfrog_steps = 10;
  int burn_in = 500;
  int thin = 5;  // chain iterations per retained sample
  // When positive, each trajectory uses leapfrog_steps - U{0..jitter} steps.
  // Randomized lengths break the resonances a fixed-length integrator hits on
  // near-quadratic energies, where some mode rotates by ~pi per trajectory and
  // its square decorrelates arbitrarily slowly.
  int leapfrog_jitter = 0;
};

struct HmcResult {
  Mat samples;        // one column per retained state
  double acceptance;  // fraction of accepted proposals, burn-in included
};

// Metropolis-corrected Hybrid Monte Carlo targeting exp(-U_t). A proposal
// whose energy turns non-finite during integration is rejected and counted.
inline HmcResult hmc_oracle(const TimePotential& u, double t,
                            Eigen::Index n_samples, const HmcOptions& opt,
                            RngStream& rng) {
  check(opt.step_size > 0.0, "hmc: step size must be positive");
  check(opt.leapfrog_steps >= 1, "hmc: need at least one leapfrog step");
  check(opt.thin >= 1, "hmc: thinning interval must be at least 1");
  check(opt.leapfrog_jitter >= 0 && opt.leapfrog_jitter < opt.leapfrog_steps,
        "hmc: jitter must leave at least one leapfrog step");
  const int d = u.dim();
  Vec x = Vec::Zero(d);
  double e = u.energy(t, x);

  HmcResult out;
  out.samples.resize(d, n_samples);
  long accepted = 0, proposed = 0;
  const long total_iters =
      opt.burn_in + static_cast<long>(n_samples) * opt.thin;
  Eigen::Index kept = 0;
  for (long it = 0; it < total_iters; ++it) {
    Vec p = rng.normal_vec(d);
    const int leaps =
        opt.leapfrog_jitter > 0
            ? opt.leapfrog_steps -
                  static_cast<int>(rng.uniform_index(opt.leapfrog_jitter + 1))
            : opt.leapfrog_steps;
    const double h0 = e + 0.5 * p.squaredNorm();
    Vec y = x;
    p -= 0.5 * opt.step_size * u.grad(t, y);
    for (int leap = 0; leap < leaps; ++leap) {
      y += opt.step_size * p;
      const double scale = (leap + 1 == leaps) ? 0.5 : 1.0;
      p -= scale * opt.step_size * u.grad(t, y);
    }
    const double e1 = u.energy(t, y);
    const double h1 = e1 + 0.5 * p.squaredNorm();
    ++proposed;
    const bool ok = std::isfinite(h1) && rng.uniform() < std::exp(h0 - h1);
    if (ok) {
      x = y;
      e = e1;
      ++accepted;
    }
    if (it >= opt.burn_in && (it - opt.burn_in) % opt.thin == opt.thin - 1 &&
        kept < n_samples)
      out.samples.col(kept++) = x;
  }
  require(kept == n_samples, "hmc: sample bookkeeping failed");
  out.acceptance = static_cast<double>(accepted) / proposed;
  return out;
}

struct TiOptions {
  int grid_points = 21;        // trapezoid knots on [0, 1]
  Eigen::Index samples = 2000;  // HMC draws per knot
  HmcOptions hmc;
};

struct TiResult {
  double log_z;  // log(Z_1 / Z_0)
  double se;
};

// Thermodynamic integration: log(Z_1/Z_0) = -int_0^1 E_t[dU/dt] dt with the
// expectations from independent HMC chains on a trapezoid grid. The standard
// error combines per-knot Monte Carlo errors in quadrature (discretization
// bias is separate and shrinks with the grid).
inline TiResult thermodynamic_integration(const TimePotential& u,
                                          const TiOptions& opt,
                                          RngStream& rng) {
  check(opt.grid_points >= 2, "ti: need at least two grid points");
  const int g = opt.grid_points;
  double total = 0.0, var = 0.0;
  for (int i = 0; i < g; ++i) {
    const double t = static_cast<double>(i) / (g - 1);
    const double w = (i == 0 || i == g - 1 ? 0.5 : 1.0) / (g - 1);
    const HmcResult chain = hmc_oracle(u, t, opt.samples, opt.hmc, rng);
    Vec dt;
    u.eval_batch(t, chain.samples, nullptr, nullptr, &dt);
    const double mean = dt.mean();
    const double sd = std::sqrt((dt.array() - mean).square().sum() /
                                (dt.size() - 1.0));
    total += w * mean;
    var += w * w * sd * sd / dt.size();
  }
  return {-total, std::sqrt(var)};
}

}  // namespace nets
