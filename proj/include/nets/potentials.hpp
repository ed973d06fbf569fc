#pragma once

#include <nets/common.hpp>
#include <nets/rng.hpp>

#include <memory>
#include <utility>
#include <vector>

namespace nets {

// Energy at a single fixed time; used for interpolation endpoints and as a
// frozen view of an annealed family.
class FixedPotential {
 public:
  virtual ~FixedPotential() = default;
  virtual int dim() const = 0;
  virtual double energy(const Eigen::Ref<const Vec>& x) const = 0;
  virtual Vec grad(const Eigen::Ref<const Vec>& x) const = 0;
  virtual bool has_exact_sampler() const { return false; }
  virtual Mat sample(Eigen::Index, RngStream&) const {
    throw std::runtime_error("no exact sampler for this potential");
  }
};

// Annealed family U_t(x), t in [0,1]. Batched evaluation takes walkers as
// columns of a (dim, n) matrix; any output pointer may be null.
class TimePotential {
 public:
  virtual ~TimePotential() = default;
  virtual int dim() const = 0;
  virtual double energy(double t, const Eigen::Ref<const Vec>& x) const = 0;
  virtual Vec grad(double t, const Eigen::Ref<const Vec>& x) const = 0;
  virtual double dt_energy(double t, const Eigen::Ref<const Vec>& x) const = 0;

  virtual void eval_batch(double t, const Mat& X, Vec* energy_out,
                          Mat* grad_out, Vec* dt_out) const {
    check(X.rows() == dim(), "eval_batch: dimension mismatch");
    const Eigen::Index n = X.cols();
    if (energy_out) energy_out->resize(n);
    if (grad_out) grad_out->resize(X.rows(), n);
    if (dt_out) dt_out->resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (energy_out) (*energy_out)[i] = energy(t, X.col(i));
      if (grad_out) grad_out->col(i) = grad(t, X.col(i));
      if (dt_out) (*dt_out)[i] = dt_energy(t, X.col(i));
    }
  }

  virtual bool has_free_energy() const { return false; }
  virtual double free_energy(double) const {
    throw std::runtime_error("free energy unavailable for this potential");
  }
  virtual double dt_free_energy(double) const {
    throw std::runtime_error("free energy unavailable for this potential");
  }

  virtual bool has_base_sampler() const { return false; }
  virtual Mat sample_base(Eigen::Index, RngStream&) const {
    throw std::runtime_error("no exact base sampler for this potential");
  }

  // Exact draw from rho_t where the family keeps it tractable.
  virtual bool has_exact_sampler() const { return false; }
  virtual Mat sample_exact(double, Eigen::Index, RngStream&) const {
    throw std::runtime_error("no exact time-t sampler for this potential");
  }
};

class IsotropicGaussian final : public FixedPotential {
 public:
  IsotropicGaussian(int dim, double sigma, Vec mean = Vec())
      : dim_(dim), sigma_(sigma), mean_(std::move(mean)) {
    check(dim_ > 0, "IsotropicGaussian: dim must be positive");
    check(sigma_ > 0.0, "IsotropicGaussian: sigma must be positive");
    if (mean_.size() == 0) mean_ = Vec::Zero(dim_);
    check(mean_.size() == dim_, "IsotropicGaussian: mean size mismatch");
  }

  int dim() const override { return dim_; }
  double energy(const Eigen::Ref<const Vec>& x) const override {
    return 0.5 * (x - mean_).squaredNorm() / (sigma_ * sigma_);
  }
  Vec grad(const Eigen::Ref<const Vec>& x) const override {
    return (x - mean_) / (sigma_ * sigma_);
  }
  bool has_exact_sampler() const override { return true; }
  Mat sample(Eigen::Index n, RngStream& rng) const override {
    return (sigma_ * rng.normal_mat(dim_, n)).colwise() + mean_;
  }

 private:
  int dim_;
  double sigma_;
  Vec mean_;
};

class FrozenPotential final : public FixedPotential {
 public:
  FrozenPotential(std::shared_ptr<const TimePotential> u, double t)
      : u_(std::move(u)), t_(t) {
    check(u_ != nullptr, "FrozenPotential: null potential");
  }
  int dim() const override { return u_->dim(); }
  double energy(const Eigen::Ref<const Vec>& x) const override {
    return u_->energy(t_, x);
  }
  Vec grad(const Eigen::Ref<const Vec>& x) const override {
    return u_->grad(t_, x);
  }
  bool has_exact_sampler() const override { return u_->has_exact_sampler(); }
  Mat sample(Eigen::Index n, RngStream& rng) const override {
    return u_->sample_exact(t_, n, rng);
  }

 private:
  std::shared_ptr<const TimePotential> u_;
  double t_;
};

// U_t = (1-t) U0 + t U1 for two fixed endpoints.
class LinearInterpolationPotential final : public TimePotential {
 public:
  LinearInterpolationPotential(std::shared_ptr<const FixedPotential> u0,
                               std::shared_ptr<const FixedPotential> u1)
      : u0_(std::move(u0)), u1_(std::move(u1)) {
    check(u0_ != nullptr && u1_ != nullptr,
          "LinearInterpolationPotential: null endpoint");
    check(u0_->dim() == u1_->dim(),
          "LinearInterpolationPotential: endpoint dimensions differ");
  }

  int dim() const override { return u0_->dim(); }
  double energy(double t, const Eigen::Ref<const Vec>& x) const override {
    return (1.0 - t) * u0_->energy(x) + t * u1_->energy(x);
  }
  Vec grad(double t, const Eigen::Ref<const Vec>& x) const override {
    return (1.0 - t) * u0_->grad(x) + t * u1_->grad(x);
  }
  double dt_energy(double, const Eigen::Ref<const Vec>& x) const override {
    return u1_->energy(x) - u0_->energy(x);
  }
  bool has_base_sampler() const override { return u0_->has_exact_sampler(); }
  Mat sample_base(Eigen::Index n, RngStream& rng) const override {
    return u0_->sample(n, rng);
  }

 private:
  std::shared_ptr<const FixedPotential> u0_;
  std::shared_ptr<const FixedPotential> u1_;
};

inline std::shared_ptr<LinearInterpolationPotential> make_linear_interpolation(
    std::shared_ptr<const FixedPotential> u0,
    std::shared_ptr<const FixedPotential> u1) {
  return std::make_shared<LinearInterpolationPotential>(std::move(u0),
                                                        std::move(u1));
}

// Gaussian with affine precision path A_t = A0 + t (A1 - A0) and affine mean
// path b_t = b0 + t (b1 - b0). Free energy and exact samplers are closed
// form, which makes this the main analytic test bed.
class MovingGaussianPotential final : public TimePotential {
 public:
  MovingGaussianPotential(Mat prec0, Mat prec1, Vec mean0, Vec mean1)
      : p0_(std::move(prec0)),
        p1_(std::move(prec1)),
        m0_(std::move(mean0)),
        m1_(std::move(mean1)) {
    const auto d = m0_.size();
    check(d > 0, "MovingGaussianPotential: empty mean");
    check(m1_.size() == d && p0_.rows() == d && p0_.cols() == d &&
              p1_.rows() == d && p1_.cols() == d,
          "MovingGaussianPotential: shape mismatch");
    check(p0_.isApprox(p0_.transpose(), 1e-12) &&
              p1_.isApprox(p1_.transpose(), 1e-12),
          "MovingGaussianPotential: precision must be symmetric");
    dp_ = p1_ - p0_;
    dm_ = m1_ - m0_;
  }

  static MovingGaussianPotential isotropic(int dim, double prec0, double prec1,
                                           Vec mean0 = Vec(),
                                           Vec mean1 = Vec()) {
    if (mean0.size() == 0) mean0 = Vec::Zero(dim);
    if (mean1.size() == 0) mean1 = Vec::Zero(dim);
    return MovingGaussianPotential(prec0 * Mat::Identity(dim, dim),
                                   prec1 * Mat::Identity(dim, dim),
                                   std::move(mean0), std::move(mean1));
  }

  int dim() const override { return static_cast<int>(m0_.size()); }
  Mat precision(double t) const { return p0_ + t * dp_; }
  const Mat& dprecision() const { return dp_; }
  Vec mean(double t) const { return m0_ + t * dm_; }
  const Vec& dmean() const { return dm_; }

  double energy(double t, const Eigen::Ref<const Vec>& x) const override {
    Vec xc = x - mean(t);
    return 0.5 * xc.dot(precision(t) * xc);
  }
  Vec grad(double t, const Eigen::Ref<const Vec>& x) const override {
    return precision(t) * (x - mean(t));
  }
  double dt_energy(double t, const Eigen::Ref<const Vec>& x) const override {
    Vec xc = x - mean(t);
    return -dm_.dot(precision(t) * xc) + 0.5 * xc.dot(dp_ * xc);
  }

  void eval_batch(double t, const Mat& X, Vec* energy_out, Mat* grad_out,
                  Vec* dt_out) const override {
    check(X.rows() == dim(), "eval_batch: dimension mismatch");
    Mat xc = X.colwise() - mean(t);
    Mat g = precision(t) * xc;
    if (energy_out)
      *energy_out = 0.5 * (xc.array() * g.array()).colwise().sum().transpose();
    if (dt_out) {
      Mat h = dp_ * xc;
      *dt_out =
          (0.5 * (xc.array() * h.array()).colwise().sum()).transpose().matrix() -
          (dm_.transpose() * g).transpose();
    }
    if (grad_out) *grad_out = std::move(g);
  }

  // (F_t, dF_t/dt); fails on a non-positive-definite precision.
  std::pair<double, double> reference(double t) const {
    const Mat a = precision(t);
    Eigen::LLT<Mat> llt(a);
    require(llt.info() == Eigen::Success,
            "moving Gaussian: precision matrix not positive definite");
    double half_logdet = 0.0;
    for (int i = 0; i < dim(); ++i)
      half_logdet += std::log(llt.matrixL()(i, i));
    const double f =
        -0.5 * dim() * std::log(2.0 * M_PI) + half_logdet;
    const double df = 0.5 * llt.solve(dp_).trace();
    return {f, df};
  }

  bool has_free_energy() const override { return true; }
  double free_energy(double t) const override { return reference(t).first; }
  double dt_free_energy(double t) const override { return reference(t).second; }

  bool has_base_sampler() const override { return true; }
  Mat sample_base(Eigen::Index n, RngStream& rng) const override {
    return sample_exact(0.0, n, rng);
  }
  bool has_exact_sampler() const override { return true; }
  Mat sample_exact(double t, Eigen::Index n, RngStream& rng) const override {
    Eigen::LLT<Mat> llt(precision(t));
    require(llt.info() == Eigen::Success,
            "moving Gaussian: precision matrix not positive definite");
    Mat z = rng.normal_mat(dim(), n);
    // A = L L^T, so x = mean + L^{-T} z has covariance A^{-1}.
    Mat x = llt.matrixU().solve(z);
    return x.colwise() + mean(t);
  }

 private:
  Mat p0_, p1_, dp_;
  Vec m0_, m1_, dm_;
};

// Mixture of isotropic Gaussians whose means are pulled in linearly from the
// origin: component i sits at t*mu_i with shared variance
// var(t) = (1-t) base_sigma^2 + t sigma^2. Every slice is a normalized
// mixture, so F_t = 0 identically.
class GmmPotential final : public TimePotential {
 public:
  GmmPotential(Mat means, double sigma, double base_sigma, Vec weights = Vec())
      : means_(std::move(means)), s1sq_(sigma * sigma),
        s0sq_(base_sigma * base_sigma) {
    check(means_.size() > 0, "GmmPotential: no components");
    check(sigma > 0.0 && base_sigma > 0.0, "GmmPotential: sigma must be positive");
    const auto m = means_.cols();
    if (weights.size() == 0)
      weights = Vec::Constant(m, 1.0 / static_cast<double>(m));
    check(weights.size() == m, "GmmPotential: weight count mismatch");
    check(weights.minCoeff() > 0.0, "GmmPotential: weights must be positive");
    logw_ = (weights / weights.sum()).array().log();
    mu_sq_ = means_.colwise().squaredNorm().transpose();
  }

  int dim() const override { return static_cast<int>(means_.rows()); }
  Eigen::Index components() const { return means_.cols(); }
  const Mat& means() const { return means_; }
  double var(double t) const { return (1.0 - t) * s0sq_ + t * s1sq_; }
  double dvar() const { return s1sq_ - s0sq_; }

  double energy(double t, const Eigen::Ref<const Vec>& x) const override {
    return -log_sum_exp(log_kernels(t, x));
  }
  Vec grad(double t, const Eigen::Ref<const Vec>& x) const override {
    Vec p = softmax(log_kernels(t, x));
    return (x - t * (means_ * p)) / var(t);
  }
  double dt_energy(double t, const Eigen::Ref<const Vec>& x) const override {
    Vec p = softmax(log_kernels(t, x));
    const double v = var(t);
    double out = 0.0;
    for (Eigen::Index i = 0; i < means_.cols(); ++i) {
      Vec xc = x - t * means_.col(i);
      double ds = xc.dot(means_.col(i)) / v +
                  xc.squaredNorm() * dvar() / (2.0 * v * v) -
                  0.5 * dim() * dvar() / v;
      out -= p[i] * ds;
    }
    return out;
  }

  void eval_batch(double t, const Mat& X, Vec* energy_out, Mat* grad_out,
                  Vec* dt_out) const override {
    check(X.rows() == dim(), "eval_batch: dimension mismatch");
    const Eigen::Index n = X.cols();
    const double v = var(t);
    Mat dots = means_.transpose() * X;  // (m, n)
    Vec xsq = X.colwise().squaredNorm().transpose();
    // rsq(i, j) = |x_j - t mu_i|^2
    Mat rsq = (-2.0 * t) * dots;
    rsq.colwise() += t * t * mu_sq_;
    rsq.rowwise() += xsq.transpose();
    Mat logk = (-0.5 / v) * rsq;
    logk.colwise() += logw_;
    logk.array() -= 0.5 * dim() * std::log(2.0 * M_PI * v);
    Vec lse(n);
    for (Eigen::Index j = 0; j < n; ++j) lse[j] = log_sum_exp(logk.col(j));
    if (energy_out) *energy_out = -lse;
    if (grad_out || dt_out) {
      Mat p = (logk.rowwise() - lse.transpose()).array().exp();
      if (grad_out)
        *grad_out = (X - t * (means_ * p)) / v;
      if (dt_out) {
        // ds(i, j)/dt stacked in the same (m, n) layout as p
        Mat ds = (dots.colwise() - t * mu_sq_) / v +
                 (dvar() / (2.0 * v * v)) * rsq;
        ds.array() -= 0.5 * dim() * dvar() / v;
        *dt_out = -(p.array() * ds.array()).colwise().sum().transpose();
      }
    }
  }

  bool has_free_energy() const override { return true; }
  double free_energy(double) const override { return 0.0; }
  double dt_free_energy(double) const override { return 0.0; }

  bool has_base_sampler() const override { return true; }
  Mat sample_base(Eigen::Index n, RngStream& rng) const override {
    return sample_exact(0.0, n, rng);
  }
  bool has_exact_sampler() const override { return true; }
  Mat sample_exact(double t, Eigen::Index n, RngStream& rng) const override {
    Vec w = logw_.array().exp();
    Mat x(dim(), n);
    const double sd = std::sqrt(var(t));
    for (Eigen::Index j = 0; j < n; ++j) {
      double u = rng.uniform(), acc = 0.0;
      Eigen::Index pick = means_.cols() - 1;
      for (Eigen::Index i = 0; i < means_.cols(); ++i) {
        acc += w[i];
        if (u < acc) { pick = i; break; }
      }
      x.col(j) = t * means_.col(pick) + sd * rng.normal_vec(dim());
    }
    return x;
  }

 private:
  Vec log_kernels(double t, const Eigen::Ref<const Vec>& x) const {
    const double v = var(t);
    Vec s(means_.cols());
    for (Eigen::Index i = 0; i < means_.cols(); ++i)
      s[i] = logw_[i] - 0.5 * dim() * std::log(2.0 * M_PI * v) -
             (x - t * means_.col(i)).squaredNorm() / (2.0 * v);
    return s;
  }

  Mat means_;
  Vec logw_, mu_sq_;
  double s1sq_, s0sq_;
};

// Anneal from a standard normal into Neal's funnel
// x_0 ~ N(0, sigma^2), x_{1:d-1} | x_0 ~ N(0, exp(x_0)):
//   U_t(x) = 1/2 x_0^2 (1 - t + t/sigma^2)
//          + 1/2 exp(-t x_0) sum_{i>=1} x_i^2 + (d-1)/2 t x_0.
// The last term keeps every slice normalized in the x_0 marginal, so both
// F_t and exact sampling stay closed form along the whole path.
class FunnelPotential final : public TimePotential {
 public:
  explicit FunnelPotential(int dim = 10, double sigma = 3.0)
      : dim_(dim), sigma_(sigma) {
    check(dim_ >= 2, "FunnelPotential: dim must be at least 2");
    check(sigma_ > 0.0, "FunnelPotential: sigma must be positive");
  }

  int dim() const override { return dim_; }
  double marginal_prec(double t) const {
    return 1.0 - t + t / (sigma_ * sigma_);
  }

  double energy(double t, const Eigen::Ref<const Vec>& x) const override {
    const double x0 = x[0];
    const double tail = x.tail(dim_ - 1).squaredNorm();
    return 0.5 * x0 * x0 * marginal_prec(t) +
           0.5 * std::exp(-t * x0) * tail + 0.5 * (dim_ - 1) * t * x0;
  }
  Vec grad(double t, const Eigen::Ref<const Vec>& x) const override {
    const double x0 = x[0];
    const double e = std::exp(-t * x0);
    const double tail = x.tail(dim_ - 1).squaredNorm();
    Vec g(dim_);
    g[0] = x0 * marginal_prec(t) - 0.5 * t * e * tail + 0.5 * (dim_ - 1) * t;
    g.tail(dim_ - 1) = e * x.tail(dim_ - 1);
    return g;
  }
  double dt_energy(double t, const Eigen::Ref<const Vec>& x) const override {
    const double x0 = x[0];
    const double tail = x.tail(dim_ - 1).squaredNorm();
    return 0.5 * x0 * x0 * (1.0 / (sigma_ * sigma_) - 1.0) -
           0.5 * x0 * std::exp(-t * x0) * tail + 0.5 * (dim_ - 1) * x0;
  }

  void eval_batch(double t, const Mat& X, Vec* energy_out, Mat* grad_out,
                  Vec* dt_out) const override {
    check(X.rows() == dim_, "eval_batch: dimension mismatch");
    const auto x0 = X.row(0).transpose().array();
    Eigen::ArrayXd tail =
        X.bottomRows(dim_ - 1).colwise().squaredNorm().transpose().array();
    Eigen::ArrayXd e = (-t * x0).exp();
    const double a = marginal_prec(t);
    if (energy_out)
      *energy_out = (0.5 * a * x0.square() + 0.5 * e * tail +
                     0.5 * (dim_ - 1) * t * x0).matrix();
    if (grad_out) {
      grad_out->resize(dim_, X.cols());
      grad_out->row(0) = (a * x0 - 0.5 * t * e * tail + 0.5 * (dim_ - 1) * t)
                             .transpose().matrix();
      grad_out->bottomRows(dim_ - 1) =
          X.bottomRows(dim_ - 1).array().rowwise() * e.transpose();
    }
    if (dt_out)
      *dt_out = (0.5 * (1.0 / (sigma_ * sigma_) - 1.0) * x0.square() -
                 0.5 * x0 * e * tail + 0.5 * (dim_ - 1) * x0).matrix();
  }

  bool has_free_energy() const override { return true; }
  double free_energy(double t) const override {
    return -0.5 * dim_ * std::log(2.0 * M_PI) + 0.5 * std::log(marginal_prec(t));
  }
  double dt_free_energy(double t) const override {
    return 0.5 * (1.0 / (sigma_ * sigma_) - 1.0) / marginal_prec(t);
  }

  bool has_base_sampler() const override { return true; }
  Mat sample_base(Eigen::Index n, RngStream& rng) const override {
    return sample_exact(0.0, n, rng);
  }
  bool has_exact_sampler() const override { return true; }
  Mat sample_exact(double t, Eigen::Index n, RngStream& rng) const override {
    Mat x = rng.normal_mat(dim_, n);
    const double sd0 = 1.0 / std::sqrt(marginal_prec(t));
    for (Eigen::Index j = 0; j < n; ++j) {
      x(0, j) *= sd0;
      x.col(j).tail(dim_ - 1) *= std::exp(0.5 * t * x(0, j));
    }
    return x;
  }

 private:
  int dim_;
  double sigma_;
};

// Mixture of multivariate Student-t components (identity shape, integer
// degrees of freedom) whose locations are pulled in linearly from the
// origin. At t = 0 all locations coincide, so the base is one standard
// Student-t. Slices are normalized mixtures: F_t = 0.
class StudentTMixturePotential final : public TimePotential {
 public:
  StudentTMixturePotential(Mat means, int nu = 2, Vec weights = Vec())
      : means_(std::move(means)), nu_(nu) {
    check(means_.size() > 0, "StudentTMixturePotential: no components");
    check(nu_ >= 1, "StudentTMixturePotential: nu must be positive");
    const auto m = means_.cols();
    if (weights.size() == 0)
      weights = Vec::Constant(m, 1.0 / static_cast<double>(m));
    check(weights.size() == m, "StudentTMixturePotential: weight count mismatch");
    check(weights.minCoeff() > 0.0,
          "StudentTMixturePotential: weights must be positive");
    logw_ = (weights / weights.sum()).array().log();
    const double d = static_cast<double>(dim());
    logc_ = std::lgamma(0.5 * (nu_ + d)) - std::lgamma(0.5 * nu_) -
            0.5 * d * std::log(nu_ * M_PI);
  }

  int dim() const override { return static_cast<int>(means_.rows()); }
  int nu() const { return nu_; }

  double energy(double t, const Eigen::Ref<const Vec>& x) const override {
    return -log_sum_exp(log_kernels(t, x));
  }
  Vec grad(double t, const Eigen::Ref<const Vec>& x) const override {
    Vec p = softmax(log_kernels(t, x));
    Vec g = Vec::Zero(dim());
    for (Eigen::Index i = 0; i < means_.cols(); ++i) {
      Vec xc = x - t * means_.col(i);
      g += p[i] * (nu_ + dim()) / (nu_ + xc.squaredNorm()) * xc;
    }
    return g;
  }
  double dt_energy(double t, const Eigen::Ref<const Vec>& x) const override {
    Vec p = softmax(log_kernels(t, x));
    double out = 0.0;
    for (Eigen::Index i = 0; i < means_.cols(); ++i) {
      Vec xc = x - t * means_.col(i);
      out -= p[i] * (nu_ + dim()) / (nu_ + xc.squaredNorm()) *
             xc.dot(means_.col(i));
    }
    return out;
  }

  bool has_free_energy() const override { return true; }
  double free_energy(double) const override { return 0.0; }
  double dt_free_energy(double) const override { return 0.0; }

  bool has_base_sampler() const override { return true; }
  Mat sample_base(Eigen::Index n, RngStream& rng) const override {
    return sample_exact(0.0, n, rng);
  }
  bool has_exact_sampler() const override { return true; }
  Mat sample_exact(double t, Eigen::Index n, RngStream& rng) const override {
    Vec w = logw_.array().exp();
    Mat x(dim(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      double u = rng.uniform(), acc = 0.0;
      Eigen::Index pick = means_.cols() - 1;
      for (Eigen::Index i = 0; i < means_.cols(); ++i) {
        acc += w[i];
        if (u < acc) { pick = i; break; }
      }
      double chisq = 0.0;
      for (int k = 0; k < nu_; ++k) chisq += sqr(rng.normal());
      x.col(j) = t * means_.col(pick) +
                 std::sqrt(nu_ / chisq) * rng.normal_vec(dim());
    }
    return x;
  }

 private:
  Vec log_kernels(double t, const Eigen::Ref<const Vec>& x) const {
    Vec s(means_.cols());
    for (Eigen::Index i = 0; i < means_.cols(); ++i) {
      const double rsq = (x - t * means_.col(i)).squaredNorm();
      s[i] = logw_[i] + logc_ -
             0.5 * (nu_ + dim()) * std::log1p(rsq / nu_);
    }
    return s;
  }

  Mat means_;
  Vec logw_;
  int nu_;
  double logc_;
};

// The 40 component means of the standard planar mixture benchmark.
inline Mat gmm40_means() {
  static const double raw[40][2] = {
      {-0.2995, 21.4577},   {-32.9218, -29.4376}, {-15.4062, 10.7263},
      {-0.7925, 31.7156},   {-3.5498, 10.5845},   {-12.0885, -7.8626},
      {-38.2139, -26.4913}, {-16.4889, 1.4817},   {15.8134, 24.0009},
      {-27.1176, -17.4185}, {14.5287, 33.2155},   {-8.2320, 29.9325},
      {-6.4473, 4.2326},    {36.2190, -37.1068},  {-25.1815, -10.1266},
      {-15.5920, 34.5600},  {-25.9272, -18.4133}, {-27.9456, -37.4624},
      {-23.3496, 34.3839},  {17.8487, 19.3869},   {2.1037, -20.5073},
      {6.7674, -37.3478},   {-28.9026, -20.6212}, {25.2375, 23.4529},
      {-17.7398, -1.4433},  {25.5824, 39.7653},   {15.8753, 5.4037},
      {26.8195, -23.5521},  {7.4538, -31.0122},   {-27.7234, -20.6633},
      {18.0989, 16.0864},   {-23.6941, 12.0843},  {21.9589, -5.0487},
      {1.5273, 9.2682},     {24.8151, 38.4078},   {-30.8249, -14.6588},
      {15.7204, 33.1420},   {34.8083, 35.2943},   {7.9606, -34.7833},
      {3.6797, -25.0242}};
  Mat m(2, 40);
  for (int i = 0; i < 40; ++i) {
    m(0, i) = raw[i][0];
    m(1, i) = raw[i][1];
  }
  return m;
}

// Component means on a circle, the usual planar multimodal layout.
inline Mat ring_means(int modes, double radius) {
  Mat m(2, modes);
  for (int i = 0; i < modes; ++i) {
    const double a = 2.0 * M_PI * i / modes;
    m(0, i) = radius * std::cos(a);
    m(1, i) = radius * std::sin(a);
  }
  return m;
}

}  // namespace nets
