#pragma once

#include <nets/potentials.hpp>
#include <nets/rng.hpp>

#include <memory>

namespace nets {

// Additional transport drift b(t, x), batched over walker columns. Models
// that are gradients of a scalar (b = grad phi) also expose phi and its
// time derivative for the Laplacian-free weight path.
class DriftModel {
 public:
  virtual ~DriftModel() = default;
  virtual int dim() const = 0;

  // b(t, X); div_out, when requested, gets the exact divergence per walker.
  virtual void drift(double t, const Mat& X, Mat& b_out,
                     Vec* div_out) const = 0;

  virtual bool has_potential() const { return false; }
  // phi, grad phi (equals the drift), and dphi/dt; any output may be null.
  virtual void potential(double t, const Mat& X, Vec* phi_out, Mat* grad_out,
                         Vec* dt_out) const {
    (void)t; (void)X; (void)phi_out; (void)grad_out; (void)dt_out;
    throw std::runtime_error("drift model has no scalar potential");
  }
};

class ZeroDrift final : public DriftModel {
 public:
  explicit ZeroDrift(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  void drift(double, const Mat& X, Mat& b_out, Vec* div_out) const override {
    b_out.setZero(X.rows(), X.cols());
    if (div_out) div_out->setZero(X.cols());
  }
  bool has_potential() const override { return true; }
  void potential(double, const Mat& X, Vec* phi_out, Mat* grad_out,
                 Vec* dt_out) const override {
    if (phi_out) phi_out->setZero(X.cols());
    if (grad_out) grad_out->setZero(X.rows(), X.cols());
    if (dt_out) dt_out->setZero(X.cols());
  }

 private:
  int dim_;
};

// Exact transport drift for a moving Gaussian family: b(t, x) = mdot + S (x - m)
// where S solves the Lyapunov equation A S + S A = -Adot. The drift is the
// gradient of the quadratic phi(t, x) = mdot . (x - m) + 1/2 (x-m)^T S (x-m).
class AnalyticGaussianDrift final : public DriftModel {
 public:
  explicit AnalyticGaussianDrift(MovingGaussianPotential family)
      : family_(std::move(family)) {}

  int dim() const override { return family_.dim(); }

  Mat transport_matrix(double t) const {
    return lyapunov(family_.precision(t), -family_.dprecision());
  }

  void drift(double t, const Mat& X, Mat& b_out, Vec* div_out) const override {
    const Mat s = transport_matrix(t);
    Mat xc = X.colwise() - family_.mean(t);
    b_out = (s * xc).colwise() + family_.dmean();
    if (div_out) div_out->setConstant(X.cols(), s.trace());
  }

  bool has_potential() const override { return true; }
  void potential(double t, const Mat& X, Vec* phi_out, Mat* grad_out,
                 Vec* dt_out) const override {
    const Mat s = transport_matrix(t);
    const Vec md = family_.dmean();
    Mat xc = X.colwise() - family_.mean(t);
    Mat sxc = s * xc;
    if (phi_out)
      *phi_out =
          (md.transpose() * xc).transpose() +
          (0.5 * (xc.array() * sxc.array()).colwise().sum()).transpose().matrix();
    if (grad_out) *grad_out = sxc.colwise() + md;
    if (dt_out) {
      // d/dt of phi along the affine paths; Sdot solves
      // A Sdot + Sdot A = -(Adot S + S Adot).
      const Mat ad = family_.dprecision();
      const Mat sdot = lyapunov(family_.precision(t), -(ad * s + s * ad));
      *dt_out = (0.5 * (xc.array() * (sdot * xc).array()).colwise().sum())
                    .transpose()
                    .matrix() -
                (md.transpose() * sxc).transpose();
      dt_out->array() -= md.squaredNorm();
    }
  }

 private:
  // Solves A Y + Y A = C for symmetric positive definite A.
  static Mat lyapunov(const Mat& a, const Mat& c) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    require(es.info() == Eigen::Success, "lyapunov: eigensolve failed");
    const Mat& q = es.eigenvectors();
    const Vec& lam = es.eigenvalues();
    require(lam.minCoeff() > 0.0, "lyapunov: precision not positive definite");
    Mat m = q.transpose() * c * q;
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      for (Eigen::Index j = 0; j < lam.size(); ++j)
        m(i, j) /= lam[i] + lam[j];
    return q * m * q.transpose();
  }

  MovingGaussianPotential family_;
};

// Stochastic divergence estimate with symmetric finite differences:
// mean over probes of eta . (b(x + delta eta) - b(x - delta eta)) / (2 delta).
// Bias is O(delta^2); probes are standard normal.
inline Vec hutchinson_divergence(const DriftModel& b, double t, const Mat& X,
                                 int probes, double delta, RngStream& rng) {
  check(probes > 0, "hutchinson_divergence: need at least one probe");
  check(delta > 0.0, "hutchinson_divergence: delta must be positive");
  Vec acc = Vec::Zero(X.cols());
  Mat bp, bm;
  for (int p = 0; p < probes; ++p) {
    Mat eta = rng.normal_mat(X.rows(), X.cols());
    b.drift(t, X + delta * eta, bp, nullptr);
    b.drift(t, X - delta * eta, bm, nullptr);
    acc += ((bp - bm).array() * eta.array()).colwise().sum().transpose().matrix();
  }
  return acc / (2.0 * delta * probes);
}

// Monte Carlo solution of the frozen-time Feynman-Kac representation
//   phi_t(x) = int_0^inf E[ dF_t - dtU_t(X_tau) ] dtau,
// with X following overdamped Langevin dynamics in U_t (unit temperature).
// Returns one phi estimate per column of X0.
inline Vec feynman_kac_phi(const TimePotential& u, double t, const Mat& X0,
                           double df_dt, double tau_max, int steps, int chains,
                           RngStream& rng) {
  check(steps > 0 && chains > 0 && tau_max > 0.0,
        "feynman_kac_phi: bad quadrature parameters");
  const double dtau = tau_max / steps;
  Vec acc = Vec::Zero(X0.cols());
  for (int c = 0; c < chains; ++c) {
    Mat x = X0;
    for (int k = 0; k < steps; ++k) {
      Vec dtu;
      Mat g;
      u.eval_batch(t, x, nullptr, &g, &dtu);
      acc.array() += dtau * (df_dt - dtu.array());
      x += -dtau * g + std::sqrt(2.0 * dtau) * rng.normal_mat(x.rows(), x.cols());
    }
  }
  return acc / chains;
}

}  // namespace nets
