#pragma once

#include <nets/common.hpp>
#include <nets/rng.hpp>

#include <vector>

namespace nets {

namespace act {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// SiLU x * sigmoid(x): smooth, with the two derivatives the second-order
// passes need.
inline double silu(double x) { return x * sigmoid(x); }
inline double dsilu(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}
inline double d2silu(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s));
}

}  // namespace act

// Dense feed-forward net, SiLU hidden activations, linear output layer.
// Batched: inputs and all intermediate values keep walkers as columns.
// Beyond plain forward/backward it exposes a forward tangent (jvp), the
// parameter gradient of functions of that tangent (jvp_backward: reverse
// over forward), and the tangent of the input gradient (hvp: forward over
// reverse). Together these cover divergences, Laplacians, and
// time-derivative losses without any graph machinery.
class Mlp {
 public:
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    check(sizes_.size() >= 2, "mlp: need input and output sizes");
    for (int s : sizes_) check(s > 0, "mlp: layer sizes must be positive");
    offsets_.push_back(0);
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
      offsets_.push_back(offsets_.back() + sizes_[l] * sizes_[l - 1]);  // W
      offsets_.push_back(offsets_.back() + sizes_[l]);                  // b
    }
    params_ = Vec::Zero(offsets_.back());
  }

  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }
  int layers() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& sizes() const { return sizes_; }
  Eigen::Index n_params() const { return params_.size(); }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  // Hidden weights at He-style scale, small final layer so the model starts
  // near the zero function, zero biases.
  void init_params(RngStream& rng, double final_scale = 1e-2) {
    for (int l = 1; l <= layers(); ++l) {
      const double fan = static_cast<double>(sizes_[l - 1]);
      double sd = std::sqrt(2.0 / fan);
      if (l == layers()) sd = final_scale * std::sqrt(1.0 / fan);
      auto w = wmap(params_, l);
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = sd * rng.normal();
      bmap(params_, l).setZero();
    }
  }

  struct Cache {
    Mat in;                // (n0, n)
    std::vector<Mat> pre;  // hidden pre-activations h_l, l = 1..L-1
    std::vector<Mat> post; // hidden activations silu(h_l)
  };

  struct Tangent {
    Mat vin;                // tangent of the input, per column
    std::vector<Mat> dpre;  // tangents of hidden pre-activations
    std::vector<Mat> dpost; // tangents of hidden activations
  };

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    check(x.rows() == in_dim(), "mlp forward: input dimension mismatch");
    if (cache) {
      cache->in = x;
      cache->pre.clear();
      cache->post.clear();
    }
    Mat a = x;
    for (int l = 1; l < layers(); ++l) {
      Mat h = (wmap(params_, l) * a).colwise() + bmap(params_, l);
      if (cache) cache->pre.push_back(h);
      a = h.unaryExpr([](double v) { return act::silu(v); });
      if (cache) cache->post.push_back(a);
    }
    return (wmap(params_, layers()) * a).colwise() + bmap(params_, layers());
  }

  // Accumulates d(sum(gy . y))/dparams into gp (sized n_params, zeroed by
  // the caller) and optionally writes the input gradient.
  void backward(const Cache& c, const Mat& gy, Vec* gp, Mat* gx) const {
    const int big = layers();
    Mat delta = gy;
    for (int l = big; l >= 1; --l) {
      const Mat& a_prev = (l == 1) ? c.in : c.post[l - 2];
      if (gp) {
        wmap(*gp, l) += delta * a_prev.transpose();
        bmap(*gp, l) += delta.rowwise().sum();
      }
      if (l > 1) {
        Mat ga = wmap(params_, l).transpose() * delta;
        delta = c.pre[l - 2].unaryExpr([](double v) { return act::dsilu(v); })
                    .cwiseProduct(ga);
      } else if (gx) {
        *gx = wmap(params_, 1).transpose() * delta;
      }
    }
  }

  // Forward tangent: ydot for per-column input tangents vin.
  Mat jvp(const Cache& c, const Mat& vin, Tangent* tan = nullptr) const {
    check(vin.rows() == in_dim() && vin.cols() == c.in.cols(),
          "mlp jvp: tangent shape mismatch");
    if (tan) {
      tan->vin = vin;
      tan->dpre.clear();
      tan->dpost.clear();
    }
    Mat va = vin;
    for (int l = 1; l < layers(); ++l) {
      Mat vh = wmap(params_, l) * va;
      if (tan) tan->dpre.push_back(vh);
      va = c.pre[l - 1]
               .unaryExpr([](double v) { return act::dsilu(v); })
               .cwiseProduct(vh);
      if (tan) tan->dpost.push_back(va);
    }
    return wmap(params_, layers()) * va;
  }

  // Parameter gradient of s = sum(gydot . ydot) + sum(gy . y) in one sweep
  // over the augmented (value, tangent) graph. gy may be null when only the
  // tangent part is needed.
  void jvp_backward(const Cache& c, const Tangent& tan, const Mat& gydot,
                    const Mat* gy, Vec* gp) const {
    const int big = layers();
    Mat mu = gy ? *gy : Mat::Zero(gydot.rows(), gydot.cols());
    Mat mudot = gydot;
    for (int l = big; l >= 1; --l) {
      const Mat& a_prev = (l == 1) ? c.in : c.post[l - 2];
      const Mat& da_prev = (l == 1) ? tan.vin : tan.dpost[l - 2];
      if (gp) {
        wmap(*gp, l) += mu * a_prev.transpose() + mudot * da_prev.transpose();
        bmap(*gp, l) += mu.rowwise().sum();
      }
      if (l > 1) {
        Mat ga = wmap(params_, l).transpose() * mu;
        Mat gadot = wmap(params_, l).transpose() * mudot;
        Mat d1 = c.pre[l - 2].unaryExpr([](double v) { return act::dsilu(v); });
        Mat d2 = c.pre[l - 2].unaryExpr([](double v) { return act::d2silu(v); });
        mu = d1.cwiseProduct(ga) +
             d2.cwiseProduct(tan.dpre[l - 2]).cwiseProduct(gadot);
        mudot = d1.cwiseProduct(gadot);
      }
    }
  }

  // Tangent of the input gradient along tan: returns per-column H v where
  // H is the input Hessian of sum(gy . y). gy must be constant in x.
  Mat hvp(const Cache& c, const Tangent& tan, const Mat& gy) const {
    const int big = layers();
    Mat delta = gy;
    Mat ddelta = Mat::Zero(gy.rows(), gy.cols());
    for (int l = big; l >= 2; --l) {
      Mat ga = wmap(params_, l).transpose() * delta;
      Mat gadot = wmap(params_, l).transpose() * ddelta;
      Mat d1 = c.pre[l - 2].unaryExpr([](double v) { return act::dsilu(v); });
      Mat d2 = c.pre[l - 2].unaryExpr([](double v) { return act::d2silu(v); });
      ddelta = d2.cwiseProduct(tan.dpre[l - 2]).cwiseProduct(ga) +
               d1.cwiseProduct(gadot);
      delta = d1.cwiseProduct(ga);
    }
    return wmap(params_, 1).transpose() * ddelta;
  }

 private:
  Eigen::Map<Mat> wmap(Vec& p, int l) const {
    return Eigen::Map<Mat>(p.data() + offsets_[2 * (l - 1)], sizes_[l],
                           sizes_[l - 1]);
  }
  Eigen::Map<const Mat> wmap(const Vec& p, int l) const {
    return Eigen::Map<const Mat>(p.data() + offsets_[2 * (l - 1)], sizes_[l],
                                 sizes_[l - 1]);
  }
  Eigen::Map<Vec> bmap(Vec& p, int l) const {
    return Eigen::Map<Vec>(p.data() + offsets_[2 * l - 1], sizes_[l]);
  }
  Eigen::Map<const Vec> bmap(const Vec& p, int l) const {
    return Eigen::Map<const Vec>(p.data() + offsets_[2 * l - 1], sizes_[l]);
  }

  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Vec params_;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  Vec m, v;
  long steps = 0;

  void update(Vec& p, const Vec& g) {
    check(p.size() == g.size(), "adam: size mismatch");
    if (m.size() != p.size()) {
      m = Vec::Zero(p.size());
      v = Vec::Zero(p.size());
      steps = 0;
    }
    ++steps;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(beta1, steps);
    const double c2 = 1.0 - std::pow(beta2, steps);
    p.array() -= lr * (m.array() / c1) /
                 ((v.array() / c2).sqrt() + eps);
  }
};

}  // namespace nets
