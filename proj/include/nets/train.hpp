#pragma once

#include <nets/ensemble.hpp>
#include <nets/models.hpp>
#include <nets/sde.hpp>

#include <json.hpp>

#include <memory>
#include <ostream>
#include <vector>

namespace nets {

enum class DriftKind { kVector, kPhi };
enum class Objective { kPinn, kActionMatching };
enum class DtFreeEnergy { kHead, kEmpirical, kAnalytic };
enum class DivergenceEstimator { kExact, kProbe };

// One simulated anneal with the current drift, with states and raw log
// weights kept at every grid knot. Samples are snapshots: losses treat them
// as fixed quadrature points and never differentiate through the dynamics.
struct RolloutSlices {
  std::vector<double> t;
  std::vector<Mat> x;
  std::vector<Vec> log_w;
  double log_z = 0.0;  // at the final knot
  double ess = 0.0;    // normalized, at the final knot
};

struct RolloutOptions {
  int walkers = 256;
  int steps = 24;
  double t_end = 1.0;
  double eps = 1.0;
  bool random_grid = false;
  std::uint64_t seed = 0;
  std::uint64_t round = 0;  // separates repeated rollouts under one seed
};

inline RolloutSlices rollout_slices(const TimePotential& u,
                                    const DriftModel& b,
                                    const RolloutOptions& o) {
  check(o.eps > 0.0, "rollout: eps must be positive");
  check(o.walkers > 0, "rollout: need at least one walker");
  std::vector<double> grid;
  if (o.random_grid) {
    RngStream gr(o.seed, stream::kTimeGrid, o.round);
    grid = make_random_grid(o.steps, o.t_end, gr);
  } else {
    grid = make_uniform_grid(o.steps, o.t_end);
  }

  RolloutSlices s;
  s.t = grid;
  s.x.reserve(grid.size());
  s.log_w.reserve(grid.size());

  RngStream init(o.seed, stream::kInit, o.round);
  WalkerEnsemble e;
  e.x = u.sample_base(o.walkers, init);
  e.log_w = Vec::Zero(o.walkers);
  e.t = 0.0;
  s.x.push_back(e.x);
  s.log_w.push_back(e.log_w);

  for (int k = 0; k + 1 < static_cast<int>(grid.size()); ++k) {
    RngStream rng(o.seed, stream::kStep,
                  o.round * 0x100000000ull + static_cast<std::uint64_t>(k));
    step_discrete_weights(e, u, b, o.eps, grid[k + 1] - grid[k], rng);
    s.x.push_back(e.x);
    s.log_w.push_back(e.log_w);
  }
  s.log_z = log_mean_exp(e.log_w);
  s.ess = ess_from_log_weights(e.log_w);
  return s;
}

// Self-normalized weights with the shifted log weights floored, so a few
// dominant walkers cannot silence a whole slice. Counts lifted entries.
inline Vec clipped_weights(const Vec& log_w, double floor, int* clipped) {
  Vec shifted = log_w.array() - log_w.maxCoeff();
  int lifted = 0;
  for (Eigen::Index i = 0; i < shifted.size(); ++i) {
    if (shifted(i) < floor) {
      shifted(i) = floor;
      ++lifted;
    }
  }
  if (clipped) *clipped += lifted;
  return softmax(shifted);
}

namespace detail {

inline double resolve_dtf(const TimePotential& u, DtFreeEnergy mode,
                          const FreeEnergyHead* head, double t, const Vec& w,
                          const Vec& dtu) {
  switch (mode) {
    case DtFreeEnergy::kHead:
      require(head != nullptr, "dtF head requested but none provided");
      return head->dvalue(t);
    case DtFreeEnergy::kEmpirical:
      return w.dot(dtu);
    case DtFreeEnergy::kAnalytic:
      require(u.has_free_energy(),
              "analytic dtF requested for a potential without one");
      return u.dt_free_energy(t);
  }
  throw std::logic_error("unreachable");
}

}  // namespace detail

// Time-integrated weighted squared residual of the continuity condition
//   div b - gradU . b - dtU + dtF = 0,
// with the model's exact divergence, at the left knot of every segment.
struct PinnValue {
  double loss = 0.0;
  int clipped = 0;
};

inline PinnValue pinn_loss(const TimePotential& u, const DriftModel& b,
                           const RolloutSlices& s, DtFreeEnergy mode,
                           const FreeEnergyHead* head = nullptr,
                           double weight_floor = -30.0) {
  PinnValue out;
  for (std::size_t k = 0; k + 1 < s.t.size(); ++k) {
    const double t = s.t[k];
    const double dt = s.t[k + 1] - s.t[k];
    const Vec w = clipped_weights(s.log_w[k], weight_floor, &out.clipped);
    Vec dtu;
    Mat gu;
    u.eval_batch(t, s.x[k], nullptr, &gu, &dtu);
    Mat bv;
    Vec div;
    b.drift(t, s.x[k], bv, &div);
    const double dtf = detail::resolve_dtf(u, mode, head, t, w, dtu);
    const Vec r = (div.array() -
                   (gu.array() * bv.array()).colwise().sum().transpose() -
                   dtu.array() + dtf)
                      .matrix();
    out.loss += dt * w.dot(r.cwiseProduct(r));
  }
  return out;
}

// Action-matching objective for models that are gradients of a scalar phi.
// The time derivative of phi is discretized as the difference of phi across
// each segment at frozen states, so any additive function of time alone
// telescopes against the boundary terms and the value is gauge invariant.
// The left-knot phi at the first segment cancels the t = 0 boundary term
// exactly, so neither appears.
inline double am_loss(const DriftModel& model, const RolloutSlices& s,
                      double weight_floor = -30.0, int* clipped = nullptr) {
  require(model.has_potential(), "action matching needs a scalar potential");
  double loss = 0.0;
  const std::size_t last = s.t.size() - 1;
  for (std::size_t k = 0; k < last; ++k) {
    const double dt = s.t[k + 1] - s.t[k];
    const Vec w = clipped_weights(s.log_w[k], weight_floor, clipped);
    Vec phi_left, phi_right;
    Mat grad;
    model.potential(s.t[k], s.x[k], &phi_left, &grad, nullptr);
    model.potential(s.t[k + 1], s.x[k], &phi_right, nullptr, nullptr);
    loss += w.dot(phi_right) - (k == 0 ? 0.0 : w.dot(phi_left));
    loss += 0.5 * dt * w.dot(grad.colwise().squaredNorm().transpose());
  }
  const Vec w_end = clipped_weights(s.log_w[last], weight_floor, clipped);
  Vec phi_end;
  model.potential(s.t[last], s.x[last], &phi_end, nullptr, nullptr);
  loss -= w_end.dot(phi_end);
  return loss;
}

struct TrainConfig {
  DriftKind kind = DriftKind::kPhi;
  Objective objective = Objective::kPinn;
  DtFreeEnergy dtf = DtFreeEnergy::kHead;
  DivergenceEstimator divergence = DivergenceEstimator::kExact;
  int probes = 1;
  double probe_delta = 1e-3;
  // Residual and gradient normally use independent probe streams so the
  // expected squared residual stays unbiased; tying them makes the gradient
  // the exact derivative of the sampled loss, which verification wants.
  bool tie_probes = false;

  std::vector<int> hidden = {48, 48};
  std::vector<int> fhead_hidden = {16};
  int time_freqs = 2;
  double init_scale = 1e-2;

  int iters = 1500;
  int walkers = 256;
  int slices = 24;
  bool random_grid = true;
  double eps = 1.0;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  // Horizon annealing: start short, stretch toward 1 while the rollout keeps
  // enough effective walkers at the current horizon.
  double t_end_start = 0.1;
  int t_ramp_iters = 500;
  double ess_floor = 0.5;

  double weight_floor = -30.0;
};

struct TrainRow {
  int iter = 0;
  double t_end = 0.0;
  double loss = 0.0;
  double ess = 0.0;
  double log_z = 0.0;
  int clipped = 0;
};

inline nlohmann::json to_json(const TrainRow& r) {
  return nlohmann::json{{"iter", r.iter},   {"t_end", r.t_end},
                        {"loss", r.loss},   {"ess", r.ess},
                        {"log_z", r.log_z}, {"clipped", r.clipped}};
}

class Trainer {
 public:
  Trainer(std::shared_ptr<const TimePotential> u, TrainConfig cfg)
      : u_(std::move(u)),
        cfg_(cfg),
        feat_{cfg.time_freqs},
        t_end_(cfg.t_end_start) {
    check(u_ != nullptr, "trainer: null potential");
    check(cfg_.eps > 0.0, "trainer: eps must be positive");
    check(cfg_.probes > 0, "trainer: need at least one probe");
    check(cfg_.t_end_start > 0.0 && cfg_.t_end_start <= 1.0,
          "trainer: t_end_start must lie in (0, 1]");
    if (cfg_.objective == Objective::kActionMatching)
      check(cfg_.kind == DriftKind::kPhi,
            "action matching trains scalar models only");

    if (cfg_.kind == DriftKind::kVector) {
      auto m = std::make_unique<MlpVectorDrift>(u_->dim(), cfg_.hidden, feat_);
      net_ = m->net_ptr();
      model_ = std::move(m);
    } else {
      auto m = std::make_unique<MlpPhiDrift>(u_->dim(), cfg_.hidden, feat_);
      net_ = m->net_ptr();
      model_ = std::move(m);
    }
    RngStream init(cfg_.seed, stream::kParamInit);
    net_->init_params(init, cfg_.init_scale);
    if (cfg_.objective == Objective::kPinn && cfg_.dtf == DtFreeEnergy::kHead) {
      head_ = std::make_unique<FreeEnergyHead>(cfg_.fhead_hidden, feat_);
      RngStream hinit(cfg_.seed, stream::kParamInit, 1);
      head_->net().init_params(hinit, cfg_.init_scale);
    }
  }

  const TrainConfig& config() const { return cfg_; }
  DriftModel& model() { return *model_; }
  const DriftModel& model() const { return *model_; }
  Mlp& net() { return *net_; }
  FreeEnergyHead* head() { return head_.get(); }
  const FreeEnergyHead* head() const { return head_.get(); }
  double horizon() const { return t_end_; }

  TrainRow step(int iter) {
    RolloutOptions ro;
    ro.walkers = cfg_.walkers;
    ro.steps = cfg_.slices;
    ro.t_end = t_end_;
    ro.eps = cfg_.eps;
    ro.random_grid = cfg_.random_grid;
    ro.seed = cfg_.seed;
    ro.round = static_cast<std::uint64_t>(iter) + 1;
    const RolloutSlices s = rollout_slices(*u_, *model_, ro);

    TrainRow row;
    row.iter = iter;
    row.t_end = t_end_;
    row.ess = s.ess;
    row.log_z = s.log_z;

    const Eigen::Index nd = net_->n_params();
    const Eigen::Index nh = head_ ? head_->net().n_params() : 0;
    Vec grad = Vec::Zero(nd + nh);
    row.loss = loss_and_grad(s, iter, grad, &row.clipped);

    Vec joint(nd + nh);
    joint.head(nd) = net_->params();
    if (nh > 0) joint.tail(nh) = head_->net().params();
    opt_.lr = cfg_.lr;
    opt_.update(joint, grad);
    net_->params() = joint.head(nd);
    if (nh > 0) head_->net().params() = joint.tail(nh);

    if (s.ess >= cfg_.ess_floor && t_end_ < 1.0) {
      t_end_ = std::min(1.0, t_end_ + (1.0 - cfg_.t_end_start) /
                                          std::max(1, cfg_.t_ramp_iters));
    }
    return row;
  }

  std::vector<TrainRow> run(std::ostream* log = nullptr) {
    std::vector<TrainRow> rows;
    rows.reserve(cfg_.iters);
    for (int it = 0; it < cfg_.iters; ++it) {
      rows.push_back(step(it));
      if (log) *log << to_json(rows.back()).dump() << "\n";
    }
    return rows;
  }

  // Loss over frozen slices plus its gradient in [drift params | head
  // params]; grad must come in zeroed at the joint size. Public so the
  // gradients can be verified against differences of the loss itself.
  double loss_and_grad(const RolloutSlices& s, int iter, Vec& grad,
                       int* clipped) {
    if (cfg_.objective == Objective::kActionMatching)
      return am_loss_grad(s, grad, clipped);
    return pinn_loss_grad(s, iter, grad, clipped);
  }

  Checkpoint checkpoint() const {
    Checkpoint c;
    c.kind = cfg_.kind == DriftKind::kVector ? "vector" : "phi";
    c.dim = u_->dim();
    c.time_freqs = cfg_.time_freqs;
    c.hidden = cfg_.hidden;
    c.drift_params = net_->params();
    if (head_) {
      c.fhead_hidden = cfg_.fhead_hidden;
      c.fhead_params = head_->net().params();
    }
    return c;
  }

 private:
  double pinn_loss_grad(const RolloutSlices& s, int iter, Vec& grad,
                        int* clipped) {
    const int d = u_->dim();
    const Eigen::Index nd = net_->n_params();
    Vec g_drift = Vec::Zero(nd);
    double loss = 0.0;

    for (std::size_t k = 0; k + 1 < s.t.size(); ++k) {
      const double t = s.t[k];
      const double dt = s.t[k + 1] - s.t[k];
      const Mat& x = s.x[k];
      const Eigen::Index n = x.cols();
      const Vec w = clipped_weights(s.log_w[k], cfg_.weight_floor, clipped);
      const Vec tau = feat_.eval(t);

      Vec dtu;
      Mat gu;
      u_->eval_batch(t, x, nullptr, &gu, &dtu);

      Mlp::Cache cache;
      const Mat y = net_->forward(with_time(x, tau), &cache);

      Vec div(n);
      Vec transport(n);     // gradU . b
      Mlp::Tangent tan_gu;  // phi kind: tangent along gradU, reused below
      if (cfg_.kind == DriftKind::kVector) {
        transport = (gu.array() * y.array()).colwise().sum().transpose();
        div = vector_div_value(cache, x, tau, d, iter, k);
      } else {
        transport = net_->jvp(cache, space_tangent(gu, feat_.dim()), &tan_gu)
                        .row(0)
                        .transpose();
        div = phi_laplacian_value(cache, x, tau, d, iter, k);
      }

      const double dtf =
          detail::resolve_dtf(*u_, cfg_.dtf, head_.get(), t, w, dtu);
      const Vec r = div - transport - dtu + Vec::Constant(n, dtf);
      loss += dt * w.dot(r.cwiseProduct(r));

      // d(loss)/d(residual_i) at this slice.
      const Vec c = 2.0 * dt * w.cwiseProduct(r);

      if (cfg_.kind == DriftKind::kVector) {
        Mat gy = gu;
        gy.array().rowwise() *= -c.transpose().array();
        net_->backward(cache, gy, &g_drift, nullptr);
        vector_div_grad(cache, x, tau, c, d, iter, k, g_drift);
      } else {
        net_->jvp_backward(cache, tan_gu, Mat(-c.transpose()), nullptr,
                           &g_drift);
        RngStream rng(cfg_.seed, stream::kProbe,
                      pack(iter, k, !cfg_.tie_probes));
        probe_laplacian_phi(x, tau, rng, &g_drift, c);
      }
      if (head_ && cfg_.dtf == DtFreeEnergy::kHead) {
        Vec gh = Vec::Zero(head_->net().n_params());
        head_->dvalue_param_grad(t, c.sum(), &gh);
        grad.tail(gh.size()) += gh;
      }
    }
    grad.head(nd) += g_drift;
    return loss;
  }

  Vec vector_div_value(const Mlp::Cache& cache, const Mat& x, const Vec& tau,
                       int d, int iter, std::size_t k) {
    if (cfg_.divergence == DivergenceEstimator::kExact) {
      Vec div = Vec::Zero(x.cols());
      Mat v = Mat::Zero(d + feat_.dim(), x.cols());
      for (int j = 0; j < d; ++j) {
        v.row(j).setOnes();
        div += net_->jvp(cache, v).row(j).transpose();
        v.row(j).setZero();
      }
      return div;
    }
    RngStream rng(cfg_.seed, stream::kProbe, pack(iter, k, false));
    return probe_divergence_vector(x, tau, rng, nullptr, Vec());
  }

  void vector_div_grad(const Mlp::Cache& cache, const Mat& x, const Vec& tau,
                       const Vec& c, int d, int iter, std::size_t k,
                       Vec& g_drift) {
    if (cfg_.divergence == DivergenceEstimator::kExact) {
      Mat v = Mat::Zero(d + feat_.dim(), x.cols());
      Mat gydot = Mat::Zero(d, x.cols());
      for (int j = 0; j < d; ++j) {
        v.row(j).setOnes();
        gydot.row(j) = c.transpose();
        Mlp::Tangent tan;
        net_->jvp(cache, v, &tan);
        net_->jvp_backward(cache, tan, gydot, nullptr, &g_drift);
        v.row(j).setZero();
        gydot.row(j).setZero();
      }
      return;
    }
    RngStream rng(cfg_.seed, stream::kProbe, pack(iter, k, !cfg_.tie_probes));
    probe_divergence_vector(x, tau, rng, &g_drift, c);
  }

  // Probe estimate of div b: eta . (b(x + delta eta) - b(x - delta eta)) /
  // (2 delta), averaged over probes. With gp set, instead accumulates the
  // parameter gradient of sum_i c_i divhat_i; the residual and gradient
  // sides use distinct probe streams so the squared residual stays unbiased.
  Vec probe_divergence_vector(const Mat& x, const Vec& tau, RngStream& rng,
                              Vec* gp, const Vec& c) {
    const double delta = cfg_.probe_delta;
    const double scale = 1.0 / (2.0 * delta * cfg_.probes);
    Vec est = Vec::Zero(x.cols());
    for (int p = 0; p < cfg_.probes; ++p) {
      const Mat eta = rng.normal_mat(x.rows(), x.cols());
      for (double sign : {1.0, -1.0}) {
        Mlp::Cache cache;
        const Mat y = net_->forward(with_time(x + sign * delta * eta, tau),
                                    &cache);
        if (gp) {
          Mat gy = eta;
          gy.array().rowwise() *= (sign * scale) * c.transpose().array();
          net_->backward(cache, gy, gp, nullptr);
        } else {
          est += sign * scale *
                 (eta.array() * y.array()).colwise().sum().transpose().matrix();
        }
      }
    }
    return est;
  }

  Vec phi_laplacian_value(const Mlp::Cache& cache, const Mat& x,
                          const Vec& tau, int d, int iter, std::size_t k) {
    if (cfg_.divergence == DivergenceEstimator::kExact) {
      const Mat gy = Mat::Ones(1, x.cols());
      Vec lap = Vec::Zero(x.cols());
      Mat v = Mat::Zero(d + feat_.dim(), x.cols());
      for (int j = 0; j < d; ++j) {
        v.row(j).setOnes();
        Mlp::Tangent tan;
        net_->jvp(cache, v, &tan);
        lap += net_->hvp(cache, tan, gy).row(j).transpose();
        v.row(j).setZero();
      }
      return lap;
    }
    RngStream rng(cfg_.seed, stream::kProbe, pack(iter, k, false));
    return probe_laplacian_phi(x, tau, rng, nullptr, Vec());
  }

  // eta . (grad phi(x + delta eta) - grad phi(x - delta eta)) / (2 delta):
  // each directional derivative of phi is a forward tangent, so the
  // parameter gradient needs no second-order reverse pass. The gradient of
  // the exact Laplacian would need a third-order one, so the phi model
  // always takes the probe path for gradients.
  Vec probe_laplacian_phi(const Mat& x, const Vec& tau, RngStream& rng,
                          Vec* gp, const Vec& c) {
    const double delta = cfg_.probe_delta;
    const double scale = 1.0 / (2.0 * delta * cfg_.probes);
    Vec est = Vec::Zero(x.cols());
    for (int p = 0; p < cfg_.probes; ++p) {
      const Mat eta = rng.normal_mat(x.rows(), x.cols());
      const Mat vin = space_tangent(eta, feat_.dim());
      for (double sign : {1.0, -1.0}) {
        Mlp::Cache cache;
        net_->forward(with_time(x + sign * delta * eta, tau), &cache);
        Mlp::Tangent tan;
        const Mat ydot = net_->jvp(cache, vin, &tan);
        if (gp) {
          net_->jvp_backward(cache, tan, Mat(sign * scale * c.transpose()),
                             nullptr, gp);
        } else {
          est += sign * scale * ydot.row(0).transpose();
        }
      }
    }
    return est;
  }

  double am_loss_grad(const RolloutSlices& s, Vec& grad, int* clipped) {
    const Eigen::Index nd = net_->n_params();
    Vec g_drift = Vec::Zero(nd);
    double loss = 0.0;
    const std::size_t last = s.t.size() - 1;

    for (std::size_t k = 0; k < last; ++k) {
      const double dt = s.t[k + 1] - s.t[k];
      const Mat& x = s.x[k];
      const Vec w = clipped_weights(s.log_w[k], cfg_.weight_floor, clipped);

      Mlp::Cache cache;
      const Mat y = net_->forward(with_time(x, feat_.eval(s.t[k])), &cache);
      Mat gz;
      net_->backward(cache, Mat::Ones(1, x.cols()), nullptr, &gz);
      const Mat g = gz.topRows(x.rows());

      Mlp::Cache cache_right;
      const Mat y_right =
          net_->forward(with_time(x, feat_.eval(s.t[k + 1])), &cache_right);

      loss += w.dot(y_right.row(0).transpose());
      loss += 0.5 * dt * w.dot(g.colwise().squaredNorm().transpose());
      net_->backward(cache_right, Mat(w.transpose()), &g_drift, nullptr);

      // The t = 0 boundary term cancels the first left knot exactly.
      if (k > 0) {
        loss -= w.dot(y.row(0).transpose());
        net_->backward(cache, Mat(-w.transpose()), &g_drift, nullptr);
      }

      Mlp::Tangent tan;
      net_->jvp(cache, space_tangent(g, feat_.dim()), &tan);
      net_->jvp_backward(cache, tan, Mat(dt * w.transpose()), nullptr,
                         &g_drift);
    }

    const Vec w_end = clipped_weights(s.log_w[last], cfg_.weight_floor,
                                      clipped);
    Mlp::Cache cache_end;
    const Mat y_end =
        net_->forward(with_time(s.x[last], feat_.eval(s.t[last])), &cache_end);
    loss -= w_end.dot(y_end.row(0).transpose());
    net_->backward(cache_end, Mat(-w_end.transpose()), &g_drift, nullptr);
    grad.head(nd) += g_drift;
    return loss;
  }

  static std::uint64_t pack(int iter, std::size_t k, bool grad_side) {
    return (static_cast<std::uint64_t>(iter) << 20) +
           (static_cast<std::uint64_t>(k) << 1) + (grad_side ? 1 : 0);
  }

  std::shared_ptr<const TimePotential> u_;
  TrainConfig cfg_;
  TimeFeatures feat_;
  double t_end_ = 1.0;
  std::unique_ptr<DriftModel> model_;
  std::shared_ptr<Mlp> net_;
  std::unique_ptr<FreeEnergyHead> head_;
  Adam opt_;
};

}  // namespace nets
