#include <catch2/catch_amalgamated.hpp>

#include <nets/train.hpp>

#include "test_util.hpp"

#include <cmath>
#include <functional>

using namespace nets;
using namespace nets::testing;

namespace {

std::shared_ptr<const TimePotential> widening_2d() {
  Vec m1(2);
  m1 << 1.0, 0.0;
  return std::make_shared<MovingGaussianPotential>(
      MovingGaussianPotential::isotropic(2, 1.0, 0.5, Vec::Zero(2), m1));
}

RolloutSlices make_slices(const TimePotential& u, const DriftModel& b,
                          int walkers = 16, int steps = 6,
                          double t_end = 1.0) {
  RolloutOptions o;
  o.walkers = walkers;
  o.steps = steps;
  o.t_end = t_end;
  o.eps = 1.0;
  o.seed = 31;
  return rollout_slices(u, b, o);
}

// Finite-difference check of loss_and_grad over a random subset of the
// joint parameter vector.
void check_gradient(Trainer& tr, const RolloutSlices& s, double tol,
                    uint64_t pick_seed) {
  const Eigen::Index nd = tr.net().n_params();
  const Eigen::Index nh = tr.head() ? tr.head()->net().n_params() : 0;
  Vec grad = Vec::Zero(nd + nh);
  int clipped = 0;
  tr.loss_and_grad(s, 0, grad, &clipped);

  auto loss_at = [&]() {
    Vec g = Vec::Zero(nd + nh);
    int c = 0;
    return tr.loss_and_grad(s, 0, g, &c);
  };
  auto param = [&](Eigen::Index i) -> double& {
    return i < nd ? tr.net().params()(i)
                  : tr.head()->net().params()(i - nd);
  };

  RngStream pick(pick_seed, 123);
  const double h = 1e-6;
  for (int rep = 0; rep < 12; ++rep) {
    const Eigen::Index i = static_cast<Eigen::Index>(
        pick.uniform_index(static_cast<uint64_t>(nd + nh)));
    const double keep = param(i);
    param(i) = keep + h;
    const double up = loss_at();
    param(i) = keep - h;
    const double dn = loss_at();
    param(i) = keep;
    REQUIRE(rel_err(grad(i), (up - dn) / (2 * h)) < tol);
  }
}

TrainConfig base_config() {
  TrainConfig cfg;
  cfg.hidden = {10, 10};
  cfg.fhead_hidden = {8};
  cfg.walkers = 16;
  cfg.slices = 6;
  cfg.seed = 5;
  cfg.init_scale = 1.0;  // nontrivial model so gradients have structure
  return cfg;
}

// Adds a function of time alone to another model's scalar potential.
class TimeShiftedPhi final : public DriftModel {
 public:
  TimeShiftedPhi(const DriftModel& base, std::function<double(double)> psi)
      : base_(base), psi_(std::move(psi)) {}
  int dim() const override { return base_.dim(); }
  void drift(double t, const Mat& x, Mat& b, Vec* div) const override {
    base_.drift(t, x, b, div);
  }
  bool has_potential() const override { return true; }
  void potential(double t, const Mat& x, Vec* phi, Mat* grad,
                 Vec* dt) const override {
    base_.potential(t, x, phi, grad, dt);
    if (phi) phi->array() += psi_(t);
  }

 private:
  const DriftModel& base_;
  std::function<double(double)> psi_;
};

// Adds alpha * v . x to the scalar potential (and v to its gradient).
class LinearPerturbedPhi final : public DriftModel {
 public:
  LinearPerturbedPhi(const DriftModel& base, Vec v)
      : base_(base), v_(std::move(v)) {}
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

}  // namespace

TEST_CASE("clipped weights floor the stragglers and normalize", "[train]") {
  Vec lw(4);
  lw << 0.0, -1.0, -50.0, -80.0;
  int clipped = 0;
  const Vec w = clipped_weights(lw, -30.0, &clipped);
  REQUIRE(clipped == 2);
  REQUIRE(w.sum() == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(w(2) == w(3));          // both lifted to the floor
  REQUIRE(w(2) > 0.0);
  REQUIRE(w(0) > w(1));

  int none = 0;
  const Vec w2 = clipped_weights(lw, -200.0, &none);
  REQUIRE(none == 0);
}

TEST_CASE("rollouts are deterministic and keep every knot", "[train]") {
  auto u = widening_2d();
  const ZeroDrift zero(2);

  RolloutOptions o;
  o.walkers = 8;
  o.steps = 5;
  o.t_end = 0.7;
  o.random_grid = true;
  o.seed = 9;
  o.round = 3;
  const RolloutSlices a = rollout_slices(*u, zero, o);
  const RolloutSlices b = rollout_slices(*u, zero, o);
  REQUIRE(a.t == b.t);
  for (std::size_t k = 0; k < a.x.size(); ++k) {
    REQUIRE(a.x[k] == b.x[k]);
    REQUIRE(a.log_w[k] == b.log_w[k]);
  }

  REQUIRE(a.t.size() == 6);
  REQUIRE(a.x.size() == 6);
  REQUIRE(a.log_w.size() == 6);
  REQUIRE(a.t.front() == 0.0);
  REQUIRE(a.t.back() == 0.7);
  REQUIRE(std::is_sorted(a.t.begin(), a.t.end()));
  REQUIRE(a.log_w.front().cwiseAbs().maxCoeff() == 0.0);

  o.round = 4;
  const RolloutSlices c = rollout_slices(*u, zero, o);
  REQUIRE(a.x.back() != c.x.back());
}

TEST_CASE("pinn loss vanishes at the exact drift and ranks models", "[train]") {
  auto u = widening_2d();
  const AnalyticGaussianDrift exact(
      MovingGaussianPotential::isotropic(2, 1.0, 0.5, Vec::Zero(2),
                                         (Vec(2) << 1.0, 0.0).finished()));
  const ZeroDrift zero(2);
  const RolloutSlices s = make_slices(*u, exact, 64, 12);

  const PinnValue at_exact = pinn_loss(*u, exact, s, DtFreeEnergy::kAnalytic);
  REQUIRE(at_exact.loss < 1e-20);
  REQUIRE(std::sqrt(at_exact.loss) < 1e-10);

  const PinnValue at_zero = pinn_loss(*u, zero, s, DtFreeEnergy::kAnalytic);
  REQUIRE(at_zero.loss > 1e-2);

  // The empirical dtF mode needs no closed form; its gap is pure Monte
  // Carlo error in the per-slice free-energy rate, O(1/walkers) squared.
  const PinnValue emp = pinn_loss(*u, exact, s, DtFreeEnergy::kEmpirical);
  REQUIRE(emp.loss < 1e-2);
  REQUIRE(emp.loss > 0.0);
}

TEST_CASE("pinn gradients match differences: vector, exact divergence", "[train]") {
  auto u = widening_2d();
  TrainConfig cfg = base_config();
  cfg.kind = DriftKind::kVector;
  cfg.objective = Objective::kPinn;
  cfg.dtf = DtFreeEnergy::kEmpirical;
  cfg.divergence = DivergenceEstimator::kExact;
  Trainer tr(u, cfg);
  const RolloutSlices s = make_slices(*u, tr.model());
  check_gradient(tr, s, 1e-5, 1);
}

TEST_CASE("pinn gradients match differences: vector, tied probes", "[train]") {
  auto u = widening_2d();
  TrainConfig cfg = base_config();
  cfg.kind = DriftKind::kVector;
  cfg.objective = Objective::kPinn;
  cfg.dtf = DtFreeEnergy::kEmpirical;
  cfg.divergence = DivergenceEstimator::kProbe;
  cfg.probes = 2;
  cfg.tie_probes = true;
  Trainer tr(u, cfg);
  const RolloutSlices s = make_slices(*u, tr.model());
  check_gradient(tr, s, 1e-5, 2);
}

TEST_CASE("pinn gradients match differences: phi, tied probes", "[train]") {
  auto u = widening_2d();
  TrainConfig cfg = base_config();
  cfg.kind = DriftKind::kPhi;
  cfg.objective = Objective::kPinn;
  cfg.dtf = DtFreeEnergy::kEmpirical;
  cfg.divergence = DivergenceEstimator::kProbe;
  cfg.probes = 2;
  cfg.tie_probes = true;
  Trainer tr(u, cfg);
  const RolloutSlices s = make_slices(*u, tr.model());
  check_gradient(tr, s, 1e-5, 3);
}

TEST_CASE("pinn gradients match differences: learned dtF head", "[train]") {
  auto u = widening_2d();
  TrainConfig cfg = base_config();
  cfg.kind = DriftKind::kVector;
  cfg.objective = Objective::kPinn;
  cfg.dtf = DtFreeEnergy::kHead;
  cfg.divergence = DivergenceEstimator::kExact;
  Trainer tr(u, cfg);
  REQUIRE(tr.head() != nullptr);
  {
    RngStream r(99, stream::kParamInit, 7);
    tr.head()->net().init_params(r, 1.0);
  }
  const RolloutSlices s = make_slices(*u, tr.model());
  check_gradient(tr, s, 1e-5, 4);
}

TEST_CASE("action matching gradients match differences", "[train]") {
  auto u = widening_2d();
  TrainConfig cfg = base_config();
  cfg.kind = DriftKind::kPhi;
  cfg.objective = Objective::kActionMatching;
  Trainer tr(u, cfg);
  const RolloutSlices s = make_slices(*u, tr.model());
  check_gradient(tr, s, 1e-5, 5);
}

TEST_CASE("phi laplacian gradient path tracks the exact divergence", "[train]") {
  // Exact-divergence phi training keeps the exact residual but estimates the
  // Laplacian's parameter gradient with probes; with a tiny step and many
  // probes the two settings should nearly agree.
  auto u = widening_2d();
  TrainConfig cfg = base_config();
  cfg.kind = DriftKind::kPhi;
  cfg.objective = Objective::kPinn;
  cfg.dtf = DtFreeEnergy::kEmpirical;
  cfg.divergence = DivergenceEstimator::kExact;
  cfg.probes = 256;
  cfg.probe_delta = 1e-4;
  Trainer tr(u, cfg);
  const RolloutSlices s = make_slices(*u, tr.model());

  Vec g_exact = Vec::Zero(tr.net().n_params());
  int c1 = 0;
  const double l1 = tr.loss_and_grad(s, 0, g_exact, &c1);

  cfg.divergence = DivergenceEstimator::kProbe;
  cfg.tie_probes = true;
  Trainer tr2(u, cfg);
  tr2.net().params() = tr.net().params();
  Vec g_probe = Vec::Zero(tr2.net().n_params());
  int c2 = 0;
  const double l2 = tr2.loss_and_grad(s, 0, g_probe, &c2);

  REQUIRE(rel_err(l1, l2) < 1e-2);
  REQUIRE((g_exact - g_probe).norm() / std::max(1.0, g_exact.norm()) < 0.05);
}

TEST_CASE("action matching is gauge invariant on fixed slices", "[train]") {
  auto u = widening_2d();
  MlpPhiDrift model(2, {10, 10});
  RngStream init(33, stream::kParamInit);
  model.net().init_params(init, 1.0);
  const RolloutSlices s = make_slices(*u, model, 32, 10);

  const double base = am_loss(model, s);
  const TimeShiftedPhi shifted(model, [](double t) {
    return 3.0 * std::sin(2.5 * t) - 1.7 * t * t + 0.4;
  });
  const double moved = am_loss(shifted, s);
  REQUIRE(std::abs(base - moved) < 1e-10);
}

TEST_CASE("the exact phi minimizes the action matching loss", "[train]") {
  const auto family = MovingGaussianPotential::isotropic(
      2, 1.0, 0.5, Vec::Zero(2), (Vec(2) << 1.0, 0.0).finished());
  auto u = std::make_shared<MovingGaussianPotential>(family);
  const AnalyticGaussianDrift exact(family);
  const RolloutSlices s = make_slices(*u, exact, 256, 16);

  const double at_exact = am_loss(exact, s);
  RngStream rng(77, 5);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec v = 0.3 * rng.normal_vec(2);
    const LinearPerturbedPhi moved(exact, v);
    REQUIRE(am_loss(moved, s) > at_exact);
  }
}

TEST_CASE("training runs deterministically and ramps the horizon", "[train]") {
  auto u = std::make_shared<MovingGaussianPotential>(
      MovingGaussianPotential::isotropic(1, 1.0, 0.25, Vec::Zero(1),
                                         Vec::Zero(1)));
  TrainConfig cfg;
  cfg.kind = DriftKind::kVector;
  cfg.objective = Objective::kPinn;
  cfg.dtf = DtFreeEnergy::kEmpirical;
  cfg.hidden = {16, 16};
  cfg.walkers = 64;
  cfg.slices = 12;
  cfg.iters = 60;
  cfg.lr = 3e-3;
  cfg.seed = 17;
  cfg.t_end_start = 0.3;
  cfg.t_ramp_iters = 30;
  cfg.ess_floor = 0.0;

  Trainer a(u, cfg);
  const auto rows_a = a.run();
  Trainer b(u, cfg);
  const auto rows_b = b.run();
  REQUIRE(rows_a.size() == 60);
  for (std::size_t i = 0; i < rows_a.size(); ++i) {
    REQUIRE(rows_a[i].loss == rows_b[i].loss);
    REQUIRE(rows_a[i].log_z == rows_b[i].log_z);
    REQUIRE(rows_a[i].t_end == rows_b[i].t_end);
  }
  REQUIRE(rows_a.front().t_end == 0.3);
  REQUIRE(rows_a.back().t_end == 1.0);
  REQUIRE(a.horizon() == 1.0);

  // Training at the full horizon beats the untrained model there.
  Trainer fresh(u, cfg);
  RolloutOptions o;
  o.walkers = 256;
  o.steps = 20;
  o.seed = 404;
  const RolloutSlices eval = rollout_slices(*u, fresh.model(), o);
  const double before =
      pinn_loss(*u, fresh.model(), eval, DtFreeEnergy::kEmpirical).loss;
  const RolloutSlices eval_after = rollout_slices(*u, a.model(), o);
  const double after =
      pinn_loss(*u, a.model(), eval_after, DtFreeEnergy::kEmpirical).loss;
  REQUIRE(after < 0.5 * before);

  // An unreachable ESS floor pins the horizon at its start.
  cfg.ess_floor = 2.0;
  cfg.iters = 5;
  Trainer stalled(u, cfg);
  const auto rows_s = stalled.run();
  REQUIRE(rows_s.back().t_end == cfg.t_end_start);
  REQUIRE(stalled.horizon() == cfg.t_end_start);
}

TEST_CASE("train rows serialize to stable json lines", "[train]") {
  TrainRow r;
  r.iter = 3;
  r.t_end = 0.5;
  r.loss = 1.25;
  r.ess = 0.75;
  r.log_z = -0.125;
  r.clipped = 2;
  const std::string line = to_json(r).dump();
  REQUIRE(to_json(r).dump() == line);
  const auto back = nlohmann::json::parse(line);
  REQUIRE(back.at("iter").get<int>() == 3);
  REQUIRE(back.at("loss").get<double>() == 1.25);
  REQUIRE(back.at("clipped").get<int>() == 2);
}

TEST_CASE("trainer checkpoints restore the learned drift", "[train]") {
  auto u = widening_2d();
  TrainConfig cfg = base_config();
  cfg.kind = DriftKind::kPhi;
  cfg.objective = Objective::kPinn;
  cfg.dtf = DtFreeEnergy::kHead;
  Trainer tr(u, cfg);
  for (int it = 0; it < 3; ++it) tr.step(it);

  const Checkpoint c = tr.checkpoint();
  REQUIRE(c.kind == "phi");
  REQUIRE(c.fhead_params.size() > 0);
  auto restored = drift_from_checkpoint(c);

  RngStream xs(3, 8);
  const Mat x = xs.normal_mat(2, 4);
  Mat b0, b1;
  tr.model().drift(0.6, x, b0, nullptr);
  restored->drift(0.6, x, b1, nullptr);
  REQUIRE(b0 == b1);
}
