#pragma once

#include <nets/drift.hpp>
#include <nets/mlp.hpp>

#include <json.hpp>

#include <fstream>
#include <memory>
#include <string>

namespace nets {

// Time embedding [t, sin(pi f t), cos(pi f t) ...] appended below the state
// coordinates so one net covers the whole anneal.
struct TimeFeatures {
  int freqs = 2;

  int dim() const { return 1 + 2 * freqs; }

  Vec eval(double t) const {
    Vec f(dim());
    f(0) = t;
    for (int k = 1; k <= freqs; ++k) {
      f(2 * k - 1) = std::sin(kPi * k * t);
      f(2 * k) = std::cos(kPi * k * t);
    }
    return f;
  }

  Vec deval(double t) const {
    Vec f(dim());
    f(0) = 1.0;
    for (int k = 1; k <= freqs; ++k) {
      f(2 * k - 1) = kPi * k * std::cos(kPi * k * t);
      f(2 * k) = -kPi * k * std::sin(kPi * k * t);
    }
    return f;
  }

  static constexpr double kPi = 3.14159265358979323846;
};

inline Mat with_time(const Mat& x, const Vec& tau) {
  Mat z(x.rows() + tau.size(), x.cols());
  z.topRows(x.rows()) = x;
  z.bottomRows(tau.size()) = tau.replicate(1, x.cols());
  return z;
}

// Tangent that moves only the state block.
inline Mat space_tangent(const Mat& v, Eigen::Index feat_dim) {
  Mat z = Mat::Zero(v.rows() + feat_dim, v.cols());
  z.topRows(v.rows()) = v;
  return z;
}

// Tangent that moves only the time block, at unit dt.
inline Mat time_tangent(Eigen::Index state_dim, const Vec& dtau,
                        Eigen::Index n) {
  Mat z = Mat::Zero(state_dim + dtau.size(), n);
  z.bottomRows(dtau.size()) = dtau.replicate(1, n);
  return z;
}

// Drift parameterized directly as a vector field. Exact divergence costs one
// forward tangent per coordinate, which is the intended eval path in the
// dimensions this model is used for.
class MlpVectorDrift final : public DriftModel {
 public:
  MlpVectorDrift(int dim, std::vector<int> hidden, TimeFeatures feat = {})
      : dim_(dim), feat_(feat), net_(std::make_shared<Mlp>(layer_sizes(
            dim + feat.dim(), std::move(hidden), dim))) {}

  int dim() const override { return dim_; }
  Mlp& net() { return *net_; }
  const Mlp& net() const { return *net_; }
  std::shared_ptr<Mlp> net_ptr() { return net_; }
  const TimeFeatures& features() const { return feat_; }

  void drift(double t, const Mat& x, Mat& b_out, Vec* div_out) const override {
    Mlp::Cache cache;
    b_out = net_->forward(with_time(x, feat_.eval(t)), &cache);
    if (div_out) {
      div_out->setZero(x.cols());
      Mat v = Mat::Zero(dim_ + feat_.dim(), x.cols());
      for (int j = 0; j < dim_; ++j) {
        v.row(j).setOnes();
        *div_out += net_->jvp(cache, v).row(j).transpose();
        v.row(j).setZero();
      }
    }
  }

  static std::vector<int> layer_sizes(int in, std::vector<int> hidden,
                                      int out) {
    std::vector<int> s;
    s.push_back(in);
    for (int h : hidden) s.push_back(h);
    s.push_back(out);
    return s;
  }

 private:
  int dim_;
  TimeFeatures feat_;
  std::shared_ptr<Mlp> net_;
};

// Drift parameterized as the gradient of a learned scalar phi. Supplies the
// scalar itself and its time derivative, which the Laplacian-free weight
// path consumes; the divergence (Laplacian of phi) costs one
// forward-over-reverse pass per coordinate.
class MlpPhiDrift final : public DriftModel {
 public:
  MlpPhiDrift(int dim, std::vector<int> hidden, TimeFeatures feat = {})
      : dim_(dim), feat_(feat), net_(std::make_shared<Mlp>(
            MlpVectorDrift::layer_sizes(dim + feat.dim(), std::move(hidden),
                                        1))) {}

  int dim() const override { return dim_; }
  Mlp& net() { return *net_; }
  const Mlp& net() const { return *net_; }
  std::shared_ptr<Mlp> net_ptr() { return net_; }
  const TimeFeatures& features() const { return feat_; }

  void drift(double t, const Mat& x, Mat& b_out, Vec* div_out) const override {
    Mlp::Cache cache;
    net_->forward(with_time(x, feat_.eval(t)), &cache);
    const Mat gy = Mat::Ones(1, x.cols());
    Mat gz;
    net_->backward(cache, gy, nullptr, &gz);
    b_out = gz.topRows(dim_);
    if (div_out) {
      div_out->setZero(x.cols());
      Mat v = Mat::Zero(dim_ + feat_.dim(), x.cols());
      for (int j = 0; j < dim_; ++j) {
        v.row(j).setOnes();
        Mlp::Tangent tan;
        net_->jvp(cache, v, &tan);
        *div_out += net_->hvp(cache, tan, gy).row(j).transpose();
        v.row(j).setZero();
      }
    }
  }

  bool has_potential() const override { return true; }
  void potential(double t, const Mat& x, Vec* phi_out, Mat* grad_out,
                 Vec* dt_out) const override {
    Mlp::Cache cache;
    const Mat y = net_->forward(with_time(x, feat_.eval(t)), &cache);
    if (phi_out) *phi_out = y.row(0).transpose();
    if (grad_out) {
      Mat gz;
      net_->backward(cache, Mat::Ones(1, x.cols()), nullptr, &gz);
      *grad_out = gz.topRows(dim_);
    }
    if (dt_out) {
      const Mat vt = time_tangent(dim_, feat_.deval(t), x.cols());
      *dt_out = net_->jvp(cache, vt).row(0).transpose();
    }
  }

 private:
  int dim_;
  TimeFeatures feat_;
  std::shared_ptr<Mlp> net_;
};

// Scalar head F(t) = g(tau(t)) - g(tau(0)), pinned to zero at t = 0, used
// when the free-energy rate in the residual is itself learned.
class FreeEnergyHead {
 public:
  explicit FreeEnergyHead(std::vector<int> hidden = {16},
                          TimeFeatures feat = {})
      : feat_(feat), net_(std::make_shared<Mlp>(MlpVectorDrift::layer_sizes(
            feat.dim(), std::move(hidden), 1))) {}

  Mlp& net() { return *net_; }
  const Mlp& net() const { return *net_; }
  std::shared_ptr<Mlp> net_ptr() { return net_; }
  const TimeFeatures& features() const { return feat_; }

  double value(double t) const {
    return net_->forward(feat_.eval(t))(0, 0) -
           net_->forward(feat_.eval(0.0))(0, 0);
  }

  double dvalue(double t) const {
    Mlp::Cache cache;
    net_->forward(feat_.eval(t), &cache);
    return net_->jvp(cache, feat_.deval(t))(0, 0);
  }

  // d(dvalue)/dparams, accumulated into gp scaled by weight.
  void dvalue_param_grad(double t, double weight, Vec* gp) const {
    Mlp::Cache cache;
    net_->forward(feat_.eval(t), &cache);
    Mlp::Tangent tan;
    net_->jvp(cache, feat_.deval(t), &tan);
    Mat gydot(1, 1);
    gydot(0, 0) = weight;
    net_->jvp_backward(cache, tan, gydot, nullptr, gp);
  }

 private:
  TimeFeatures feat_;
  std::shared_ptr<Mlp> net_;
};

// ----- checkpoints ---------------------------------------------------------

inline nlohmann::json mlp_to_json(const Mlp& net) {
  nlohmann::json j;
  j["sizes"] = net.sizes();
  j["params"] = std::vector<double>(net.params().data(),
                                    net.params().data() + net.n_params());
  return j;
}

inline void mlp_from_json(const nlohmann::json& j, Mlp& net) {
  const auto sizes = j.at("sizes").get<std::vector<int>>();
  require(sizes == net.sizes(), "checkpoint topology mismatch");
  const auto p = j.at("params").get<std::vector<double>>();
  require(static_cast<Eigen::Index>(p.size()) == net.n_params(),
          "checkpoint parameter count mismatch");
  net.params() = Eigen::Map<const Vec>(p.data(), p.size());
}

struct Checkpoint {
  std::string kind;  // "vector" | "phi"
  int dim = 0;
  int time_freqs = 2;
  std::vector<int> hidden;
  Vec drift_params;
  std::vector<int> fhead_hidden;
  Vec fhead_params;  // empty when no head was trained
};

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  nlohmann::json j;
  j["format"] = "nets-checkpoint-v1";
  j["kind"] = c.kind;
  j["dim"] = c.dim;
  j["time_freqs"] = c.time_freqs;
  j["hidden"] = c.hidden;
  j["drift_params"] = std::vector<double>(
      c.drift_params.data(), c.drift_params.data() + c.drift_params.size());
  if (c.fhead_params.size() > 0) {
    j["fhead_hidden"] = c.fhead_hidden;
    j["fhead_params"] = std::vector<double>(
        c.fhead_params.data(), c.fhead_params.data() + c.fhead_params.size());
  }
  std::ofstream out(path);
  require(out.good(), "cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot read checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  require(j.value("format", "") == std::string("nets-checkpoint-v1"),
          "not a checkpoint file: " + path);
  Checkpoint c;
  c.kind = j.at("kind").get<std::string>();
  require(c.kind == "vector" || c.kind == "phi",
          "unknown drift kind: " + c.kind);
  c.dim = j.at("dim").get<int>();
  c.time_freqs = j.at("time_freqs").get<int>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  const auto p = j.at("drift_params").get<std::vector<double>>();
  c.drift_params = Eigen::Map<const Vec>(p.data(), p.size());
  if (j.contains("fhead_params")) {
    c.fhead_hidden = j.at("fhead_hidden").get<std::vector<int>>();
    const auto f = j.at("fhead_params").get<std::vector<double>>();
    c.fhead_params = Eigen::Map<const Vec>(f.data(), f.size());
  }
  return c;
}

inline std::unique_ptr<DriftModel> drift_from_checkpoint(const Checkpoint& c) {
  TimeFeatures feat{c.time_freqs};
  if (c.kind == "phi") {
    auto m = std::make_unique<MlpPhiDrift>(c.dim, c.hidden, feat);
    require(m->net().n_params() == c.drift_params.size(),
            "checkpoint parameter count mismatch");
    m->net().params() = c.drift_params;
    return m;
  }
  auto m = std::make_unique<MlpVectorDrift>(c.dim, c.hidden, feat);
  require(m->net().n_params() == c.drift_params.size(),
          "checkpoint parameter count mismatch");
  m->net().params() = c.drift_params;
  return m;
}

}  // namespace nets
