#pragma once

#include <nets/ensemble.hpp>
#include <nets/sde.hpp>

#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace nets {

// Minimum-cost assignment by shortest augmenting paths with dual potentials
// (the Jonker-Volgenant scheme). cost(i, j) is the price of pairing row i
// with column j; returns the column matched to each row.
inline std::vector<int> solve_assignment(const Mat& cost) {
  check(cost.rows() == cost.cols(), "assignment: cost matrix must be square");
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();

  Vec u = Vec::Zero(n), v = Vec::Zero(n);
  std::vector<int> col4row(n, -1), row4col(n, -1);
  std::vector<double> shortest(n);
  std::vector<int> path(n);
  std::vector<bool> in_sr(n), in_sc(n);

  for (int cur = 0; cur < n; ++cur) {
    std::fill(shortest.begin(), shortest.end(), inf);
    std::fill(path.begin(), path.end(), -1);
    std::fill(in_sr.begin(), in_sr.end(), false);
    std::fill(in_sc.begin(), in_sc.end(), false);

    int i = cur, sink = -1;
    double min_val = 0.0;
    while (sink == -1) {
      in_sr[i] = true;
      int index = -1;
      double lowest = inf;
      for (int j = 0; j < n; ++j) {
        if (in_sc[j]) continue;
        const double r = min_val + cost(i, j) - u(i) - v(j);
        if (r < shortest[j]) {
          shortest[j] = r;
          path[j] = i;
        }
        if (shortest[j] < lowest ||
            (shortest[j] == lowest && row4col[j] == -1)) {
          lowest = shortest[j];
          index = j;
        }
      }
      require(std::isfinite(lowest), "assignment: infeasible cost matrix");
      min_val = lowest;
      const int j = index;
      in_sc[j] = true;
      if (row4col[j] == -1)
        sink = j;
      else
        i = row4col[j];
    }

    u(cur) += min_val;
    for (int k = 0; k < n; ++k) {
      if (in_sr[k] && k != cur) u(k) += min_val - shortest[col4row[k]];
      if (in_sc[k]) v(k) -= min_val - shortest[k];
    }

    int j = sink;
    while (true) {
      const int pi = path[j];
      row4col[j] = pi;
      std::swap(col4row[pi], j);
      if (pi == cur) break;
    }
  }
  return col4row;
}

// Pairwise squared Euclidean distances between column sets.
inline Mat pairwise_sq_dists(const Mat& a, const Mat& b) {
  check(a.rows() == b.rows(), "pairwise distances: dimension mismatch");
  Mat d = -2.0 * a.transpose() * b;
  d.colwise() += a.colwise().squaredNorm().transpose();
  d.rowwise() += b.colwise().squaredNorm();
  return d.cwiseMax(0.0);
}

// Entropic transport cost by log-domain Sinkhorn on uniform marginals.
// Regularization and stopping rule are fixed and documented here: eps is
// scaled to the mean cost, and iteration stops when both marginals match to
// marginal_tol in L1 or after max_iters sweeps. The value is the transport
// term <P, C> alone, an upper approximation of the exact cost.
inline double entropic_transport_cost(const Mat& c, double eps_scale = 1e-2,
                                      double marginal_tol = 1e-9,
                                      int max_iters = 5000) {
  const Eigen::Index n = c.rows(), m = c.cols();
  const double eps = std::max(eps_scale * c.mean(), 1e-12);
  const double la = -std::log(static_cast<double>(n));
  const double lb = -std::log(static_cast<double>(m));
  Vec f = Vec::Zero(n), g = Vec::Zero(m);

  const auto soft_min_rows = [&](const Mat& z) {  // -eps log sum exp(-z/eps)
    Vec out(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double mn = z.row(i).minCoeff();
      out(i) = mn - eps * std::log(((mn - z.row(i).array()) / eps).exp().sum());
    }
    return out;
  };

  const Mat zt = c.transpose();
  for (int it = 0; it < max_iters; ++it) {
    // f_i = eps*la + softmin_j (c_ij - g_j), then symmetrically for g.
    Mat cg = c;
    cg.rowwise() -= g.transpose();
    f = soft_min_rows(cg).array() + eps * la;
    Mat cf = zt;
    cf.rowwise() -= f.transpose();
    g = soft_min_rows(cf).array() + eps * lb;

    // Marginal check on the implied plan.
    Mat logp = -c;
    logp.colwise() += f;
    logp.rowwise() += g.transpose();
    logp /= eps;
    Mat p = logp.array().exp();
    const double err_a = (p.rowwise().sum().array() - std::exp(la)).abs().sum();
    const double err_b = (p.colwise().sum().array() - std::exp(lb)).abs().sum();
    if (err_a < marginal_tol && err_b < marginal_tol)
      return (p.array() * c.array()).sum();
  }
  Mat logp = -c;
  logp.colwise() += f;
  logp.rowwise() += g.transpose();
  logp /= eps;
  return (logp.array().exp() * c.array()).sum();
}

// 2-Wasserstein distance between empirical distributions held as columns.
// Equal counts up to 4096 use the exact optimal assignment; anything larger
// or unequal falls back to the entropic approximation.
inline double w2_distance(const Mat& a, const Mat& b) {
  check(a.rows() == b.rows(), "w2: dimension mismatch");
  check(a.cols() >= 1 && b.cols() >= 1, "w2: need at least one sample");
  const Mat c = pairwise_sq_dists(a, b);
  if (a.cols() == b.cols() && a.cols() <= 4096) {
    const std::vector<int> match = solve_assignment(c);
    double total = 0.0;
    for (int i = 0; i < static_cast<int>(match.size()); ++i)
      total += c(i, match[i]);
    return std::sqrt(total / static_cast<double>(a.cols()));
  }
  return std::sqrt(std::max(0.0, entropic_transport_cost(c)));
}

// Squared maximum mean discrepancy with an RBF kernel, unbiased U-statistic:
// self terms exclude the diagonal, the cross term is complete. Can be
// slightly negative by design.
inline double mmd_rbf(const Mat& a, const Mat& b, double bandwidth = 1.0) {
  check(a.rows() == b.rows(), "mmd: dimension mismatch");
  check(a.cols() >= 2 && b.cols() >= 2, "mmd: need at least two samples each");
  check(bandwidth > 0.0, "mmd: bandwidth must be positive");
  const double q = -0.5 / (bandwidth * bandwidth);
  const auto kernel = [&](const Mat& x, const Mat& y) -> Mat {
    return (q * pairwise_sq_dists(x, y)).array().exp().matrix();
  };
  const double n = static_cast<double>(a.cols());
  const double m = static_cast<double>(b.cols());
  const double kaa = kernel(a, a).sum() - n;  // ones on the diagonal
  const double kbb = kernel(b, b).sum() - m;
  const double kab = kernel(a, b).sum();
  return kaa / (n * (n - 1.0)) + kbb / (m * (m - 1.0)) - 2.0 * kab / (n * m);
}

// KL upper-bound surrogate: the square root of the residual loss.
inline double kl_bound_estimate(double pinn_loss_value) {
  check(pinn_loss_value >= 0.0, "kl bound: loss must be nonnegative");
  return std::sqrt(pinn_loss_value);
}

struct MetricReport {
  std::vector<std::pair<double, double>> ess_trajectory;  // (t, ESS)
  double terminal_ess = 0.0;
  double log_z = 0.0;
  double log_z_se = 0.0;
  std::optional<double> w2;
  std::optional<double> mmd;
  std::optional<double> kl_bound;
};

inline MetricReport make_report(const SamplerResult& r) {
  MetricReport rep;
  require(static_cast<Eigen::Index>(r.grid.size()) == r.ess_trajectory.size(),
          "report: trajectory and grid length mismatch");
  rep.ess_trajectory.reserve(r.grid.size());
  for (std::size_t k = 0; k < r.grid.size(); ++k)
    rep.ess_trajectory.emplace_back(r.grid[k], r.ess_trajectory[k]);
  rep.terminal_ess = r.ess_trajectory[r.ess_trajectory.size() - 1];
  rep.log_z = log_partition_ratio(r.ensemble);
  rep.log_z_se = log_partition_se(r.ensemble);
  return rep;
}

inline void validate(const MetricReport& r) {
  require(r.terminal_ess > 0.0 && r.terminal_ess <= 1.0 + 1e-12,
          "report: terminal ESS out of range");
  require(std::isfinite(r.log_z) && std::isfinite(r.log_z_se),
          "report: non-finite partition estimate");
  for (const auto& [t, e] : r.ess_trajectory)
    require(std::isfinite(t) && e > 0.0 && e <= 1.0 + 1e-12,
            "report: ESS trajectory out of range");
  if (r.w2) require(std::isfinite(*r.w2) && *r.w2 >= 0.0, "report: bad w2");
  // The unbiased estimator legitimately dips a few 1/n below zero when the
  // two samples match; only O(1) negativity signals a sign or kernel bug.
  if (r.mmd) require(std::isfinite(*r.mmd) && *r.mmd > -1e-2,
                     "report: mmd below numerical noise");
  if (r.kl_bound)
    require(std::isfinite(*r.kl_bound) && *r.kl_bound >= 0.0,
            "report: bad kl bound");
}

inline std::string metrics_csv_header() {
  return "case,walkers,steps,log_z,log_z_se,terminal_ess,w2,mmd,kl_bound";
}

inline std::string metrics_csv_row(const std::string& name, int walkers,
                                   int steps, const MetricReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << name << ',' << walkers << ',' << steps << ',' << r.log_z << ','
     << r.log_z_se << ',' << r.terminal_ess << ',';
  if (r.w2) os << *r.w2;
  os << ',';
  if (r.mmd) os << *r.mmd;
  os << ',';
  if (r.kl_bound) os << *r.kl_bound;
  return os.str();
}

}  // namespace nets
