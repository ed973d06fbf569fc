#pragma once

#include <nets/potentials.hpp>
#include <nets/rng.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace nets {

// Walker population: positions are columns of x, one accumulated log-weight
// per walker, and the current anneal time.
struct WalkerEnsemble {
  Mat x;       // (dim, n)
  Vec log_w;   // (n)
  double t = 0.0;

  Eigen::Index size() const { return x.cols(); }
  int dim() const { return static_cast<int>(x.rows()); }
};

inline WalkerEnsemble init_ensemble(const TimePotential& u, Eigen::Index n,
                                    std::uint64_t seed) {
  check(n > 0, "init_ensemble: need at least one walker");
  RngStream rng(seed, stream::kInit);
  WalkerEnsemble e;
  e.x = u.sample_base(n, rng);
  e.log_w = Vec::Zero(n);
  e.t = 0.0;
  return e;
}

// Normalized effective sample size in (0, 1]. -inf entries are dead walkers
// with zero weight; NaN is a bookkeeping bug and is rejected.
inline double ess_from_log_weights(const Vec& log_w) {
  check(log_w.size() > 0, "ess: empty weights");
  require(!log_w.hasNaN(), "ess: NaN log-weight");
  const double m = log_w.maxCoeff();
  require(std::isfinite(m), "ess: all walkers have zero weight");
  const Eigen::ArrayXd w = (log_w.array() - m).exp();
  const double s1 = w.sum(), s2 = w.square().sum();
  return s1 * s1 / (static_cast<double>(log_w.size()) * s2);
}

inline double ess(const WalkerEnsemble& e) {
  return ess_from_log_weights(e.log_w);
}

// Self-normalized weights summing to one.
inline Vec normalized_weights(const WalkerEnsemble& e) {
  return softmax(e.log_w);
}

// log(Z_t / Z_0) estimate and its delta-method standard error.
inline double log_partition_ratio(const WalkerEnsemble& e) {
  return log_mean_exp(e.log_w);
}

inline double log_partition_se(const WalkerEnsemble& e) {
  const double m = e.log_w.maxCoeff();
  require(std::isfinite(m), "log_partition_se: all walkers have zero weight");
  const Eigen::ArrayXd w = (e.log_w.array() - m).exp();
  const double n = static_cast<double>(e.log_w.size());
  const double mean = w.sum() / n;
  const double var = (w - mean).square().sum() / (n - 1.0);
  return std::sqrt(var / n) / mean;
}

// Self-normalized estimate of E[f] with a delta-method standard error for
// the ratio estimator.
inline std::pair<double, double> weighted_mean_and_se(const Vec& log_w,
                                                      const Vec& f) {
  check(log_w.size() == f.size(), "weighted_mean_and_se: size mismatch");
  Vec w = softmax(log_w);
  const double mean = w.dot(f);
  const double se =
      std::sqrt((w.array().square() * (f.array() - mean).square()).sum());
  return {mean, se};
}

// Ancestor indices for systematic resampling with a single uniform offset:
// walker i survives floor or ceil of n * weight_i times.
inline std::vector<Eigen::Index> systematic_ancestors(const Vec& log_w,
                                                      RngStream& rng) {
  const Eigen::Index n = log_w.size();
  Vec w = softmax(log_w);
  const double u0 = rng.uniform();
  std::vector<Eigen::Index> anc(n);
  double cum = w[0];
  Eigen::Index j = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double target = (static_cast<double>(i) + u0) / static_cast<double>(n);
    while (cum < target && j + 1 < n) cum += w[++j];
    anc[i] = j;
  }
  return anc;
}

inline void apply_ancestors(Mat& columns, const std::vector<Eigen::Index>& anc) {
  Mat fresh(columns.rows(), columns.cols());
  for (Eigen::Index i = 0; i < columns.cols(); ++i)
    fresh.col(i) = columns.col(anc[i]);
  columns = std::move(fresh);
}

// Systematic resampling. Positions are duplicated in ancestor order; every
// new log-weight is set to the log-mean of the old weights so the partition
// estimate is untouched.
inline void systematic_resample(WalkerEnsemble& e, RngStream& rng) {
  const auto anc = systematic_ancestors(e.log_w, rng);
  apply_ancestors(e.x, anc);
  e.log_w.setConstant(log_mean_exp(e.log_w));
}

// Binary dump: magic, dim, walker count, time, column-major positions,
// log-weights. Round-trips exactly.
inline void save_ensemble(const std::string& path, const WalkerEnsemble& e) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "save_ensemble: cannot open " + path);
  const char magic[8] = {'N', 'E', 'T', 'S', 'E', 'N', 'S', '1'};
  f.write(magic, 8);
  const std::int64_t d = e.dim(), n = e.size();
  f.write(reinterpret_cast<const char*>(&d), 8);
  f.write(reinterpret_cast<const char*>(&n), 8);
  f.write(reinterpret_cast<const char*>(&e.t), 8);
  f.write(reinterpret_cast<const char*>(e.x.data()),
          static_cast<std::streamsize>(sizeof(double) * d * n));
  f.write(reinterpret_cast<const char*>(e.log_w.data()),
          static_cast<std::streamsize>(sizeof(double) * n));
  require(f.good(), "save_ensemble: write failed for " + path);
}

inline WalkerEnsemble load_ensemble(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "load_ensemble: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  require(f.good() && std::string(magic, 8) == "NETSENS1",
          "load_ensemble: bad magic in " + path);
  std::int64_t d = 0, n = 0;
  f.read(reinterpret_cast<char*>(&d), 8);
  f.read(reinterpret_cast<char*>(&n), 8);
  require(d > 0 && n > 0, "load_ensemble: corrupt header in " + path);
  WalkerEnsemble e;
  f.read(reinterpret_cast<char*>(&e.t), 8);
  e.x.resize(d, n);
  e.log_w.resize(n);
  f.read(reinterpret_cast<char*>(e.x.data()),
         static_cast<std::streamsize>(sizeof(double) * d * n));
  f.read(reinterpret_cast<char*>(e.log_w.data()),
         static_cast<std::streamsize>(sizeof(double) * n));
  require(f.good(), "load_ensemble: truncated file " + path);
  return e;
}

// One row per walker: x0,...,x{d-1},log_weight. A leading comment line
// carries the anneal time.
inline void write_ensemble_csv(const std::string& path,
                               const WalkerEnsemble& e) {
  std::ofstream f(path);
  require(f.good(), "write_ensemble_csv: cannot open " + path);
  f.precision(17);
  f << "# time=" << e.t << "\n";
  for (int k = 0; k < e.dim(); ++k) f << "x" << k << ",";
  f << "log_weight\n";
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    for (int k = 0; k < e.dim(); ++k) f << e.x(k, i) << ",";
    f << e.log_w[i] << "\n";
  }
  require(f.good(), "write_ensemble_csv: write failed for " + path);
}

}  // namespace nets
