#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace nets {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline void check(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error(what);
}

// Max-shifted, so finite as long as one entry is finite; -inf entries are
// handled as zero mass.
inline double log_sum_exp(const Vec& v) {
  if (v.size() == 0) return kNegInf;
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

inline double log_mean_exp(const Vec& v) {
  check(v.size() > 0, "log_mean_exp: empty vector");
  return log_sum_exp(v) - std::log(static_cast<double>(v.size()));
}

// exp(v - log_sum_exp(v)); sums to one.
inline Vec softmax(const Vec& v) {
  double lse = log_sum_exp(v);
  require(std::isfinite(lse), "softmax: all entries are -inf");
  return (v.array() - lse).exp();
}

inline double sqr(double x) { return x * x; }

}  // namespace nets
