#pragma once

#include <nets/common.hpp>

#include <cstdint>

namespace nets {

// Counter-based generator: every draw is a pure function of (key, counter),
// so streams can be carved out per (seed, event, walker) and results do not
// depend on evaluation order or thread count.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t rng_key(std::uint64_t seed, std::uint64_t a = 0,
                             std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t k = mix64(seed ^ 0x853c49e6748fea9bull);
  k = mix64(k ^ mix64(a ^ 0xda3e39cb94b95bdbull));
  k = mix64(k ^ mix64(b ^ 0xd1b54a32d192ed03ull));
  return mix64(k ^ mix64(c));
}

// Stream identifiers used to derive independent keys from one user seed.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kStep = 2;
inline constexpr std::uint64_t kResample = 3;
inline constexpr std::uint64_t kTimeGrid = 4;
inline constexpr std::uint64_t kParamInit = 5;
inline constexpr std::uint64_t kProbe = 6;
inline constexpr std::uint64_t kOracle = 7;
}  // namespace stream

class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}
  RngStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
            std::uint64_t c = 0)
      : key_(rng_key(seed, a, b, c)) {}

  std::uint64_t next_u64() { return mix64(key_ + 0x2545f4914f6cdd1dull * ++n_); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // (0, 1]
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Box-Muller, no caching: each call consumes exactly two counters.
  double normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925287 * u2);
  }

  Vec normal_vec(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // Column-major fill so a (d, n) matrix assigns walker i the columns' draws
  // in a fixed order.
  Mat normal_mat(Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection-free modulo is fine here: n is tiny relative to 2^64.
    return next_u64() % n;
  }

 private:
  std::uint64_t key_;
  std::uint64_t n_ = 0;
};

}  // namespace nets
