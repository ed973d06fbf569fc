#include <catch2/catch_amalgamated.hpp>

#include <nets/rng.hpp>

#include <set>

using namespace nets;

TEST_CASE("streams are reproducible and key-separated", "[rng]") {
  RngStream a(42, stream::kStep, 3, 17);
  RngStream b(42, stream::kStep, 3, 17);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  std::set<std::uint64_t> firsts;
  firsts.insert(RngStream(42, stream::kStep, 3, 17).next_u64());
  firsts.insert(RngStream(42, stream::kStep, 3, 18).next_u64());
  firsts.insert(RngStream(42, stream::kStep, 4, 17).next_u64());
  firsts.insert(RngStream(42, stream::kResample, 3, 17).next_u64());
  firsts.insert(RngStream(43, stream::kStep, 3, 17).next_u64());
  REQUIRE(firsts.size() == 5);
}

TEST_CASE("uniform moments", "[rng]") {
  RngStream r(7, stream::kOracle);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    s += u;
    s2 += u * u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  double mean = s / n;
  double var = s2 / n - mean * mean;
  REQUIRE(lo >= 0.0);
  REQUIRE(hi < 1.0);
  REQUIRE(std::abs(mean - 0.5) < 3.0 / std::sqrt(12.0 * n));
  REQUIRE(std::abs(var - 1.0 / 12.0) < 5e-4);
}

TEST_CASE("normal moments", "[rng]") {
  RngStream r(11, stream::kOracle);
  const int n = 200000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = r.normal();
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  REQUIRE(std::abs(s / n) < 3.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(s2 / n - 1.0) < 0.01);
  REQUIRE(std::abs(s4 / n - 3.0) < 0.1);
}

TEST_CASE("matrix fill is column-major and order-stable", "[rng]") {
  RngStream a(5, stream::kInit);
  Mat m = a.normal_mat(2, 3);
  RngStream b(5, stream::kInit);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 2; ++i) REQUIRE(m(i, j) == b.normal());
}
