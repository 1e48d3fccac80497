#include <doctest.h>

#include <cmath>
#include <set>

#include "sgldstab/rng.hpp"
#include "sgldstab/stats.hpp"

using namespace sgldstab;

TEST_CASE("equal stream keys give equal sequences") {
  Rng a = make_stream(42, "stability", 3);
  Rng b = make_stream(42, "stability", 3);
  for (int i = 0; i < 1000; ++i) CHECK(a() == b());
}

TEST_CASE("stream ids separate seeds, labels and replicas") {
  std::set<std::uint64_t> ids;
  for (std::uint64_t seed = 0; seed < 4; ++seed)
    for (const char* label : {"stability", "contraction", "generalization"})
      for (std::uint64_t r = 0; r < 2000; ++r) ids.insert(stream_id(seed, label, r));
  CHECK(ids.size() == 4u * 3u * 2000u);
}

TEST_CASE("neighboring replicas are not shifted copies") {
  Rng a = make_stream(1, "x", 0);
  Rng b = make_stream(1, "x", 1);
  std::vector<std::uint64_t> sa(64), sb(64);
  for (auto& v : sa) v = a();
  for (auto& v : sb) v = b();
  for (std::size_t lag = 0; lag < 32; ++lag) {
    bool all_equal = true;
    for (std::size_t i = 0; i + lag < 64; ++i) all_equal = all_equal && sa[i + lag] == sb[i];
    CHECK_FALSE(all_equal);
  }
}

TEST_CASE("hash_label is FNV-1a") {
  CHECK(hash_label("") == 0xcbf29ce484222325ULL);
  CHECK(hash_label("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("standard normal moments") {
  Rng rng = make_stream(7, "normal", 0);
  const int n = 200000;
  std::vector<double> v(n), sq(n);
  for (int i = 0; i < n; ++i) {
    v[i] = standard_normal(rng);
    sq[i] = v[i] * v[i];
  }
  const auto m = mean_sem(v);
  const auto s = mean_sem(sq);
  CHECK(std::abs(m.mean) < 4.0 * m.sem);
  CHECK(std::abs(s.mean - 1.0) < 4.0 * s.sem);
}

TEST_CASE("unit vectors have unit norm") {
  Rng rng = make_stream(7, "unit", 0);
  for (int d = 1; d <= 8; ++d)
    for (int i = 0; i < 100; ++i) CHECK(unit_vector(rng, d).norm() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("uniform_in_ball stays inside and has the uniform radial law") {
  Rng rng = make_stream(7, "ball", 0);
  for (int d : {1, 2, 4}) {
    const int n = 40000;
    int inner = 0;
    for (int i = 0; i < n; ++i) {
      const double r = uniform_in_ball(rng, d, 2.0).norm();
      REQUIRE(r <= 2.0);
      if (r <= 1.0) ++inner;
    }
    // P(|x| <= R/2) = 2^-d; binomial standard error bound.
    const double p = std::pow(0.5, d);
    const double freq = static_cast<double>(inner) / n;
    CHECK(std::abs(freq - p) < 4.0 * std::sqrt(p * (1 - p) / n));
  }
}
