#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "generators.hpp"
#include "sgldstab/core.hpp"
#include "sgldstab/dynamics.hpp"

using namespace sgldstab;

namespace {

// Closed-form losses written out independently of the library.
double oracle_loss(const LossModel& m, const Vector& x, const Vector& z) {
  switch (m.family) {
    case LossFamily::quadratic: return 0.5 * (x - z).squaredNorm();
    case LossFamily::pseudo_huber: return std::sqrt(1.0 + (x - z).squaredNorm());
    case LossFamily::cosine_dissipative:
      return 0.5 * x.squaredNorm() + m.a * std::cos(m.w.dot(x)) + z.dot(x);
  }
  return 0.0;
}

Vector fd_grad(const LossModel& m, const Vector& x, const Vector& z) {
  const double h = 1e-5;
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (eval_loss(m, xp, z) - eval_loss(m, xm, z)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("losses match their closed forms") {
  Rng rng = make_stream(1, "core/loss", 0);
  for (int i = 0; i < 300; ++i) {
    const Eigen::Index d = static_cast<Eigen::Index>(testing::gen_size(rng, 1, 6));
    const LossModel m = testing::gen_model(rng, d);
    const Vector x = testing::gen_vector(rng, d);
    const Vector z = uniform_in_ball(rng, d, m.z_max);
    CHECK(eval_loss(m, x, z) == doctest::Approx(oracle_loss(m, x, z)).epsilon(1e-14));
  }
}

TEST_CASE("finite-difference gradient check on every built-in family") {
  Rng rng = make_stream(1, "core/fd", 0);
  for (int family = 0; family < 3; ++family) {
    for (int probe = 0; probe < 100; ++probe) {
      const Eigen::Index d = static_cast<Eigen::Index>(testing::gen_size(rng, 1, 6));
      LossModel m;
      if (family == 0) m = LossModel::quadratic(1.0);
      if (family == 1) m = LossModel::pseudo_huber(1.0);
      if (family == 2) m = LossModel::cosine_dissipative(0.7, standard_normal_vector(rng, d), 1.0);
      const Vector x = testing::gen_vector(rng, d);
      const Vector z = uniform_in_ball(rng, d, m.z_max);
      const Vector g = eval_grad(m, x, z);
      const Vector fd = fd_grad(m, x, z);
      const double rel = (g - fd).norm() / std::max(1.0, g.norm());
      CHECK(rel <= 1e-6);
    }
  }
}

TEST_CASE("derived constants of the built-in families") {
  const auto q = LossModel::quadratic(2.0).constants;
  CHECK(q.M == 1.0);
  CHECK(*q.m == 0.5);
  CHECK(*q.b == 2.0);
  CHECK_FALSE(q.L.has_value());

  const auto p = LossModel::pseudo_huber(1.0).constants;
  CHECK(*p.L == 1.0);
  CHECK(p.M == 1.0);
  CHECK_FALSE(p.dissipative());

  Vector w(2);
  w << 2.0, 0.0;
  const auto cm = LossModel::cosine_dissipative(0.5, w, 1.0);
  CHECK(cm.constants.M == 3.0);
  CHECK(*cm.constants.m == 0.5);
  CHECK(*cm.constants.b == 2.0);
  CHECK_FALSE(cm.convex());
}

TEST_CASE("minibatch gradient is the batch average") {
  Rng rng = make_stream(1, "core/batch", 0);
  const LossModel m = LossModel::pseudo_huber(1.0);
  const DataSet S = sample_dataset(10, 3, 1.0, rng);
  const Vector x = standard_normal_vector(rng, 3);
  const std::vector<std::size_t> batch{1, 4, 7};
  Vector expected = Vector::Zero(3);
  for (auto i : batch) expected += eval_grad(m, x, S[i]) / 3.0;
  CHECK((minibatch_grad(m, S, x, batch, 0.0) - expected).norm() < 1e-15);
  CHECK_THROWS(minibatch_grad(m, S, x, std::vector<std::size_t>{}, 0.0));
  CHECK_THROWS(minibatch_grad(m, S, x, std::vector<std::size_t>{10}, 0.0));
}

TEST_CASE("empirical risk averages the losses") {
  Rng rng = make_stream(1, "core/risk", 0);
  const LossModel m = LossModel::quadratic(1.0);
  const DataSet S = sample_dataset(5, 2, 1.0, rng);
  const Vector x = standard_normal_vector(rng, 2);
  double expected = 0.0;
  for (std::size_t i = 0; i < 5; ++i) expected += oracle_loss(m, x, S[i]) / 5.0;
  CHECK(empirical_risk(m, S, x) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("mini-batches are uniform size-k subsets") {
  Rng rng = make_stream(1, "core/minibatch", 0);
  const std::size_t n = 10, k = 3, draws = 30000;
  std::vector<double> counts(n, 0.0);
  for (std::size_t i = 0; i < draws; ++i) {
    const auto b = sample_minibatch(n, k, rng);
    REQUIRE(b.size() == k);
    REQUIRE(std::is_sorted(b.begin(), b.end()));
    REQUIRE(std::set<std::size_t>(b.begin(), b.end()).size() == k);
    for (auto j : b) counts[j] += 1.0;
  }
  // Containment frequency k/n and a chi-square test of the inclusion counts
  // (9 degrees of freedom, 0.999 quantile 27.88).
  const double expected = static_cast<double>(draws * k) / n;
  double chi2 = 0.0;
  for (double c : counts) {
    chi2 += (c - expected) * (c - expected) / expected;
    CHECK(std::abs(c / draws - 0.3) < 0.015);
  }
  CHECK(chi2 < 27.88);
  CHECK(sample_minibatch(4, 4, rng) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK_THROWS(sample_minibatch(4, 5, rng));
  CHECK_THROWS(sample_minibatch(4, 0, rng));
}

TEST_CASE("neighbor datasets differ in exactly one index") {
  Rng rng = make_stream(1, "core/neighbor", 0);
  const DataSet S = sample_dataset(8, 2, 1.0, rng);
  const Vector z_new = farthest_support_point(S[3], 1.0);
  const DataSet T = make_neighbor(S, 3, z_new);
  for (std::size_t i = 0; i < 8; ++i) {
    if (i == 3) CHECK(T[i] == z_new);
    else CHECK(T[i] == S[i]);
  }
  CHECK_THROWS_AS(make_neighbor(S, 8, z_new), std::out_of_range);
  CHECK_FALSE(S == T);
}

TEST_CASE("farthest support point is the scaled antipode") {
  Vector z(2);
  z << 0.3, 0.4;
  const Vector f = farthest_support_point(z, 2.0);
  CHECK(f(0) == doctest::Approx(-1.2));
  CHECK(f(1) == doctest::Approx(-1.6));
  const Vector e = farthest_support_point(Vector::Zero(3), 1.5);
  CHECK(e(0) == 1.5);
  CHECK(e.norm() == 1.5);
}

TEST_CASE("datasets reject mixed dimensions") {
  std::vector<Vector> pts{Vector::Zero(2), Vector::Zero(3)};
  CHECK_THROWS(DataSet(pts));
}

TEST_CASE("every declared assumption certifies on the built-in families") {
  Rng rng = make_stream(1, "core/certify", 0);
  for (Eigen::Index d : {1, 3}) {
    Vector w = Vector::Zero(d);
    w(0) = 2.0;
    for (const LossModel& m : {LossModel::quadratic(1.0), LossModel::pseudo_huber(1.0),
                               LossModel::cosine_dissipative(0.5, w, 1.0)}) {
      for (Assumption a : declared_assumptions(m)) {
        const auto cert = certify(m, a, 2000, d, rng);
        INFO(to_string(m.family), " ", cert.check, " worst ", cert.worst_violation);
        CHECK(cert.passed);
        CHECK(cert.probes == 2000);
      }
    }
  }
}

TEST_CASE("doubling m breaks the dissipativity certificate") {
  Rng rng = make_stream(1, "core/negative", 0);
  LossModel m = LossModel::quadratic(1.0);
  *m.constants.m *= 2.0;
  const auto cert = certify(m, Assumption::dissipativity, 2000, 2, rng);
  CHECK_FALSE(cert.passed);
  CHECK(cert.worst_violation > kCertificationTolerance);
}

TEST_CASE("an understated Lipschitz constant fails") {
  Rng rng = make_stream(1, "core/negative_lip", 0);
  LossModel m = LossModel::pseudo_huber(1.0);
  m.constants.L = 0.5;
  CHECK_FALSE(certify(m, Assumption::lipschitz, 2000, 2, rng).passed);
}

TEST_CASE("certify refuses assumptions the model does not declare") {
  Rng rng = make_stream(1, "core/undeclared", 0);
  CHECK_THROWS(certify(LossModel::quadratic(1.0), Assumption::lipschitz, 10, 1, rng));
  CHECK_THROWS(certify(LossModel::pseudo_huber(1.0), Assumption::dissipativity, 10, 1, rng));
}

TEST_CASE("family names round-trip") {
  for (auto f : {LossFamily::quadratic, LossFamily::pseudo_huber, LossFamily::cosine_dissipative})
    CHECK(loss_family_from_string(to_string(f)) == f);
  CHECK_THROWS(loss_family_from_string("huber"));
}
