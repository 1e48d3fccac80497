#include <doctest.h>

#include <cmath>
#include <set>

#include "generators.hpp"
#include "sgldstab/couplings.hpp"
#include "sgldstab/stats.hpp"

using namespace sgldstab;

namespace {

SgldConfig make_cfg(double eta, double beta, std::size_t k, double lambda) {
  SgldConfig cfg;
  cfg.eta = eta;
  cfg.beta = beta;
  cfg.k = k;
  cfg.lambda = lambda;
  return cfg;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("Householder reflection") {
  CHECK(reflect(vec({0.3, -1.2}), vec({1.0, 0.0})) == vec({-0.3, -1.2}));
  Rng rng = make_stream(4, "coup/reflect", 0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index d = static_cast<Eigen::Index>(testing::gen_size(rng, 1, 8));
    const Vector e = unit_vector(rng, d);
    const Vector xi = testing::gen_vector(rng, d);
    CHECK((reflect(reflect(xi, e), e) - xi).norm() < 1e-12);
    CHECK(reflect(xi, e).norm() == doctest::Approx(xi.norm()).epsilon(1e-12));
  }
}

TEST_CASE("synchronous coupling of identical states on one dataset stays identical") {
  Rng rng = make_stream(4, "coup/sync", 0);
  const LossModel m = LossModel::pseudo_huber(1.0);
  const DataSet S = sample_dataset(8, 2, 1.0, rng);
  const auto cfg = make_cfg(0.1, 2.0, 3, 0.5);
  CoupledState cs{vec({0.2, 0.1}), vec({0.2, 0.1}), false, std::nullopt, 0};
  for (int t = 0; t < 50; ++t) {
    cs = synchronous_pair_step(cs, m, S, S, cfg, draw_noise(8, 3, 2, rng));
    REQUIRE(cs.x == cs.y);
  }
}

TEST_CASE("synchronous quadratic full batch follows the linear map") {
  // x' - y' = (1 - eta)(x - y) + eta (zbar_a - zbar_b) for f = |x - z|^2 / 2.
  Rng rng = make_stream(4, "coup/linear", 0);
  const LossModel m = LossModel::quadratic(1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const DataSet A = sample_dataset(5, 1, 1.0, rng);
    const DataSet B = make_neighbor(A, 2, uniform_in_ball(rng, 1, 1.0));
    const auto cfg = make_cfg(testing::gen_real(rng, 0.01, 0.9), 2.0, 5, 0.0);
    const CoupledState cs{testing::gen_vector(rng, 1), testing::gen_vector(rng, 1), false, std::nullopt, 0};
    const auto next = synchronous_pair_step(cs, m, A, B, cfg, draw_noise(5, 5, 1, rng));
    double za = 0.0, zb = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      za += A[i](0) / 5.0;
      zb += B[i](0) / 5.0;
    }
    const double expected = (1.0 - cfg.eta) * (cs.x(0) - cs.y(0)) + cfg.eta * (za - zb);
    CHECK((next.x(0) - next.y(0)) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("forced mini-batches contain the forced index and are otherwise uniform") {
  Rng rng = make_stream(4, "coup/forced", 0);
  const std::size_t n = 9, k = 3, forced = 4, draws = 30000;
  std::vector<double> counts(n, 0.0);
  for (std::size_t i = 0; i < draws; ++i) {
    const auto b = sample_minibatch_forced(n, k, forced, rng);
    REQUIRE(b.size() == k);
    REQUIRE(std::set<std::size_t>(b.begin(), b.end()).size() == k);
    REQUIRE(std::find(b.begin(), b.end(), forced) != b.end());
    for (auto j : b) counts[j] += 1.0;
  }
  CHECK(counts[forced] == draws);
  // Other indices: each appears with probability (k - 1) / (n - 1); chi-square
  // with 7 degrees of freedom, 0.999 quantile 24.32.
  const double expected = draws * static_cast<double>(k - 1) / (n - 1);
  double chi2 = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    if (j != forced) chi2 += (counts[j] - expected) * (counts[j] - expected) / expected;
  CHECK(chi2 < 24.32);
  CHECK_THROWS(sample_minibatch_forced(n, k, n, rng));
}

TEST_CASE("reflected pairs stay glued after meeting") {
  Rng rng = make_stream(4, "coup/glue", 0);
  const LossModel m = LossModel::quadratic(1.0);
  const DataSet S({Vector::Zero(1)});
  const auto cfg = make_cfg(0.01, 2.0, 1, 0.0);
  CouplingConfig ccfg;
  ccfg.mode = CouplingMode::reflection;
  CoupledState cs{vec({0.0}), vec({0.5}), false, std::nullopt, 0};
  std::size_t t = 0;
  while (!cs.met && t < 100000) {
    cs = reflection_pair_step(cs, m, S, cfg, ccfg, rng);
    ++t;
  }
  REQUIRE(cs.met);
  REQUIRE(cs.meet_step.has_value());
  CHECK(*cs.meet_step <= cs.step);
  for (int i = 0; i < 100; ++i) {
    cs = reflection_pair_step(cs, m, S, cfg, ccfg, rng);
    REQUIRE(cs.x == cs.y);
  }
}

TEST_CASE("near-coincident pairs count as met") {
  Rng rng = make_stream(4, "coup/floor", 0);
  const LossModel m = LossModel::quadratic(1.0);
  const DataSet S({Vector::Zero(1)});
  CouplingConfig ccfg;
  ccfg.mode = CouplingMode::reflection;
  CoupledState cs{vec({0.0}), vec({1e-15}), false, std::nullopt, 0};
  cs = reflection_pair_step(cs, m, S, make_cfg(0.01, 2.0, 1, 0.0), ccfg, rng);
  CHECK(cs.met);
  CHECK(cs.x == cs.y);
}

TEST_CASE("reflection rejects anisotropic noise and differing datasets") {
  Rng rng = make_stream(4, "coup/errors", 0);
  const LossModel m = LossModel::quadratic(1.0);
  const DataSet S = sample_dataset(4, 2, 1.0, rng);
  auto cfg = make_cfg(0.05, 2.0, 2, 0.0);
  cfg.variant = Variant::anisotropic(0.5 * Eigen::MatrixXd::Identity(2, 2));
  CouplingConfig ccfg;
  ccfg.mode = CouplingMode::reflection;
  CoupledState cs{vec({0.0, 0.0}), vec({1.0, 0.0}), false, std::nullopt, 0};
  CHECK_THROWS(reflection_pair_step(cs, m, S, cfg, ccfg, rng));

  CoupledRunSpec spec;
  spec.horizon = 5;
  const DataSet T = make_neighbor(S, 0, vec({0.0, 0.0}));
  CHECK_THROWS(run_coupled(spec, m, S, T, make_cfg(0.05, 2.0, 2, 0.0), ccfg));
  spec.replicas = 0;
  CHECK_THROWS(run_coupled(spec, m, S, S, make_cfg(0.05, 2.0, 2, 0.0), CouplingConfig{}));
}

TEST_CASE("identical initials on one dataset give a zero distance curve") {
  Rng rng = make_stream(4, "coup/zero", 0);
  const LossModel m = LossModel::pseudo_huber(1.0);
  const DataSet S = sample_dataset(8, 2, 1.0, rng);
  CoupledRunSpec spec;
  spec.initial_a.sigma = 1.0;
  spec.initial_b.sigma = 1.0;
  spec.horizon = 40;
  spec.replicas = 70;
  spec.record_every = 10;
  for (auto mode : {CouplingMode::synchronous, CouplingMode::reflection}) {
    CouplingConfig ccfg;
    ccfg.mode = mode;
    const auto run = run_coupled(spec, m, S, S, make_cfg(0.05, 2.0, 2, 0.1), ccfg);
    REQUIRE(run.steps == std::vector<std::size_t>{0, 10, 20, 30, 40});
    for (const auto& v : run.dist) CHECK(v.mean == 0.0);
  }
}

TEST_CASE("a single replica reproduces a hand-stepped pair") {
  Rng data_rng = make_stream(4, "coup/single/data", 0);
  const LossModel m = LossModel::pseudo_huber(1.0);
  const DataSet S = sample_dataset(8, 2, 1.0, data_rng);
  const DataSet T = make_neighbor(S, 7, farthest_support_point(S[7], 1.0));
  const auto cfg = make_cfg(0.05, 2.0, 3, 0.2);
  CoupledRunSpec spec;
  spec.initial_a.mean = vec({0.5, 0.5});
  spec.initial_a.sigma = 0.3;
  spec.initial_b = spec.initial_a;
  spec.horizon = 25;
  spec.seed = 9;
  spec.stream_label = "single";
  const auto run = run_coupled(spec, m, S, T, cfg, CouplingConfig{});

  Rng rng = make_stream(9, "single", 0);
  const Vector xi0 = standard_normal_vector(rng, 2);
  CoupledState cs{spec.initial_a.mean + 0.3 * xi0, spec.initial_a.mean + 0.3 * xi0, false, std::nullopt, 0};
  for (int t = 0; t < 25; ++t) {
    const auto batch = sample_minibatch(8, 3, rng);
    const Vector inc[1] = {standard_normal_vector(rng, 2)};
    cs = synchronous_pair_window(cs, m, S, T, cfg, batch, inc);
  }
  CHECK(run.dist.back().mean == (cs.x - cs.y).norm());
  CHECK(run.dist.back().sem == 0.0);
}

TEST_CASE("run_coupled is reproducible") {
  Rng data_rng = make_stream(4, "coup/repro/data", 0);
  const LossModel m = LossModel::quadratic(1.0);
  const DataSet S = sample_dataset(8, 1, 1.0, data_rng);
  CoupledRunSpec spec;
  spec.initial_b.mean = vec({2.0});
  spec.horizon = 50;
  spec.replicas = 150;
  spec.record_every = 5;
  CouplingConfig ccfg;
  ccfg.mode = CouplingMode::reflection;
  const auto a = run_coupled(spec, m, S, S, make_cfg(0.05, 2.0, 2, 0.0), ccfg);
  const auto b = run_coupled(spec, m, S, S, make_cfg(0.05, 2.0, 2, 0.0), ccfg);
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.dist[i].mean == b.dist[i].mean);
    CHECK(a.met[i].mean == b.met[i].mean);
  }
}

TEST_CASE("default meeting threshold") {
  CHECK(default_meet_threshold(0.02, 2.0) == doctest::Approx(0.01 * std::sqrt(0.02)));
}

TEST_CASE("mode names round-trip") {
  for (auto mode : {CouplingMode::synchronous, CouplingMode::reflection})
    CHECK(coupling_mode_from_string(to_string(mode)) == mode);
  CHECK_THROWS(coupling_mode_from_string("maximal"));
}
