#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "sgldstab/bounds.hpp"

using namespace sgldstab;

namespace {

// Independent oracle for the Lipschitz-regime constants, transcribed from the
// definitions with no shared code.
struct LipOracle {
  double c1, c2, c3, C1;
};

LipOracle lip_oracle(double L, double M, double lambda, double beta) {
  LipOracle o;
  o.c1 = std::exp(2.0 * beta * L * L * (M - lambda) / (lambda * lambda));
  o.c2 = 8.0 * (L * L * beta / lambda + 1.0) / lambda;
  o.c3 = std::max(16.0 * L * L * beta / (lambda * lambda), 2.0 / lambda);
  o.C1 = lambda >= M ? o.c3 : o.c1 * o.c2;
  return o;
}

// Relative agreement that also accepts two equal infinities.
bool close(double a, double b, double rel) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= rel * std::abs(b);
}

}  // namespace

TEST_CASE("golden constants") {
  // Frozen from hand arithmetic: lambda >= M gives C1 = c3 = max(16*2/4, 1) = 8.
  CHECK(lipschitz_constants(1.0, 1.0, 2.0, 2.0).C1 == 8.0);
  // lambda < M: c1 = exp(2*2*1*1/1) = e^4, c2 = 8 (2 + 1) = 24, C1 = 24 e^4.
  const auto c = lipschitz_constants(1.0, 2.0, 1.0, 2.0);
  CHECK(std::abs(c.c1 / std::exp(4.0) - 1.0) <= 1e-9);
  CHECK(c.c2 == 24.0);
  CHECK(c.C1 == doctest::Approx(1310.3556).epsilon(1e-7));
  CHECK(c.C1 == doctest::Approx(24.0 * std::exp(4.0)).epsilon(1e-14));
  // R = 2 sqrt((1 + 1 + 1)(1 + 1) - 1) = 2 sqrt 5.
  const auto dc = dissipative_constants(1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0);
  CHECK(std::abs(dc.R - 2.0 * std::sqrt(5.0)) <= 1e-12);
  // (1/1)(6)^0 (1 + 4*1*1) [(2 + 8) + 1 + 2] = 65.
  CHECK(ctilde(1, 1.0, 1.0, 1.0, 1.0, 1.0) == 65.0);
}

TEST_CASE("Lipschitz constants agree with the oracle on random inputs") {
  Rng rng = make_stream(6, "bounds/lip", 0);
  for (int i = 0; i < 200; ++i) {
    const double L = testing::gen_real(rng, 0.1, 3.0), M = testing::gen_real(rng, 0.1, 3.0);
    const double lambda = testing::gen_real(rng, 0.1, 4.0), beta = testing::gen_real(rng, 0.1, 4.0);
    const auto c = lipschitz_constants(L, M, lambda, beta);
    const auto o = lip_oracle(L, M, lambda, beta);
    CHECK(close(c.c1, o.c1, 1e-12));
    CHECK(c.c2 == doctest::Approx(o.c2).epsilon(1e-12));
    CHECK(c.c3 == doctest::Approx(o.c3).epsilon(1e-12));
    CHECK(close(c.C1, o.C1, 1e-12));
    CHECK(c.R_kappa == doctest::Approx(4.0 * L / lambda).epsilon(1e-14));
    CHECK(close(c.C2, 4.0 * L * L * std::max(o.c1, 1.0), 1e-12));
    const auto printed = lipschitz_constants(L, M, lambda, beta, 0.0, C2Form::printed);
    CHECK(printed.C2 == doctest::Approx(4.0 * L * L * std::min(o.c1, 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("dissipative constants follow their definitions") {
  const double M = 2.0, m = 0.5, b = 1.5, d = 3.0, beta = 0.8;
  const auto c = dissipative_constants(M, m, b, d, beta, 2.0, 9.0);
  const double R = 2.0 * std::sqrt((beta * d + beta * m + b) * (1.0 / (beta * m) + 1.0) - 1.0);
  const double phi = 0.5 * std::exp(-(beta * M / 2.0) * R * R - 2.0 * R);
  const double eps = std::min(1.0, phi / (R * R * (beta * b + beta * m + d)));
  const double rate = std::min({beta * m / 2.0, 2.0 * (beta * b + beta * m + d) * eps, 2.0 * phi / (R * R)});
  CHECK(c.R == doctest::Approx(R).epsilon(1e-14));
  CHECK(c.phi == doctest::Approx(phi).epsilon(1e-12));
  CHECK(c.eps == doctest::Approx(eps).epsilon(1e-12));
  CHECK(c.C4 == doctest::Approx((beta / 2.0) / rate).epsilon(1e-12));
  CHECK(c.c_tilde_4 == doctest::Approx(1.0 + (2.0 * R / phi) * std::max(eps * R, 1.0)).epsilon(1e-12));
  CHECK(c.c_tilde_p.at(1) == ctilde(1, M, m, b, d, beta));
  CHECK(c.c_tilde_p.at(2) == ctilde(2, M, m, b, d, beta));
  CHECK(c.C6 >= c.C5);
  CHECK_THROWS(dissipative_constants(1.0, 2.0, 1.0, 1.0, 1.0, 0.0, 0.0));
  CHECK_THROWS(dissipative_constants(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0));
}

TEST_CASE("ctilde grows with p") {
  CHECK(ctilde(2, 1.0, 1.0, 1.0, 1.0, 1.0) > ctilde(1, 1.0, 1.0, 1.0, 1.0, 1.0));
  CHECK_THROWS(ctilde(0, 1.0, 1.0, 1.0, 1.0, 1.0));
}

TEST_CASE("theorem envelopes") {
  const auto c = lipschitz_constants(1.0, 1.0, 2.0, 2.0);
  // Linear branch while eta t < (C1 + 1) n / (n - k) = 9 * 64 / 56.
  CHECK(lipschitz_gen_bound(c, 64, 8, 0.05, 10.0, 1, true) == doctest::Approx(c.C2 * 0.5 * 0.125));
  const double plateau = 9.0 * 64.0 / 56.0;
  CHECK(lipschitz_gen_bound(c, 64, 8, 0.05, 1e6, 1, true) == doctest::Approx(c.C2 * plateau * 0.125));
  // Full batch keeps growing.
  CHECK(lipschitz_gen_bound(c, 64, 64, 0.05, 1e6, 1, true) == doctest::Approx(c.C2 * 5e4));
  CHECK(lipschitz_gen_bound(c, 64, 8, 0.05, 10.0, 4, false) ==
        doctest::Approx(c.C3 * 0.5 * (0.125 + std::sqrt(0.2))));
  CHECK_THROWS(lipschitz_gen_bound(c, 64, 8, 1.0, 10.0, 1, true));
  CHECK_THROWS(lipschitz_gen_bound(c, 64, 8, 0.6, 10.0, 1, false));
  CHECK_THROWS(lipschitz_gen_bound(c, 64, 8, 0.05, -1.0, 1, true));
  CHECK_THROWS(lipschitz_gen_bound(c, 8, 64, 0.05, 1.0, 1, true));

  const auto dc = dissipative_constants(1.0, 0.5, 0.5, 1.0, 1.0, 0.0, 0.0);
  CHECK(dissipative_gen_bound(dc, 32, 4, 0.04, 5.0, true) ==
        doctest::Approx(dc.C5 * 0.2 * 0.125 / 0.2));
  CHECK(dissipative_gen_bound(dc, 32, 4, 0.04, 5.0, false) ==
        doctest::Approx(dc.C6 * 0.2 * (0.125 / 0.2 + 0.2)));
}

TEST_CASE("bounds are monotone in t") {
  Rng rng = make_stream(6, "bounds/monotone", 0);
  const auto c = lipschitz_constants(1.0, 2.0, 1.0, 2.0);
  const auto dc = dissipative_constants(1.0, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double t1 = testing::gen_real(rng, 0.0, 1e4);
    const double t2 = t1 + testing::gen_real(rng, 0.0, 1e3);
    CHECK(lipschitz_gen_bound(c, 64, 8, 0.05, t1, 1, true) <= lipschitz_gen_bound(c, 64, 8, 0.05, t2, 1, true));
    CHECK(dissipative_gen_bound(dc, 64, 8, 0.05, t1, true) <= dissipative_gen_bound(dc, 64, 8, 0.05, t2, true));
    CHECK(lipschitz_w1_envelope(c, 64, 8, 0.05, t1, 1, true) <=
          lipschitz_w1_envelope(c, 64, 8, 0.05, t2, 1, true) * (1.0 + 1e-12));
  }
}

TEST_CASE("geometric sum and mixture rate") {
  CHECK(geometric_sum(1.0, 7.0) == 7.0);
  double s = 0.0;
  for (int j = 0; j < 10; ++j) s += std::pow(0.9, j);
  CHECK(geometric_sum(0.9, 10.0) == doctest::Approx(s).epsilon(1e-14));
  const double r = mixture_rate(8.0, 64, 8, 0.05);
  CHECK(r == doctest::Approx(0.125 + 0.875 * std::exp(-0.05 / 8.0)).epsilon(1e-15));
  CHECK(r > 0.125);
  CHECK(r < 1.0);
  CHECK(mixture_rate(8.0, 64, 64, 0.05) == 1.0);
}

TEST_CASE("stability envelopes saturate for k < n") {
  const auto c = lipschitz_constants(1.0, 1.0, 2.0, 2.0);
  const double rate = mixture_rate(c.C1, 64, 8, 0.05);
  const double limit = 2.0 * std::max(c.c1, 1.0) * (2.0 * 0.05 * 0.125) / (1.0 - rate);
  CHECK(lipschitz_w1_envelope(c, 64, 8, 0.05, 1e7, 1, true) == doctest::Approx(limit).epsilon(1e-9));
}

TEST_CASE("lemma-level bounds") {
  CHECK(moment_cts(2, 4.0, 0.5, 0.5, 2.0, 2.0, 0.0) == 4.0);
  CHECK(moment_cts(2, 4.0, 0.5, 0.5, 2.0, 2.0, 1e9) == doctest::Approx(2.0 + 4.0));
  CHECK(first_moment_disc(1.0, 1.0, 1.0, 2.0, 2.0, 0.5) == doctest::Approx(1.0 + 1.0 + std::sqrt(4.0)));
  CHECK_THROWS(first_moment_disc(1.0, 1.0, 1.0, 2.0, 2.0, 1.0));
  CHECK(synch_div_lip(0.5, 1.0, 2.0) == 4.5);
  CHECK(synch_div_diss(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0) == doctest::Approx(4.0 * 6.0 + 4.0));
  CHECK(disc_err_lip(0.1, 1.0, 1.0, 1.0, 0.0, 1.0, 2.0) ==
        doctest::Approx(0.1 * 2.0 * (0.2 + 2.0 * std::sqrt(0.1)) * std::exp(2.0)));
  CHECK(disc_err_diss_sq(0.1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0) ==
        doctest::Approx(8e-3 * std::exp(0.02) * 3.0));
  CHECK(gradient_origin(2.0, 1.0, 4.0) == 4.0);
  CHECK(minima_radius(1.0, 4.0) == 2.0);
  CHECK(stability_continuity_lip(2.0, 0.5) == 1.0);
  CHECK(stability_to_gen(0.3) == 0.3);
  CHECK_THROWS(stability_to_gen(-0.1));
}

TEST_CASE("analytic_lemma_bound dispatches by name") {
  LemmaParams q;
  q.m = 1.0;
  q.b = 4.0;
  CHECK(analytic_lemma_bound(lemma_kind_from_string("minima_radius"), q) == 2.0);
  CHECK_THROWS(analytic_lemma_bound(LemmaKind::gradient_origin, q));
  q.M = 2.0;
  CHECK(analytic_lemma_bound(LemmaKind::gradient_origin, q) == 4.0);
  for (auto k : {LemmaKind::moment_cts, LemmaKind::disc_err_diss, LemmaKind::stability_continuity_diss})
    CHECK(lemma_kind_from_string(to_string(k)) == k);
  CHECK_THROWS(lemma_kind_from_string("nope"));
}
