#include "sgldstab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sgldstab {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be positive");
}

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be >= 0");
}

void check_batch(std::size_t n, std::size_t k) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (k > n) throw std::invalid_argument("k must not exceed n");
}

double envelope(double C, std::size_t n, std::size_t k, double eta, double t) {
  const double linear = eta * t;
  if (k == n) return linear;
  const double plateau = (C + 1.0) * static_cast<double>(n) / static_cast<double>(n - k);
  return std::min(linear, plateau);
}

}  // namespace

LipschitzConstants lipschitz_constants(double L, double M, double lambda, double beta,
                                       double sigma1, C2Form form) {
  require_positive(L, "L");
  require_positive(M, "M");
  require_positive(lambda, "lambda");
  require_positive(beta, "beta");
  require_nonnegative(sigma1, "sigma1");

  LipschitzConstants c;
  c.L = L;
  c.M = M;
  c.lambda = lambda;
  c.beta = beta;
  c.sigma1 = sigma1;
  c.c2_form = form;
  c.convex = lambda >= M;
  c.a = beta * (M - lambda);
  c.b_rate = beta * lambda / 2.0;
  c.R_kappa = 4.0 * L / lambda;
  c.R0 = c.convex ? 0.0 : c.R_kappa;
  c.phi_min = c.convex ? 1.0 : std::exp(-c.a * c.R_kappa * c.R_kappa / 8.0);
  c.R1_tilde = c.R_kappa / 2.0 + std::sqrt(c.R_kappa * c.R_kappa / 4.0 + 8.0 / c.b_rate);
  c.c1 = std::exp(2.0 * beta * L * L * (M - lambda) / (lambda * lambda));
  c.c2 = 8.0 * (L * L * beta / lambda + 1.0) / lambda;
  c.c3 = std::max(16.0 * L * L * beta / (lambda * lambda), 2.0 / lambda);
  c.C1 = c.convex ? c.c3 : c.c1 * c.c2;
  const double c1_factor = form == C2Form::proof ? std::max(c.c1, 1.0) : std::min(c.c1, 1.0);
  c.C2 = 4.0 * L * L * c1_factor;
  c.C3 = 4.0 * L * std::max(c.c1, 1.0) *
         (L + (lambda + M) * (lambda * sigma1 + 2.0 * L + 2.0 * std::sqrt(2.0 / beta)));
  return c;
}

double lipschitz_gen_bound(const LipschitzConstants& c, std::size_t n, std::size_t k, double eta,
                           double t, std::size_t d, bool continuous) {
  check_batch(n, k);
  if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
  const double kn = static_cast<double>(k) / static_cast<double>(n);
  const double env = envelope(c.C1, n, k, eta, t);
  if (continuous) return c.C2 * env * kn;
  if (!(eta < 1.0 / c.lambda)) throw std::invalid_argument("discrete bound needs eta < 1/lambda");
  return c.C3 * env * (kn + std::sqrt(eta * static_cast<double>(d)));
}

double ctilde(int p, double M, double m, double b, double d, double beta) {
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  require_positive(M, "M");
  require_positive(m, "m");
  require_nonnegative(b, "b");
  require_positive(d, "d");
  require_positive(beta, "beta");
  const double pd = static_cast<double>(p);
  const double pre = (1.0 / m) * std::pow(6.0 / m, pd - 1.0) *
                     (1.0 + std::pow(2.0, 2.0 * pd) * pd * (2.0 * pd - 1.0) * d / (m * beta));
  const double bracket = std::pow(2.0 * b + 8.0 * (M * M) / (m * m) * b, pd) + 1.0 +
                         2.0 * std::pow(d / beta, pd - 1.0) * std::pow(2.0 * pd - 1.0, pd);
  return pre * bracket;
}

DissipativeConstants dissipative_constants(double M, double m, double b, double d, double beta,
                                           double sigma2, double sigma4) {
  require_positive(M, "M");
  require_positive(m, "m");
  require_positive(b, "b");
  require_positive(d, "d");
  require_positive(beta, "beta");
  require_nonnegative(sigma2, "sigma2");
  require_nonnegative(sigma4, "sigma4");
  if (M < m) throw std::invalid_argument("M must be >= m");

  DissipativeConstants c;
  c.M = M;
  c.m = m;
  c.b = b;
  c.d = d;
  c.beta = beta;
  c.sigma2 = sigma2;
  c.sigma4 = sigma4;

  const double drift = beta * b + beta * m + d;
  c.R = 2.0 * std::sqrt((beta * d + beta * m + b) * (1.0 / (beta * m) + 1.0) - 1.0);
  c.phi = 0.5 * std::exp(-(beta * M / 2.0) * c.R * c.R - 2.0 * c.R);
  c.eps = std::min(1.0, c.phi / (c.R * c.R * drift));
  const double rate = std::min({beta * m / 2.0, 2.0 * drift * c.eps, 2.0 * c.phi / (c.R * c.R)});
  c.C4 = (beta / 2.0) / rate;

  c.c_tilde_p[1] = ctilde(1, M, m, b, d, beta);
  c.c_tilde_p[2] = ctilde(2, M, m, b, d, beta);
  const double ct2 = c.c_tilde_p[2];
  const double s4 = std::sqrt(sigma4);
  const double sc = std::sqrt(ct2);
  const double eps = c.eps;
  const double M2 = M * M;

  c.c_tilde_2 = 2.0 * (M2 * s4 + M2 * sc + M2 * (3.0 * b + 2.0 * d / beta) / m + d / beta) *
                (1.0 + 2.0 * eps + 6.0 * eps * s4 + 6.0 * eps * sc +
                 12.0 * eps * (b / m + (d + 2.0) / (beta * m)));
  // g(R) = R for the cap distortion.
  c.c_tilde_4 = 1.0 + (2.0 * c.R / c.phi) * std::max(eps * c.R, 1.0);
  c.c_tilde_5 = 2.0 * std::sqrt(2.0) * std::exp(M2) * M *
                std::sqrt(M2 * s4 + M2 * sc + M2 * b / m + d / beta) *
                (1.0 + 2.0 * eps * (1.0 + s4 + sc));
  const double prefactor = M * (sigma2 + std::sqrt(b / m)) / (c.phi * eps * std::max(c.R, 2.0));
  c.C5 = prefactor * c.c_tilde_2;
  c.C6 = prefactor * std::max(c.c_tilde_2, 2.0 * c.c_tilde_4 * c.c_tilde_5);
  return c;
}

double mixture_rate(double C, std::size_t n, std::size_t k, double eta) {
  check_batch(n, k);
  require_positive(C, "C");
  require_positive(eta, "eta");
  const double kn = static_cast<double>(k) / static_cast<double>(n);
  return kn + (1.0 - kn) * std::exp(-eta / C);
}

double geometric_sum(double c, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");
  if (c == 1.0) return t;
  return (1.0 - std::pow(c, t)) / (1.0 - c);
}

double dissipative_gen_bound(const DissipativeConstants& c, std::size_t n, std::size_t k,
                             double eta, double t, bool continuous) {
  check_batch(n, k);
  if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
  const double kn = static_cast<double>(k) / static_cast<double>(n);
  const double env = envelope(c.C4, n, k, eta, t);
  if (continuous) return c.C5 * env * kn / std::sqrt(eta);
  if (!(eta <= 1.0 / (2.0 * c.m))) throw std::invalid_argument("discrete bound needs eta <= 1/(2m)");
  return c.C6 * env * (kn / std::sqrt(eta) + std::sqrt(eta));
}

double lipschitz_w1_envelope(const LipschitzConstants& c, std::size_t n, std::size_t k,
                             double eta, double t, std::size_t d, bool continuous) {
  const double kn = static_cast<double>(k) / static_cast<double>(n);
  double per_step = 2.0 * c.L * eta * kn;
  if (!continuous)
    per_step += 2.0 * disc_err_lip(eta, c.lambda, c.M, c.L, c.sigma1, static_cast<double>(d), c.beta);
  return 2.0 * std::max(c.c1, 1.0) * geometric_sum(mixture_rate(c.C1, n, k, eta), t) * per_step;
}

double dissipative_rho_envelope(const DissipativeConstants& c, std::size_t n, std::size_t k,
                                double eta, double t, bool continuous) {
  const double kn = static_cast<double>(k) / static_cast<double>(n);
  double per_step = c.c_tilde_2 * kn * std::sqrt(eta);
  if (!continuous) per_step += 2.0 * c.c_tilde_4 * c.c_tilde_5 * std::pow(eta, 1.5);
  return geometric_sum(mixture_rate(c.C4, n, k, eta), t) * per_step;
}

double moment_cts(int p, double mu_p, double m, double b, double d, double beta, double t) {
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  require_nonnegative(mu_p, "initial moment");
  require_positive(m, "m");
  require_nonnegative(b, "b");
  require_positive(d, "d");
  require_positive(beta, "beta");
  if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");
  const double pd = static_cast<double>(p);
  const double decay = std::exp(-pd * m * t / 2.0);
  const double level = std::pow(2.0 * b / m + 2.0 * (pd + d - 2.0) / (beta * m), pd / 2.0);
  return mu_p * decay + level * (1.0 - decay);
}

double first_moment_disc(double mu1, double L, double lambda, double d, double beta, double eta) {
  require_nonnegative(mu1, "mu1");
  require_nonnegative(L, "L");
  require_positive(lambda, "lambda");
  require_positive(d, "d");
  require_positive(beta, "beta");
  require_positive(eta, "eta");
  if (!(eta < 1.0 / lambda)) throw std::invalid_argument("first moment bound needs eta < 1/lambda");
  return mu1 + (L + std::sqrt(2.0 * d / (beta * eta))) / lambda;
}

double synch_div_lip(double w1_0, double L, double t) {
  require_nonnegative(w1_0, "W1_0");
  require_nonnegative(L, "L");
  require_nonnegative(t, "t");
  return w1_0 + 2.0 * L * t;
}

double synch_div_diss(double M, double m, double b, double d, double beta, double second0,
                      double t) {
  require_positive(M, "M");
  require_positive(m, "m");
  require_nonnegative(b, "b");
  require_positive(d, "d");
  require_positive(beta, "beta");
  require_nonnegative(second0, "initial second moment");
  require_nonnegative(t, "t");
  return 4.0 * M * M * (second0 + (3.0 * b + 2.0 * d / beta) / m) * t * t + 4.0 * d * t / beta;
}

double disc_err_lip(double eta, double lambda, double M, double L, double sigma1, double d,
                    double beta) {
  require_positive(eta, "eta");
  require_nonnegative(lambda, "lambda");
  require_positive(M, "M");
  require_nonnegative(L, "L");
  require_nonnegative(sigma1, "sigma1");
  require_positive(d, "d");
  require_positive(beta, "beta");
  return eta * (lambda + M) * (eta * (lambda * sigma1 + 2.0 * L) + 2.0 * std::sqrt(2.0 * d * eta / beta)) *
         std::exp(M + 1.0);
}

double disc_err_diss_sq(double eta, double M, double m, double b, double d, double beta,
                        double mu2) {
  require_positive(eta, "eta");
  require_positive(M, "M");
  require_positive(m, "m");
  require_nonnegative(b, "b");
  require_positive(d, "d");
  require_positive(beta, "beta");
  require_nonnegative(mu2, "mu2");
  const double M2 = M * M;
  return 8.0 * std::pow(eta, 3) * std::exp(2.0 * eta * eta * M2) * M2 *
         (M2 * mu2 + M2 * b / m + d / beta);
}

double gradient_origin(double M, double m, double b) {
  require_positive(M, "M");
  require_positive(m, "m");
  require_nonnegative(b, "b");
  return M * std::sqrt(b / m);
}

double minima_radius(double m, double b) {
  require_positive(m, "m");
  require_nonnegative(b, "b");
  return std::sqrt(b / m);
}

double stability_continuity_lip(double L, double w1) {
  require_nonnegative(L, "L");
  require_nonnegative(w1, "W1");
  return L * w1;
}

double stability_continuity_diss(double M, double m, double b, double phi, double eps, double R,
                                 double w_rho) {
  require_positive(M, "M");
  require_positive(m, "m");
  require_nonnegative(b, "b");
  require_positive(phi, "phi");
  require_positive(eps, "eps");
  require_positive(R, "R");
  require_nonnegative(w_rho, "W_rho");
  return M * (b / m + 1.0) / (phi * eps * std::max(R, 1.0)) * w_rho;
}

double stability_to_gen(double eps_stab) {
  if (!(eps_stab >= 0.0)) throw std::invalid_argument("stability bound must be >= 0");
  return eps_stab;
}

std::string to_string(LemmaKind kind) {
  switch (kind) {
    case LemmaKind::moment_cts: return "moment_cts";
    case LemmaKind::first_moment_disc: return "first_moment_disc";
    case LemmaKind::synch_div_lip: return "synch_div_lip";
    case LemmaKind::synch_div_diss: return "synch_div_diss";
    case LemmaKind::disc_err_lip: return "disc_err_lip";
    case LemmaKind::disc_err_diss: return "disc_err_diss";
    case LemmaKind::gradient_origin: return "gradient_origin";
    case LemmaKind::minima_radius: return "minima_radius";
    case LemmaKind::stability_continuity_lip: return "stability_continuity_lip";
    case LemmaKind::stability_continuity_diss: return "stability_continuity_diss";
  }
  return "unknown";
}

LemmaKind lemma_kind_from_string(const std::string& name) {
  for (auto kind : {LemmaKind::moment_cts, LemmaKind::first_moment_disc, LemmaKind::synch_div_lip,
                    LemmaKind::synch_div_diss, LemmaKind::disc_err_lip, LemmaKind::disc_err_diss,
                    LemmaKind::gradient_origin, LemmaKind::minima_radius,
                    LemmaKind::stability_continuity_lip, LemmaKind::stability_continuity_diss}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown lemma kind: " + name);
}

namespace {

template <typename T>
T need(const std::optional<T>& v, const char* name) {
  if (!v) throw std::invalid_argument(std::string("missing lemma parameter: ") + name);
  return *v;
}

}  // namespace

double analytic_lemma_bound(LemmaKind kind, const LemmaParams& q) {
  switch (kind) {
    case LemmaKind::moment_cts:
      return moment_cts(need(q.p, "p"), need(q.mu_p, "mu_p"), need(q.m, "m"), need(q.b, "b"),
                        need(q.d, "d"), need(q.beta, "beta"), need(q.t, "t"));
    case LemmaKind::first_moment_disc:
      return first_moment_disc(need(q.mu1, "mu1"), need(q.L, "L"), need(q.lambda, "lambda"),
                               need(q.d, "d"), need(q.beta, "beta"), need(q.eta, "eta"));
    case LemmaKind::synch_div_lip:
      return synch_div_lip(need(q.w1_0, "w1_0"), need(q.L, "L"), need(q.t, "t"));
    case LemmaKind::synch_div_diss:
      return synch_div_diss(need(q.M, "M"), need(q.m, "m"), need(q.b, "b"), need(q.d, "d"),
                            need(q.beta, "beta"), need(q.mu2, "mu2"), need(q.t, "t"));
    case LemmaKind::disc_err_lip:
      return disc_err_lip(need(q.eta, "eta"), need(q.lambda, "lambda"), need(q.M, "M"),
                          need(q.L, "L"), need(q.sigma1, "sigma1"), need(q.d, "d"),
                          need(q.beta, "beta"));
    case LemmaKind::disc_err_diss:
      return disc_err_diss_sq(need(q.eta, "eta"), need(q.M, "M"), need(q.m, "m"), need(q.b, "b"),
                              need(q.d, "d"), need(q.beta, "beta"), need(q.mu2, "mu2"));
    case LemmaKind::gradient_origin:
      return gradient_origin(need(q.M, "M"), need(q.m, "m"), need(q.b, "b"));
    case LemmaKind::minima_radius:
      return minima_radius(need(q.m, "m"), need(q.b, "b"));
    case LemmaKind::stability_continuity_lip:
      return stability_continuity_lip(need(q.L, "L"), need(q.w1, "w1"));
    case LemmaKind::stability_continuity_diss:
      return stability_continuity_diss(need(q.M, "M"), need(q.m, "m"), need(q.b, "b"),
                                       need(q.phi, "phi"), need(q.eps, "eps"), need(q.R, "R"),
                                       need(q.w_rho, "w_rho"));
  }
  throw std::logic_error("unreachable");
}

}  // namespace sgldstab
