#pragma once

// Closed-form constants and bounds: reflection contraction rates, moment and
// divergence lemmas, discretization errors and the two generalization
// theorems (Lipschitz with weight decay, and dissipative).

#include <cstddef>
#include <map>
#include <optional>
#include <string>

namespace sgldstab {

/// Which form of C2 to use. `proof` multiplies by (c1 v 1), which is what the
/// derivation needs; `printed` multiplies by (c1 ^ 1) = 1.
enum class C2Form { proof, printed };

struct LipschitzConstants {
  double L = 0.0, M = 0.0, lambda = 0.0, beta = 0.0, sigma1 = 0.0;
  bool convex = false;  // lambda >= M
  double a = 0.0;       // beta (M - lambda)
  double b_rate = 0.0;  // beta lambda / 2
  double R_kappa = 0.0; // 4 L / lambda
  double R0 = 0.0;      // R_kappa when lambda < M, else 0
  double R1_tilde = 0.0;
  double phi_min = 1.0;
  double c1 = 1.0, c2 = 0.0, c3 = 0.0;
  double C1 = 0.0, C2 = 0.0, C3 = 0.0;
  C2Form c2_form = C2Form::proof;
};

LipschitzConstants lipschitz_constants(double L, double M, double lambda, double beta,
                                       double sigma1 = 0.0, C2Form form = C2Form::proof);

/// Right-hand side of the Lipschitz generalization theorem after t steps:
///   continuous: C2 min{eta t, (C1 + 1) n / (n - k)} k / n
///   discrete:   C3 min{eta t, (C1 + 1) n / (n - k)} (k / n + sqrt(eta d))
/// With k == n only the eta t branch exists.
double lipschitz_gen_bound(const LipschitzConstants& c, std::size_t n, std::size_t k, double eta,
                           double t, std::size_t d, bool continuous);

/// c(p) bounding the 2p-th moment growth of discrete SGLD.
double ctilde(int p, double M, double m, double b, double d, double beta);

struct DissipativeConstants {
  double M = 0.0, m = 0.0, b = 0.0, d = 0.0, beta = 0.0;
  double sigma2 = 0.0, sigma4 = 0.0;
  double R = 0.0, phi = 0.0, eps = 0.0, C4 = 0.0;
  std::map<int, double> c_tilde_p;  // p = 1, 2
  double c_tilde_2 = 0.0, c_tilde_4 = 0.0, c_tilde_5 = 0.0;
  double C5 = 0.0, C6 = 0.0;
};

/// sigma2 and sigma4 are the initial second and fourth moments.
DissipativeConstants dissipative_constants(double M, double m, double b, double d, double beta,
                                           double sigma2, double sigma4);

/// k/n + (1 - k/n) exp(-eta / C)
double mixture_rate(double C, std::size_t n, std::size_t k, double eta);

/// (1 - c^t) / (1 - c), equal to t when c == 1.
double geometric_sum(double c, double t);

/// Right-hand side of the dissipative generalization theorem after t steps:
///   continuous: C5 min{eta t, (C4 + 1) n / (n - k)} k / (n sqrt(eta))
///   discrete:   C6 min{eta t, (C4 + 1) n / (n - k)} (k / (n sqrt(eta)) + sqrt(eta))
double dissipative_gen_bound(const DissipativeConstants& c, std::size_t n, std::size_t k,
                             double eta, double t, bool continuous);

/// W1 envelope for neighbor chains after t steps in the Lipschitz regime:
/// 2 (c1 v 1) * geometric_sum(c~1, t) * (2 L eta k / n [+ 2 disc_err_lip]).
double lipschitz_w1_envelope(const LipschitzConstants& c, std::size_t n, std::size_t k,
                             double eta, double t, std::size_t d, bool continuous);

/// W_rho envelope after t steps in the dissipative regime:
/// geometric_sum(c~3, t) * (c~2 (k / n) sqrt(eta) [+ 2 c~4 c~5 eta^{3/2}]).
double dissipative_rho_envelope(const DissipativeConstants& c, std::size_t n, std::size_t k,
                                double eta, double t, bool continuous);

// Lemma-level bounds.

/// mu_p e^{-p m t / 2} + [2b/m + 2(p + d - 2)/(beta m)]^{p/2} (1 - e^{-p m t / 2})
double moment_cts(int p, double mu_p, double m, double b, double d, double beta, double t);
/// mu1 + (L + sqrt(2 d / (beta eta))) / lambda; needs eta < 1 / lambda.
double first_moment_disc(double mu1, double L, double lambda, double d, double beta, double eta);
/// W1_0 + 2 L t
double synch_div_lip(double w1_0, double L, double t);
/// 4 M^2 (E|th0|^2 + (3b + 2d/beta)/m) t^2 + 4 d t / beta
double synch_div_diss(double M, double m, double b, double d, double beta, double second0, double t);
/// eta (lambda + M) [eta (lambda sigma1 + 2L) + 2 sqrt(2 d eta / beta)] e^{M+1}
double disc_err_lip(double eta, double lambda, double M, double L, double sigma1, double d, double beta);
/// Bound on W2^2: 8 eta^3 e^{2 eta^2 M^2} M^2 (M^2 mu2 + M^2 b / m + d / beta)
double disc_err_diss_sq(double eta, double M, double m, double b, double d, double beta, double mu2);
/// M sqrt(b/m)
double gradient_origin(double M, double m, double b);
/// sqrt(b/m)
double minima_radius(double m, double b);
/// L W1
double stability_continuity_lip(double L, double w1);
/// M (b/m + 1) / (phi eps (R v 1)) W_rho
double stability_continuity_diss(double M, double m, double b, double phi, double eps, double R,
                                 double w_rho);
/// A uniform stability bound is a generalization bound; identity on eps >= 0.
double stability_to_gen(double eps_stab);

enum class LemmaKind {
  moment_cts,
  first_moment_disc,
  synch_div_lip,
  synch_div_diss,
  disc_err_lip,
  disc_err_diss,
  gradient_origin,
  minima_radius,
  stability_continuity_lip,
  stability_continuity_diss,
};

std::string to_string(LemmaKind kind);
LemmaKind lemma_kind_from_string(const std::string& name);

/// Named inputs for analytic_lemma_bound; each kind reads only what it needs
/// and throws when one of those is absent.
struct LemmaParams {
  std::optional<int> p;
  std::optional<double> L, M, m, b, d, beta, lambda, eta, t;
  std::optional<double> mu1, mu2, mu_p, sigma1, w1_0, w1, w_rho, R, phi, eps;
};

double analytic_lemma_bound(LemmaKind kind, const LemmaParams& params);

}  // namespace sgldstab
