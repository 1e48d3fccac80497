#pragma once

// Distortions g, the metric rho_g and semimetric rho, coupling-based
// Wasserstein upper-bound estimators, and exact small-sample transport.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sgldstab/core.hpp"
#include "sgldstab/rng.hpp"

namespace sgldstab {

/// Cap distortion g(r) = min(r, R); concave, non-decreasing, constant on
/// [R, inf). `phi` is the lower sandwich slope carried into the constants.
struct GFunction {
  double R = 1.0;
  double phi = 1.0;

  double operator()(double r) const;
};

double eval_g(const GFunction& g, double r);

struct SemimetricParams {
  GFunction g;
  double eps = 0.5;

  void validate() const;
};

/// g(|x - y|) (1 + 2 eps + eps |x|^2 + eps |y|^2)
double rho(const Vector& x, const Vector& y, const SemimetricParams& params);
/// g(|x - y|)
double rho_g(const Vector& x, const Vector& y, const GFunction& g);
/// 1 + |x|^2
double lyapunov_v(const Vector& x);

enum class Cost { w1, w2sq, rho, rho_g };
enum class Estimator { coupling_mean, sorted_1d, exact_assignment };

std::string to_string(Cost cost);
std::string to_string(Estimator estimator);

struct EmpiricalDistance {
  double value = 0.0;
  double sem = 0.0;
  Estimator estimator = Estimator::coupling_mean;
};

/// Mean and SEM of cost(x_i, y_i) over the given pairing. Any pairing is a
/// coupling of the two empirical marginals, so the mean upper-bounds the
/// corresponding transport cost.
EmpiricalDistance estimate_w_upper(std::span<const Vector> xs, std::span<const Vector> ys,
                                   Cost cost, const SemimetricParams& params = {});

/// Exact empirical W1 in one dimension by sorted matching.
EmpiricalDistance exact_w1_sorted_1d(std::span<const double> a, std::span<const double> b);

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// O(N^3)). Returns assignment[row] = column.
std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost);

constexpr std::size_t kAssignmentCap = 256;

/// Exact empirical W_p for p in {1, 2}: (min_perm (1/N) sum |a_i - b_perm(i)|^p)^(1/p).
EmpiricalDistance exact_wp_assignment(std::span<const Vector> a, std::span<const Vector> b, int p);

/// Minimum over all permutations by enumeration; validation oracle for N <= 8.
double brute_force_wp(std::span<const Vector> a, std::span<const Vector> b, int p);

/// Random-probe checks of the semimetric lemmas in dimension d: weak triangle
/// inequality (for the supplied params and for the cap with phi = 1),
/// symmetry, rho_g subadditivity, the pointwise and moment forms of the W2
/// comparison, and the perturbation inequality on small empirical sets.
std::vector<CertificateReport> check_semimetric_lemmas(const SemimetricParams& params,
                                                       Eigen::Index d, Rng& rng,
                                                       std::size_t probes);

/// 2 (1 + (g(R) / phi) max(eps R, 1))
double weak_triangle_coefficient(const SemimetricParams& params);

}  // namespace sgldstab
