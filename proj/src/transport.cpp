#include "sgldstab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sgldstab/stats.hpp"

namespace sgldstab {

double GFunction::operator()(double r) const {
  if (!(r >= 0.0)) throw std::invalid_argument("g is defined on r >= 0");
  return std::min(r, R);
}

double eval_g(const GFunction& g, double r) { return g(r); }

void SemimetricParams::validate() const {
  if (!(g.R > 0.0) || !std::isfinite(g.R)) throw std::invalid_argument("g plateau radius must be positive");
  if (!(g.phi > 0.0 && g.phi <= 1.0)) throw std::invalid_argument("phi must lie in (0, 1]");
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must lie in (0, 1]");
}

namespace {

void require_same_dim(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw std::invalid_argument("dimension mismatch");
}

}  // namespace

double rho(const Vector& x, const Vector& y, const SemimetricParams& params) {
  require_same_dim(x, y);
  // Sum the squared norms first so rho(x, y) == rho(y, x) exactly.
  const double weight = 1.0 + params.eps * (2.0 + (x.squaredNorm() + y.squaredNorm()));
  return params.g((x - y).norm()) * weight;
}

double rho_g(const Vector& x, const Vector& y, const GFunction& g) {
  require_same_dim(x, y);
  return g((x - y).norm());
}

double lyapunov_v(const Vector& x) { return 1.0 + x.squaredNorm(); }

std::string to_string(Cost cost) {
  switch (cost) {
    case Cost::w1: return "w1";
    case Cost::w2sq: return "w2sq";
    case Cost::rho: return "rho";
    case Cost::rho_g: return "rho_g";
  }
  return "unknown";
}

std::string to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::coupling_mean: return "coupling_mean";
    case Estimator::sorted_1d: return "sorted_1d";
    case Estimator::exact_assignment: return "exact_assignment";
  }
  return "unknown";
}

EmpiricalDistance estimate_w_upper(std::span<const Vector> xs, std::span<const Vector> ys,
                                   Cost cost, const SemimetricParams& params) {
  if (xs.empty()) throw std::invalid_argument("no sample pairs");
  if (xs.size() != ys.size()) throw std::invalid_argument("paired samples differ in count");
  std::vector<double> values(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    switch (cost) {
      case Cost::w1: require_same_dim(xs[i], ys[i]); values[i] = (xs[i] - ys[i]).norm(); break;
      case Cost::w2sq: require_same_dim(xs[i], ys[i]); values[i] = (xs[i] - ys[i]).squaredNorm(); break;
      case Cost::rho: values[i] = rho(xs[i], ys[i], params); break;
      case Cost::rho_g: values[i] = rho_g(xs[i], ys[i], params.g); break;
    }
  }
  const MeanSem ms = values.size() > 1 ? mean_sem(values) : MeanSem{values.front(), 0.0};
  return EmpiricalDistance{ms.mean, ms.sem, Estimator::coupling_mean};
}

EmpiricalDistance exact_w1_sorted_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("sample sets differ in size");
  if (a.empty()) throw std::invalid_argument("empty sample sets");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double total = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) total += std::abs(sa[i] - sb[i]);
  return EmpiricalDistance{total / static_cast<double>(sa.size()), 0.0, Estimator::sorted_1d};
}

std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  if (cost.rows() != cost.cols()) throw std::invalid_argument("assignment needs a square matrix");
  if (n == 0) return {};
  if (!cost.allFinite()) throw std::invalid_argument("assignment cost has non-finite entries");
  // Shortest augmenting paths with row/column potentials; 1-based with a
  // virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

namespace {

double pair_cost(const Vector& a, const Vector& b, int p) {
  require_same_dim(a, b);
  return p == 1 ? (a - b).norm() : (a - b).squaredNorm();
}

void check_wp_inputs(std::span<const Vector> a, std::span<const Vector> b, int p) {
  if (p != 1 && p != 2) throw std::invalid_argument("p must be 1 or 2");
  if (a.size() != b.size()) throw std::invalid_argument("sample sets differ in size");
  if (a.empty()) throw std::invalid_argument("empty sample sets");
}

double finish_wp(double total, std::size_t n, int p) {
  const double mean = total / static_cast<double>(n);
  return p == 1 ? mean : std::sqrt(mean);
}

}  // namespace

EmpiricalDistance exact_wp_assignment(std::span<const Vector> a, std::span<const Vector> b, int p) {
  check_wp_inputs(a, b, p);
  if (a.size() > kAssignmentCap) throw std::invalid_argument("assignment oracle is capped at 256 points");
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      cost(i, j) = pair_cost(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)], p);
  const auto assignment = solve_assignment(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    total += cost(i, static_cast<Eigen::Index>(assignment[static_cast<std::size_t>(i)]));
  return EmpiricalDistance{finish_wp(total, a.size(), p), 0.0, Estimator::exact_assignment};
}

double brute_force_wp(std::span<const Vector> a, std::span<const Vector> b, int p) {
  check_wp_inputs(a, b, p);
  if (a.size() > 8) throw std::invalid_argument("brute force is limited to 8 points");
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += pair_cost(a[i], b[perm[i]], p);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return finish_wp(best, a.size(), p);
}

double weak_triangle_coefficient(const SemimetricParams& params) {
  const double R = params.g.R;
  return 2.0 * (1.0 + (params.g(R) / params.g.phi) * std::max(params.eps * R, 1.0));
}

namespace {

// Probe points on scales from R/100 to 3R so every case of the distance
// split (below / above the plateau) is exercised.
Vector probe_point(Eigen::Index d, double R, Rng& rng) {
  const double scale = R * std::pow(10.0, -2.0 + 2.5 * uniform01(rng));
  return scale * standard_normal_vector(rng, d) / std::sqrt(static_cast<double>(d));
}

Vector probe_near(const Vector& x, double R, Rng& rng) {
  if (uniform01(rng) < 0.5) return probe_point(x.size(), R, rng);
  const double scale = R * std::pow(10.0, -3.0 + 3.0 * uniform01(rng));
  return x + scale * standard_normal_vector(rng, x.size()) / std::sqrt(static_cast<double>(x.size()));
}

// Violation normalized by max(1, |rhs|) so large-magnitude probes are judged
// at relative precision.
double scaled_violation(double lhs, double rhs) { return (lhs - rhs) / std::max(1.0, std::abs(rhs)); }

struct Tracker {
  CertificateReport report;
  explicit Tracker(std::string name, std::size_t probes) {
    report.check = std::move(name);
    report.probes = probes;
    report.worst_violation = probes == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  void add(double v) { report.worst_violation = std::max(report.worst_violation, v); }
  CertificateReport finish() {
    report.passed = report.worst_violation <= kCertificationTolerance;
    return report;
  }
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<CertificateReport> check_semimetric_lemmas(const SemimetricParams& params,
                                                       Eigen::Index d, Rng& rng,
                                                       std::size_t probes) {
  params.validate();
  if (d < 1) throw std::invalid_argument("probe dimension must be >= 1");
  const double R = params.g.R;
  SemimetricParams cap = params;
  cap.g.phi = 1.0;

  Tracker triangle("weak_triangle", probes);
  Tracker triangle_cap("weak_triangle_cap", probes);
  Tracker symmetry("rho_symmetry", probes);
  Tracker subadditive("rho_g_subadditivity", probes);
  Tracker pointwise("w2_comparison_pointwise", probes);
  Tracker moment("w2_comparison_moment", probes);
  Tracker perturbation("perturbation", probes);

  const double coef = weak_triangle_coefficient(params);
  const double coef_cap = weak_triangle_coefficient(cap);

  for (std::size_t p = 0; p < probes; ++p) {
    const Vector x = probe_point(d, R, rng);
    const Vector z = probe_near(x, R, rng);
    const Vector y = probe_near(z, R, rng);

    const double rxy = rho(x, y, params);
    const double rxz = rho(x, z, params);
    const double rzy = rho(z, y, params);
    triangle.add(scaled_violation(rxy, rxz + coef * rzy));
    triangle_cap.add(scaled_violation(rho(x, y, cap), rho(x, z, cap) + coef_cap * rho(z, y, cap)));

    symmetry.add(std::abs(rxy - rho(y, x, params)) / std::max(1.0, rxy));
    symmetry.add(rho(x, x, params));

    subadditive.add(scaled_violation(rho_g(x, y, params.g), rho_g(x, z, params.g) + rho_g(z, y, params.g)));

    pointwise.add(scaled_violation(
        rxy, (x - y).norm() * (1.0 + 2.0 * params.eps + x.squaredNorm() + y.squaredNorm())));

    // Empirical measures of size 1 or 8 with uniform weights.
    const std::size_t set_size = (p % 2 == 0) ? 1 : 8;
    std::vector<Vector> xs(set_size), ys(set_size), dxs(set_size), dys(set_size);
    for (std::size_t i = 0; i < set_size; ++i) {
      xs[i] = probe_point(d, R, rng);
      ys[i] = probe_near(xs[i], R, rng);
      const double dscale = R * std::pow(10.0, -4.0 + 4.0 * uniform01(rng));
      dxs[i] = dscale * standard_normal_vector(rng, d);
      dys[i] = (uniform01(rng) < 0.25) ? Vector(-dxs[i]) : Vector(dscale * standard_normal_vector(rng, d));
    }

    // W_rho <= W_2 (1 + 2 eps + mu4^{1/2} + nu4^{1/2}); the left side is
    // bounded above by rho averaged over the W2-optimal pairing.
    {
      const auto n = static_cast<Eigen::Index>(set_size);
      Eigen::MatrixXd cost(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          cost(i, j) = (xs[static_cast<std::size_t>(i)] - ys[static_cast<std::size_t>(j)]).squaredNorm();
      const auto assignment = solve_assignment(cost);
      std::vector<double> rho_vals(set_size), sq(set_size), x4(set_size), y4(set_size);
      for (std::size_t i = 0; i < set_size; ++i) {
        rho_vals[i] = rho(xs[i], ys[assignment[i]], params);
        sq[i] = cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(assignment[i]));
        x4[i] = std::pow(xs[i].squaredNorm(), 2);
        y4[i] = std::pow(ys[i].squaredNorm(), 2);
      }
      const double w2 = std::sqrt(mean_of(sq));
      moment.add(scaled_violation(
          mean_of(rho_vals),
          w2 * (1.0 + 2.0 * params.eps + std::sqrt(mean_of(x4)) + std::sqrt(mean_of(y4)))));
    }

    // E rho(X + Dx, Y + Dy) <= E rho(X, Y) + 2 sD^{1/2} (1 + 2 eps + 6 eps s^{1/2}).
    {
      std::vector<double> lhs(set_size), base(set_size), dx2(set_size), dy2(set_size);
      std::vector<double> m1(set_size), m2(set_size), m3(set_size), m4(set_size);
      for (std::size_t i = 0; i < set_size; ++i) {
        const Vector xp = xs[i] + dxs[i];
        const Vector yp = ys[i] + dys[i];
        lhs[i] = rho(xp, yp, params);
        base[i] = rho(xs[i], ys[i], params);
        dx2[i] = dxs[i].squaredNorm();
        dy2[i] = dys[i].squaredNorm();
        m1[i] = std::pow(xs[i].squaredNorm(), 2);
        m2[i] = std::pow(ys[i].squaredNorm(), 2);
        m3[i] = std::pow(xp.squaredNorm(), 2);
        m4[i] = std::pow(yp.squaredNorm(), 2);
      }
      const double sigma_delta = std::max(mean_of(dx2), mean_of(dy2));
      const double sigma = std::max({mean_of(m1), mean_of(m2), mean_of(m3), mean_of(m4)});
      const double bound = mean_of(base) + 2.0 * std::sqrt(sigma_delta) *
                                               (1.0 + 2.0 * params.eps + 6.0 * params.eps * std::sqrt(sigma));
      perturbation.add(scaled_violation(mean_of(lhs), bound));
    }
  }

  return {triangle.finish(),  triangle_cap.finish(), symmetry.finish(), subadditive.finish(),
          pointwise.finish(), moment.finish(),       perturbation.finish()};
}

}  // namespace sgldstab
