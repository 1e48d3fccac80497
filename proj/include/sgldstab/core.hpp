#pragma once

// Loss families, datasets and numerical certification of the assumption
// constants each family declares.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sgldstab/rng.hpp"

namespace sgldstab {

using Vector = Eigen::VectorXd;

enum class LossFamily { pseudo_huber, quadratic, cosine_dissipative };

std::string to_string(LossFamily family);
LossFamily loss_family_from_string(const std::string& name);

/// Declared constants of a loss family. `L` is absent for families that are
/// not globally Lipschitz; `m`/`b` are absent for non-dissipative families.
struct AssumptionConstants {
  std::optional<double> L;
  double M = 1.0;
  std::optional<double> m;
  std::optional<double> b;

  bool dissipative() const { return m.has_value() && b.has_value(); }
  void validate() const;
};

/// A loss f(x, z) on R^d x R^d together with the constants it satisfies for
/// data drawn from the uniform distribution on the ball of radius `z_max`.
///
///   quadratic           f = 1/2 |x - z|^2                 M = 1, m = 1/2, b = z_max^2 / 2
///   pseudo_huber        f = sqrt(1 + |x - z|^2)           L = 1, M = 1
///   cosine_dissipative  f = 1/2 |x|^2 + a cos<w,x> + <z,x>
///                       M = 1 + a|w|^2, m = 1/2, b = (a|w| + z_max)^2 / 2
struct LossModel {
  LossFamily family = LossFamily::quadratic;
  double z_max = 1.0;
  double a = 0.0;
  Vector w;
  AssumptionConstants constants;

  static LossModel quadratic(double z_max);
  static LossModel pseudo_huber(double z_max);
  static LossModel cosine_dissipative(double a, Vector w, double z_max);

  /// Constants implied by the family formulas for the current parameters.
  AssumptionConstants derived_constants() const;

  /// Non-convex exactly when the cosine curvature a|w|^2 exceeds 1.
  bool convex() const;

  void validate() const;
};

/// Finite data points z_1..z_n, all of one dimension. Indices are 0-based.
class DataSet {
 public:
  DataSet() = default;
  explicit DataSet(std::vector<Vector> points);

  std::size_t size() const { return points_.size(); }
  Eigen::Index dim() const { return points_.empty() ? 0 : points_.front().size(); }
  const Vector& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<Vector>& points() const { return points_; }

  bool operator==(const DataSet& other) const;

 private:
  std::vector<Vector> points_;
};

double eval_loss(const LossModel& model, const Vector& x, const Vector& z);
Vector eval_grad(const LossModel& model, const Vector& x, const Vector& z);

/// out += scale * grad f(x, z). No allocation; hot loops use this.
void accumulate_grad(const LossModel& model, const Vector& x, const Vector& z,
                     double scale, Vector& out);

/// (1/|B|) sum_{i in B} grad f(x, z_i) + lambda x
Vector minibatch_grad(const LossModel& model, const DataSet& data, const Vector& x,
                      std::span<const std::size_t> batch, double lambda);
void minibatch_grad_into(const LossModel& model, const DataSet& data, const Vector& x,
                         std::span<const std::size_t> batch, double lambda, Vector& out);

/// Empirical risk F_S(x) (no weight decay).
double empirical_risk(const LossModel& model, const DataSet& data, const Vector& x);

/// Copy of `data` with point `index` replaced by `z_new`.
DataSet make_neighbor(const DataSet& data, std::size_t index, const Vector& z_new);

/// n i.i.d. points from the uniform distribution on the ball of radius z_max.
DataSet sample_dataset(std::size_t n, Eigen::Index d, double z_max, Rng& rng);

/// Point on the support boundary farthest from z (the antipode of z scaled to
/// the ball radius).
Vector farthest_support_point(const Vector& z, double z_max);

enum class Assumption { lipschitz, smoothness, dissipativity, minima_ball, origin_gradient };

std::string to_string(Assumption assumption);

constexpr double kCertificationTolerance = 1e-9;

struct CertificateReport {
  std::string check;
  std::size_t probes = 0;
  double worst_violation = 0.0;  // max over probes of (lhs - rhs); <= 0 is a margin
  bool passed = false;
};

/// Random-probe verification of one declared assumption. Probes x from
/// N(0, s^2 I) with s = 3 sqrt(b/m) when dissipative constants exist, else 3;
/// z from the data distribution. Throws when the constants the check needs are
/// absent.
CertificateReport certify(const LossModel& model, Assumption assumption,
                          std::size_t probe_count, Eigen::Index dim, Rng& rng);

/// Assumptions whose constants the model declares.
std::vector<Assumption> declared_assumptions(const LossModel& model);

}  // namespace sgldstab
