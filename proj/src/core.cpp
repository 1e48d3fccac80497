#include "sgldstab/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sgldstab {

namespace {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + " has non-finite entries");
}

void require_same_dim(const Vector& x, const Vector& z) {
  if (x.size() != z.size()) throw std::invalid_argument("dimension mismatch between x and z");
  if (x.size() == 0) throw std::invalid_argument("empty vector");
}

void check_inputs(const LossModel& model, const Vector& x, const Vector& z) {
  require_same_dim(x, z);
  require_finite(x, "x");
  require_finite(z, "z");
  if (model.family == LossFamily::cosine_dissipative && model.w.size() != x.size())
    throw std::invalid_argument("cosine frequency vector w has wrong dimension");
}

}  // namespace

std::string to_string(LossFamily family) {
  switch (family) {
    case LossFamily::pseudo_huber: return "pseudo_huber";
    case LossFamily::quadratic: return "quadratic";
    case LossFamily::cosine_dissipative: return "cosine_dissipative";
  }
  return "unknown";
}

LossFamily loss_family_from_string(const std::string& name) {
  if (name == "pseudo_huber") return LossFamily::pseudo_huber;
  if (name == "quadratic") return LossFamily::quadratic;
  if (name == "cosine_dissipative") return LossFamily::cosine_dissipative;
  throw std::invalid_argument("unknown loss family: " + name);
}

void AssumptionConstants::validate() const {
  if (!(M > 0.0) || !std::isfinite(M)) throw std::invalid_argument("M must be positive");
  if (L && (!(*L >= 0.0) || !std::isfinite(*L))) throw std::invalid_argument("L must be >= 0");
  if (m.has_value() != b.has_value())
    throw std::invalid_argument("dissipativity needs both m and b");
  if (m) {
    if (!(*m > 0.0) || !std::isfinite(*m)) throw std::invalid_argument("m must be positive");
    if (!(*b >= 0.0) || !std::isfinite(*b)) throw std::invalid_argument("b must be >= 0");
    if (M < *m) throw std::invalid_argument("smoothness M must be >= dissipativity m");
  }
}

LossModel LossModel::quadratic(double z_max) {
  LossModel model;
  model.family = LossFamily::quadratic;
  model.z_max = z_max;
  model.constants = model.derived_constants();
  model.validate();
  return model;
}

LossModel LossModel::pseudo_huber(double z_max) {
  LossModel model;
  model.family = LossFamily::pseudo_huber;
  model.z_max = z_max;
  model.constants = model.derived_constants();
  model.validate();
  return model;
}

LossModel LossModel::cosine_dissipative(double a, Vector w, double z_max) {
  LossModel model;
  model.family = LossFamily::cosine_dissipative;
  model.z_max = z_max;
  model.a = a;
  model.w = std::move(w);
  model.constants = model.derived_constants();
  model.validate();
  return model;
}

AssumptionConstants LossModel::derived_constants() const {
  AssumptionConstants c;
  switch (family) {
    case LossFamily::quadratic:
      c.M = 1.0;
      c.m = 0.5;
      c.b = 0.5 * z_max * z_max;
      break;
    case LossFamily::pseudo_huber:
      c.L = 1.0;
      c.M = 1.0;
      break;
    case LossFamily::cosine_dissipative: {
      const double wn = w.norm();
      c.M = 1.0 + a * wn * wn;
      c.m = 0.5;
      c.b = 0.5 * (a * wn + z_max) * (a * wn + z_max);
      break;
    }
  }
  return c;
}

bool LossModel::convex() const {
  if (family != LossFamily::cosine_dissipative) return true;
  return a * w.squaredNorm() <= 1.0;
}

void LossModel::validate() const {
  if (!(z_max >= 0.0) || !std::isfinite(z_max)) throw std::invalid_argument("z_max must be >= 0");
  if (family == LossFamily::cosine_dissipative) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("cosine amplitude a must be >= 0");
    if (w.size() == 0) throw std::invalid_argument("cosine frequency vector w is empty");
    require_finite(w, "w");
  }
  constants.validate();
}

DataSet::DataSet(std::vector<Vector> points) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("dataset needs at least one point");
  const auto d = points_.front().size();
  if (d == 0) throw std::invalid_argument("data points must be non-empty");
  for (const auto& p : points_) {
    if (p.size() != d) throw std::invalid_argument("data points differ in dimension");
    require_finite(p, "data point");
  }
}

bool DataSet::operator==(const DataSet& other) const {
  if (points_.size() != other.points_.size()) return false;
  for (std::size_t i = 0; i < points_.size(); ++i)
    if (points_[i].size() != other.points_[i].size() || points_[i] != other.points_[i]) return false;
  return true;
}

double eval_loss(const LossModel& model, const Vector& x, const Vector& z) {
  check_inputs(model, x, z);
  switch (model.family) {
    case LossFamily::quadratic: return 0.5 * (x - z).squaredNorm();
    case LossFamily::pseudo_huber: return std::sqrt(1.0 + (x - z).squaredNorm());
    case LossFamily::cosine_dissipative:
      return 0.5 * x.squaredNorm() + model.a * std::cos(model.w.dot(x)) + z.dot(x);
  }
  throw std::logic_error("unreachable");
}

void accumulate_grad(const LossModel& model, const Vector& x, const Vector& z, double scale,
                     Vector& out) {
  switch (model.family) {
    case LossFamily::quadratic:
      out.noalias() += scale * (x - z);
      return;
    case LossFamily::pseudo_huber: {
      const double s = scale / std::sqrt(1.0 + (x - z).squaredNorm());
      out.noalias() += s * (x - z);
      return;
    }
    case LossFamily::cosine_dissipative: {
      const double s = -scale * model.a * std::sin(model.w.dot(x));
      out.noalias() += scale * (x + z) + s * model.w;
      return;
    }
  }
}

Vector eval_grad(const LossModel& model, const Vector& x, const Vector& z) {
  check_inputs(model, x, z);
  Vector g = Vector::Zero(x.size());
  accumulate_grad(model, x, z, 1.0, g);
  return g;
}

void minibatch_grad_into(const LossModel& model, const DataSet& data, const Vector& x,
                         std::span<const std::size_t> batch, double lambda, Vector& out) {
  if (batch.empty()) throw std::invalid_argument("empty mini-batch");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (x.size() != data.dim()) throw std::invalid_argument("dimension mismatch between x and data");
  out.setZero(x.size());
  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i : batch) {
    if (i >= data.size()) throw std::out_of_range("mini-batch index out of range");
    accumulate_grad(model, x, data[i], w, out);
  }
  if (lambda != 0.0) out.noalias() += lambda * x;
}

Vector minibatch_grad(const LossModel& model, const DataSet& data, const Vector& x,
                      std::span<const std::size_t> batch, double lambda) {
  if (model.family == LossFamily::cosine_dissipative && model.w.size() != x.size())
    throw std::invalid_argument("cosine frequency vector w has wrong dimension");
  require_finite(x, "x");
  Vector out;
  minibatch_grad_into(model, data, x, batch, lambda, out);
  return out;
}

double empirical_risk(const LossModel& model, const DataSet& data, const Vector& x) {
  double total = 0.0;
  for (const auto& z : data.points()) total += eval_loss(model, x, z);
  return total / static_cast<double>(data.size());
}

DataSet make_neighbor(const DataSet& data, std::size_t index, const Vector& z_new) {
  if (index >= data.size()) throw std::out_of_range("neighbor index out of range");
  if (z_new.size() != data.dim()) throw std::invalid_argument("replacement point has wrong dimension");
  std::vector<Vector> points = data.points();
  points[index] = z_new;
  return DataSet(std::move(points));
}

DataSet sample_dataset(std::size_t n, Eigen::Index d, double z_max, Rng& rng) {
  if (n == 0) throw std::invalid_argument("dataset size must be >= 1");
  std::vector<Vector> points;
  points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) points.push_back(uniform_in_ball(rng, d, z_max));
  return DataSet(std::move(points));
}

Vector farthest_support_point(const Vector& z, double z_max) {
  const double norm = z.norm();
  if (norm == 0.0) {
    Vector e = Vector::Zero(z.size());
    e(0) = z_max;
    return e;
  }
  return -z * (z_max / norm);
}

std::string to_string(Assumption assumption) {
  switch (assumption) {
    case Assumption::lipschitz: return "lipschitz";
    case Assumption::smoothness: return "smoothness";
    case Assumption::dissipativity: return "dissipativity";
    case Assumption::minima_ball: return "minima_ball";
    case Assumption::origin_gradient: return "origin_gradient";
  }
  return "unknown";
}

std::vector<Assumption> declared_assumptions(const LossModel& model) {
  std::vector<Assumption> out;
  if (model.constants.L) out.push_back(Assumption::lipschitz);
  out.push_back(Assumption::smoothness);
  if (model.constants.dissipative()) {
    out.push_back(Assumption::dissipativity);
    out.push_back(Assumption::minima_ball);
    out.push_back(Assumption::origin_gradient);
  }
  return out;
}

CertificateReport certify(const LossModel& model, Assumption assumption, std::size_t probe_count,
                          Eigen::Index dim, Rng& rng) {
  model.validate();
  if (dim < 1) throw std::invalid_argument("probe dimension must be >= 1");
  if (model.family == LossFamily::cosine_dissipative && model.w.size() != dim)
    throw std::invalid_argument("cosine frequency vector w has wrong dimension");
  const auto& c = model.constants;
  const bool needs_diss = assumption == Assumption::dissipativity ||
                          assumption == Assumption::minima_ball ||
                          assumption == Assumption::origin_gradient;
  if (assumption == Assumption::lipschitz && !c.L)
    throw std::invalid_argument("model declares no Lipschitz constant");
  if (needs_diss && !c.dissipative())
    throw std::invalid_argument("model declares no dissipativity constants");

  const double sigma = c.dissipative() ? 3.0 * std::sqrt(*c.b / *c.m) : 3.0;
  const double probe_sigma = sigma > 0.0 ? sigma : 3.0;

  CertificateReport report;
  report.check = to_string(assumption);
  report.probes = probe_count;
  report.worst_violation = -std::numeric_limits<double>::infinity();

  for (std::size_t p = 0; p < probe_count; ++p) {
    const Vector z = uniform_in_ball(rng, dim, model.z_max);
    Vector x = probe_sigma * standard_normal_vector(rng, dim);
    double violation = 0.0;
    switch (assumption) {
      case Assumption::lipschitz:
      case Assumption::smoothness: {
        // Alternate far pairs with near pairs so both scales get probed.
        const double scale = (p % 2 == 0) ? probe_sigma : 1e-3 * probe_sigma;
        const Vector x2 = x + scale * standard_normal_vector(rng, dim);
        const double dist = (x - x2).norm();
        if (assumption == Assumption::lipschitz) {
          violation = std::abs(eval_loss(model, x, z) - eval_loss(model, x2, z)) - *c.L * dist;
        } else {
          violation = (eval_grad(model, x, z) - eval_grad(model, x2, z)).norm() - c.M * dist;
        }
        break;
      }
      case Assumption::dissipativity:
        violation = (*c.m * x.squaredNorm() - *c.b) - eval_grad(model, x, z).dot(x);
        break;
      case Assumption::minima_ball: {
        const double r0 = std::sqrt(*c.b / *c.m);
        const double lo = r0 + 0.01;
        const double hi = std::max(10.0 * r0, lo);
        const double t = lo + (hi - lo) * uniform01(rng);
        const Vector u = unit_vector(rng, dim);
        const double radial = u.dot(eval_grad(model, t * u, z));
        violation = (*c.m * t - *c.b / t) - radial;
        break;
      }
      case Assumption::origin_gradient:
        x.setZero();
        violation = eval_grad(model, x, z).norm() - c.M * std::sqrt(*c.b / *c.m);
        break;
    }
    report.worst_violation = std::max(report.worst_violation, violation);
  }
  if (probe_count == 0) report.worst_violation = 0.0;
  report.passed = report.worst_violation <= kCertificationTolerance;
  return report;
}

}  // namespace sgldstab
