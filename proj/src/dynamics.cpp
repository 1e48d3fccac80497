#include "sgldstab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <stdexcept>

namespace sgldstab {

Variant Variant::plain() { return Variant{}; }

Variant Variant::projected(double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw std::invalid_argument("projection radius must be positive");
  Variant v;
  v.kind = VariantKind::projected;
  v.radius = radius;
  return v;
}

Variant Variant::anisotropic(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() == 0 || sigma.rows() != sigma.cols())
    throw std::invalid_argument("noise covariance must be square and non-empty");
  if (!sigma.allFinite()) throw std::invalid_argument("noise covariance has non-finite entries");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("noise covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  Eigen::VectorXd values = eig.eigenvalues();
  if (values.minCoeff() < -1e-8)
    throw std::invalid_argument("noise covariance is not positive semidefinite");
  if (values.maxCoeff() > 1.0 + 1e-12)
    throw std::invalid_argument("noise covariance operator norm exceeds 1");
  values = values.cwiseMax(0.0).cwiseSqrt();
  Variant v;
  v.kind = VariantKind::anisotropic;
  v.sigma = sigma;
  v.sigma_sqrt = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  return v;
}

Variant Variant::multistep(std::size_t substeps) {
  Variant v;
  v.kind = VariantKind::multistep;
  v.substeps = substeps;
  return v;
}

std::string to_string(VariantKind kind) {
  switch (kind) {
    case VariantKind::plain: return "plain";
    case VariantKind::projected: return "projected";
    case VariantKind::anisotropic: return "anisotropic";
    case VariantKind::multistep: return "multistep";
  }
  return "unknown";
}

void SgldConfig::validate(std::size_t n) const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
  if (k < 1 || k > n) throw std::invalid_argument("batch size k must satisfy 1 <= k <= n");
  if (substeps_cts < 1) throw std::invalid_argument("substeps_cts must be >= 1");
  if (variant.kind == VariantKind::multistep && variant.substeps == 0 && !(eta < 1.0))
    throw std::invalid_argument("multistep kernel needs eta in (0,1)");
}

std::size_t SgldConfig::window_substeps() const {
  if (mode == TimeMode::continuous) return substeps_cts;
  if (variant.kind == VariantKind::multistep) {
    if (variant.substeps > 0) return variant.substeps;
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("multistep kernel needs eta in (0,1)");
    return static_cast<std::size_t>(std::floor(1.0 / eta));
  }
  return 1;
}

std::vector<std::size_t> sample_minibatch(std::size_t n, std::size_t k, Rng& rng) {
  if (k < 1 || k > n) throw std::invalid_argument("batch size k must satisfy 1 <= k <= n");
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (k == n) return all;
  std::vector<std::size_t> out;
  out.reserve(k);
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

NoiseDraw draw_noise(std::size_t n, std::size_t k, Eigen::Index d, Rng& rng) {
  NoiseDraw draw;
  draw.batch = sample_minibatch(n, k, rng);
  draw.xi = standard_normal_vector(rng, d);
  return draw;
}

Vector project_ball(const Vector& x, double radius) {
  const double norm = x.norm();
  if (norm <= radius) return x;
  return x * (radius / norm);
}

Vector shape_noise(const SgldConfig& cfg, const Vector& xi) {
  if (cfg.variant.kind != VariantKind::anisotropic) return xi;
  if (cfg.variant.sigma_sqrt.rows() != xi.size())
    throw std::invalid_argument("noise covariance dimension mismatch");
  return cfg.variant.sigma_sqrt * xi;
}

void euler_substep(Vector& x, const LossModel& model, const DataSet& data,
                   std::span<const std::size_t> batch, double lambda, double gamma, double beta,
                   const Vector& noise, Vector& scratch) {
  minibatch_grad_into(model, data, x, batch, lambda, scratch);
  if (!scratch.allFinite()) throw std::runtime_error("non-finite gradient");
  x.noalias() -= gamma * scratch;
  x.noalias() += std::sqrt(2.0 * gamma / beta) * noise;
}

namespace {

void finish_window(ChainState& out, const SgldConfig& cfg) {
  if (cfg.variant.kind == VariantKind::projected) out.x = project_ball(out.x, cfg.variant.radius);
  out.step += 1;
}

void check_state(const ChainState& state, const DataSet& data) {
  if (state.x.size() != data.dim()) throw std::invalid_argument("state dimension mismatch");
  if (!state.x.allFinite()) throw std::invalid_argument("state has non-finite entries");
}

}  // namespace

ChainState sgld_step(const ChainState& state, const LossModel& model, const DataSet& data,
                     const SgldConfig& cfg, const NoiseDraw& noise) {
  check_state(state, data);
  if (noise.xi.size() != state.x.size()) throw std::invalid_argument("noise dimension mismatch");
  if (noise.batch.size() != cfg.k) throw std::invalid_argument("batch size differs from k");
  ChainState out = state;
  Vector scratch;
  euler_substep(out.x, model, data, noise.batch, cfg.lambda, cfg.eta, cfg.beta,
                shape_noise(cfg, noise.xi), scratch);
  finish_window(out, cfg);
  return out;
}

ChainState integrate_window(const ChainState& state, const LossModel& model, const DataSet& data,
                            const SgldConfig& cfg, std::span<const std::size_t> batch,
                            std::span<const Vector> increments) {
  check_state(state, data);
  if (increments.empty()) throw std::invalid_argument("window needs at least one substep");
  ChainState out = state;
  const double gamma = cfg.eta / static_cast<double>(increments.size());
  Vector scratch;
  for (const auto& inc : increments) {
    if (inc.size() != state.x.size()) throw std::invalid_argument("increment dimension mismatch");
    euler_substep(out.x, model, data, batch, cfg.lambda, gamma, cfg.beta, shape_noise(cfg, inc),
                  scratch);
  }
  finish_window(out, cfg);
  return out;
}

ChainState continuous_window(const ChainState& state, const LossModel& model, const DataSet& data,
                             const SgldConfig& cfg, std::span<const std::size_t> batch, Rng& rng) {
  if (cfg.substeps_cts < 1) throw std::invalid_argument("substeps_cts must be >= 1");
  std::vector<Vector> increments(cfg.substeps_cts);
  for (auto& inc : increments) inc = standard_normal_vector(rng, state.x.size());
  return integrate_window(state, model, data, cfg, batch, increments);
}

ChainState multistep_kernel(const ChainState& state, const LossModel& model, const DataSet& data,
                            const SgldConfig& cfg, Rng& rng) {
  if (!(cfg.eta > 0.0 && cfg.eta < 1.0))
    throw std::invalid_argument("multistep kernel needs eta in (0,1)");
  const auto substeps = static_cast<std::size_t>(std::floor(1.0 / cfg.eta));
  const auto batch = sample_minibatch(data.size(), cfg.k, rng);
  std::vector<Vector> increments(substeps);
  for (auto& inc : increments) inc = standard_normal_vector(rng, state.x.size());
  return integrate_window(state, model, data, cfg, batch, increments);
}

ChainState advance(const ChainState& state, const LossModel& model, const DataSet& data,
                   const SgldConfig& cfg, Rng& rng) {
  const std::size_t substeps = cfg.window_substeps();
  if (substeps == 1 && cfg.mode == TimeMode::discrete) {
    return sgld_step(state, model, data, cfg, draw_noise(data.size(), cfg.k, state.x.size(), rng));
  }
  const auto batch = sample_minibatch(data.size(), cfg.k, rng);
  std::vector<Vector> increments(substeps);
  for (auto& inc : increments) inc = standard_normal_vector(rng, state.x.size());
  return integrate_window(state, model, data, cfg, batch, increments);
}

Vector InitialSpec::center(Eigen::Index d) const {
  if (mean.size() == 0) return Vector::Zero(d);
  if (mean.size() != d) throw std::invalid_argument("initial mean has wrong dimension");
  return mean;
}

Vector InitialSpec::sample(Eigen::Index d, Rng& rng) const {
  if (!(sigma >= 0.0)) throw std::invalid_argument("initial sigma must be >= 0");
  Vector x = center(d);
  if (sigma > 0.0) x.noalias() += sigma * standard_normal_vector(rng, d);
  return x;
}

double InitialSpec::second_moment(Eigen::Index d) const {
  return center(d).squaredNorm() + static_cast<double>(d) * sigma * sigma;
}

double InitialSpec::first_moment_bound(Eigen::Index d) const {
  if (sigma == 0.0) return center(d).norm();
  return std::sqrt(second_moment(d));
}

double InitialSpec::fourth_moment(Eigen::Index d) const {
  // |mu + s Z|^2 = a + 2 s <mu, Z> + s^2 |Z|^2 with a = |mu|^2; odd terms vanish.
  const double a = center(d).squaredNorm();
  const double s2 = sigma * sigma;
  const double dd = static_cast<double>(d);
  return a * a + 4.0 * s2 * a + 2.0 * a * s2 * dd + s2 * s2 * (dd * dd + 2.0 * dd);
}

std::vector<ChainState> run_chain(const InitialSpec& initial, const LossModel& model,
                                  const DataSet& data, const SgldConfig& cfg,
                                  std::size_t horizon, Rng& rng) {
  cfg.validate(data.size());
  std::vector<ChainState> path;
  path.reserve(horizon + 1);
  path.push_back(ChainState{initial.sample(data.dim(), rng), 0});
  for (std::size_t t = 0; t < horizon; ++t) path.push_back(advance(path.back(), model, data, cfg, rng));
  return path;
}

}  // namespace sgldstab
