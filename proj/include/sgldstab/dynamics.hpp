#pragma once

// SGLD kernels: the discrete update, the frozen-batch continuous window
// (Euler-Maruyama with T substeps), and the projected / anisotropic /
// multistep variants.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sgldstab/core.hpp"
#include "sgldstab/rng.hpp"

namespace sgldstab {

enum class VariantKind { plain, projected, anisotropic, multistep };

struct Variant {
  VariantKind kind = VariantKind::plain;
  double radius = 0.0;             // projected
  Eigen::MatrixXd sigma;           // anisotropic, as supplied
  Eigen::MatrixXd sigma_sqrt;      // anisotropic, symmetric square root
  std::size_t substeps = 0;        // multistep; 0 means floor(1/eta)

  static Variant plain();
  static Variant projected(double radius);
  /// Throws if sigma is not symmetric, has an eigenvalue below -1e-8, or has
  /// operator norm above 1.
  static Variant anisotropic(const Eigen::MatrixXd& sigma);
  static Variant multistep(std::size_t substeps = 0);
};

std::string to_string(VariantKind kind);

enum class TimeMode { discrete, continuous };

struct SgldConfig {
  double eta = 0.01;
  double beta = 1.0;
  std::size_t k = 1;
  double lambda = 0.0;
  Variant variant;
  std::size_t substeps_cts = 64;
  TimeMode mode = TimeMode::discrete;

  /// Checks the scalar ranges and 1 <= k <= n.
  void validate(std::size_t n) const;
  /// Substep count of one window under the current mode and variant.
  std::size_t window_substeps() const;
};

struct ChainState {
  Vector x;
  std::size_t step = 0;
};

struct NoiseDraw {
  Vector xi;
  std::vector<std::size_t> batch;
};

/// Uniform size-k subset of {0..n-1}, returned sorted.
std::vector<std::size_t> sample_minibatch(std::size_t n, std::size_t k, Rng& rng);

/// Batch first, then xi; this order is part of the seed contract.
NoiseDraw draw_noise(std::size_t n, std::size_t k, Eigen::Index d, Rng& rng);

Vector project_ball(const Vector& x, double radius);

/// Applies the anisotropic square root when that variant is active.
Vector shape_noise(const SgldConfig& cfg, const Vector& xi);

/// x <- x - gamma * grad F_S(x, B) - gamma * lambda x + sqrt(2 gamma / beta) * noise.
/// `noise` must already be shaped. `scratch` receives the drift.
void euler_substep(Vector& x, const LossModel& model, const DataSet& data,
                   std::span<const std::size_t> batch, double lambda, double gamma, double beta,
                   const Vector& noise, Vector& scratch);

/// One discrete SGLD update with the supplied draws.
ChainState sgld_step(const ChainState& state, const LossModel& model, const DataSet& data,
                     const SgldConfig& cfg, const NoiseDraw& noise);

/// Advances time eta with increments.size() substeps of size eta / T under a
/// fixed batch. Each increment is a standard normal vector (unshaped).
ChainState integrate_window(const ChainState& state, const LossModel& model, const DataSet& data,
                            const SgldConfig& cfg, std::span<const std::size_t> batch,
                            std::span<const Vector> increments);

/// Frozen-batch window with cfg.substeps_cts substeps and fresh increments.
ChainState continuous_window(const ChainState& state, const LossModel& model, const DataSet& data,
                             const SgldConfig& cfg, std::span<const std::size_t> batch, Rng& rng);

/// Fresh batch, then a window of floor(1/eta) substeps. Needs eta in (0,1).
ChainState multistep_kernel(const ChainState& state, const LossModel& model, const DataSet& data,
                            const SgldConfig& cfg, Rng& rng);

/// One step of whichever kernel cfg selects (discrete step, multistep window or
/// continuous window), drawing from rng.
ChainState advance(const ChainState& state, const LossModel& model, const DataSet& data,
                   const SgldConfig& cfg, Rng& rng);

/// Point mass at `mean` when sigma == 0, otherwise N(mean, sigma^2 I). An
/// empty mean is the origin.
struct InitialSpec {
  Vector mean;
  double sigma = 0.0;

  Vector sample(Eigen::Index d, Rng& rng) const;
  Vector center(Eigen::Index d) const;

  /// Exact for a point mass; sqrt of the second moment (an upper bound) for a
  /// Gaussian.
  double first_moment_bound(Eigen::Index d) const;
  double second_moment(Eigen::Index d) const;
  double fourth_moment(Eigen::Index d) const;
};

/// Trajectory of horizon + 1 states starting with a draw from `initial`.
std::vector<ChainState> run_chain(const InitialSpec& initial, const LossModel& model,
                                  const DataSet& data, const SgldConfig& cfg,
                                  std::size_t horizon, Rng& rng);

}  // namespace sgldstab
