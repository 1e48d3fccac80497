#pragma once

// Paired-chain simulators: synchronous coupling (shared noise and batches)
// and reflection coupling (mirrored noise until the chains meet, then glued).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sgldstab/core.hpp"
#include "sgldstab/dynamics.hpp"
#include "sgldstab/rng.hpp"
#include "sgldstab/stats.hpp"
#include "sgldstab/transport.hpp"

namespace sgldstab {

enum class CouplingMode { synchronous, reflection };

std::string to_string(CouplingMode mode);
CouplingMode coupling_mode_from_string(const std::string& name);

struct CouplingConfig {
  CouplingMode mode = CouplingMode::synchronous;
  /// Gluing distance in reflection mode; 0 selects 0.01 sqrt(2 gamma / beta)
  /// for substep size gamma.
  double meet_threshold = 0.0;
  /// When set, this index is placed in every mini-batch (the remaining k - 1
  /// entries are uniform over the other indices).
  std::optional<std::size_t> force_index;
};

struct CoupledState {
  Vector x;
  Vector y;
  bool met = false;
  std::optional<std::size_t> meet_step;
  std::size_t step = 0;
};

/// Near-coincidence below which a pair counts as met (the reflection
/// direction is undefined there).
constexpr double kMeetFloor = 1e-14;

/// Householder reflection (I - 2 e e^T) xi for unit e.
Vector reflect(const Vector& xi, const Vector& e);

/// Size-k batch that always contains `forced`.
std::vector<std::size_t> sample_minibatch_forced(std::size_t n, std::size_t k, std::size_t forced,
                                                 Rng& rng);

/// One discrete step of both chains with the same xi and batch; x under
/// data_a, y under data_b.
CoupledState synchronous_pair_step(const CoupledState& cs, const LossModel& model,
                                   const DataSet& data_a, const DataSet& data_b,
                                   const SgldConfig& cfg, const NoiseDraw& noise);

/// Synchronous window: both chains consume the same batch and increments.
CoupledState synchronous_pair_window(const CoupledState& cs, const LossModel& model,
                                     const DataSet& data_a, const DataSet& data_b,
                                     const SgldConfig& cfg, std::span<const std::size_t> batch,
                                     std::span<const Vector> increments);

/// One window (cfg.window_substeps() substeps) of the reflection coupling on a
/// single dataset. Each unmet substep draws xi, then one uniform u. With
/// drift-adjusted means m_x, m_y, sigma = sqrt(2 gamma / beta) and
/// delta = (m_x - m_y) / sigma, the pair is glued (y' = x' = m_x + sigma xi)
/// when u < phi(xi + delta) / phi(xi); otherwise y' = m_y + sigma (I - 2 e e^T) xi
/// with e = delta / |delta|, and the pair is still glued if |x' - y'| <= threshold.
/// Both marginals are exact Euler substeps. Met pairs evolve synchronously.
/// Anisotropic noise is not supported.
CoupledState reflection_pair_step(const CoupledState& cs, const LossModel& model,
                                  const DataSet& data, const SgldConfig& cfg,
                                  const CouplingConfig& ccfg, Rng& rng);

/// Default gluing distance for substep size gamma.
double default_meet_threshold(double gamma, double beta);

struct CoupledRun {
  std::vector<std::size_t> steps;  // recorded step indices
  std::vector<MeanSem> dist, dist_sq, rho, rho_g, met;
  /// replica_dist[record][replica], filled when requested.
  std::vector<std::vector<double>> replica_dist;
};

struct CoupledRunSpec {
  InitialSpec initial_a;
  InitialSpec initial_b;
  std::size_t horizon = 0;
  std::size_t replicas = 1;
  std::size_t record_every = 1;
  std::uint64_t seed = 0;
  std::string stream_label = "couple";
  SemimetricParams rho_params;
  bool keep_replica_dist = false;
};

/// Runs `replicas` independent coupled pairs. Replica r draws everything
/// (initial noise shared by both sides, batches, increments, uniforms) from
/// make_stream(seed, stream_label, r). Statistics are accumulated in replica
/// order, so results do not depend on the thread count.
CoupledRun run_coupled(const CoupledRunSpec& spec, const LossModel& model, const DataSet& data_a,
                       const DataSet& data_b, const SgldConfig& cfg, const CouplingConfig& ccfg);

}  // namespace sgldstab
