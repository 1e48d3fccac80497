#pragma once

// Experiment configuration, the experiment runners, the verification suite
// and report emission.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgldstab/bounds.hpp"
#include "sgldstab/core.hpp"
#include "sgldstab/couplings.hpp"
#include "sgldstab/dynamics.hpp"
#include "sgldstab/transport.hpp"

namespace sgldstab {

using Json = nlohmann::json;

enum class ExperimentKind { stability, generalization, contraction, discretization, verify };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

struct LossSpec {
  LossFamily family = LossFamily::quadratic;
  double z_max = 1.0;
  double a = 0.0;
  std::vector<double> w;  // cosine frequency; empty means e_1
  std::optional<double> L, M, m, b;  // overrides of the derived constants
};

struct VariantSpec {
  VariantKind kind = VariantKind::plain;
  double radius = 0.0;
  std::vector<std::vector<double>> sigma;
  std::size_t substeps = 0;
};

struct InitialConfig {
  std::vector<double> mean;  // empty means the origin
  double sigma = 0.0;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::verify;
  LossSpec loss;
  std::size_t n = 64;
  std::size_t k = 8;
  std::size_t d = 1;
  double eta = 0.05;
  double beta = 2.0;
  double lambda = 0.0;
  std::size_t horizon = 1000;
  std::size_t replicas = 200;
  std::uint64_t seed = 0;
  VariantSpec variant;
  std::size_t substeps_cts = 64;
  TimeMode time_mode = TimeMode::discrete;
  std::vector<std::size_t> n_list;
  std::vector<double> eta_list;
  CouplingMode coupling_mode = CouplingMode::synchronous;
  double meet_threshold = 0.0;
  InitialConfig initial;
  std::optional<InitialConfig> initial_b;
  double reference_L = 1.0;      // L for Lipschitz-regime constants of families without one
  std::size_t record_every = 0;  // 0 picks about 100 records over the horizon
  std::size_t population_samples = 10000;
  std::size_t reference_substeps = 1024;
  std::size_t samples = 256;
  std::size_t probes = 10000;
  bool full_batch_control = true;
  C2Form c2_form = C2Form::proof;
  std::string format = "json";

  /// Range checks shared by all subcommands; throws std::invalid_argument.
  void validate() const;
};

/// Strict parse: unknown keys and wrong types are errors.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
Json config_to_json(const ExperimentConfig& config);

LossModel build_loss(const LossSpec& spec, std::size_t d);
SgldConfig build_sgld(const ExperimentConfig& config);
InitialSpec build_initial(const InitialConfig& init);
std::size_t record_stride(const ExperimentConfig& config);

struct Curve {
  std::string name;
  std::string t_unit = "step";
  std::vector<double> t;
  std::vector<double> mean;
  std::vector<double> sem;
  std::vector<double> bound;  // empty when no analytic bound applies
};

struct Fit {
  std::string name;
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct Verdict {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ExperimentReport {
  std::string command;
  Json config;
  Json constants = Json::object();
  std::vector<Curve> curves;
  std::vector<Fit> fits;
  std::vector<Verdict> verdicts;
  std::vector<CertificateReport> checks;
  double wall_time_seconds = 0.0;

  bool passed() const;
};

Json report_to_json(const ExperimentReport& report, bool include_wall_time = true);
/// Serialized report without the wall-time field; equal configs and seeds
/// give equal payloads.
std::string report_payload(const ExperimentReport& report);

/// Writes report.json and, unless format == "json", one CSV per curve.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir,
                  const std::string& format);

std::string format_number(double value);
std::string curve_csv(const Curve& curve);

Json lipschitz_constants_json(const LipschitzConstants& c);
Json dissipative_constants_json(const DissipativeConstants& c);

/// Plateau detection over the final quarter of a curve from per-replica
/// values: per-replica OLS slopes, mean slope with a 95% interval, and the
/// fitted drift over the window compared with 2 SEM of the curve (the mean
/// pointwise SEM over the window).
struct PlateauResult {
  bool plateau = false;
  double slope = 0.0;
  double slope_se = 0.0;
  double level = 0.0;
  double level_sem = 0.0;
  double band_sem = 0.0;
  double window = 0.0;
};

PlateauResult detect_plateau(const std::vector<double>& t,
                             const std::vector<std::vector<double>>& replica_values);

/// Fits log(mean) against continuous time after a 10% burn-in on records
/// that keep at least max(20, 2% of replicas) unmet pairs.
Fit fit_decay_rate(const std::string& name, const std::vector<double>& time,
                   const std::vector<MeanSem>& curve, const std::vector<MeanSem>& met,
                   std::size_t replicas);

ExperimentReport run_stability(const ExperimentConfig& config);
ExperimentReport run_generalization(const ExperimentConfig& config);
ExperimentReport run_contraction(const ExperimentConfig& config);
ExperimentReport run_discretization(const ExperimentConfig& config);
ExperimentReport run_verify(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config);

// Verification checks. Each appends its verdicts (and curves or certificate
// rows) to `report`; run_verify aggregates them. The scenarios are fixed
// inside each check; only the seed and the Monte Carlo budget vary.

/// Quadratic family, d = 2, continuous windows: E|x_t|^2 against moment_cts(p = 2).
void verify_moment_cts(ExperimentReport& report, std::uint64_t seed, std::size_t replicas);
/// pseudo_huber with weight decay, discrete steps: E|x_t| against first_moment_disc.
void verify_first_moment_disc(ExperimentReport& report, std::uint64_t seed, std::size_t replicas,
                              double lambda);
/// cosine_dissipative, discrete steps with eta <= 1/(2m): E|x_t|^4 against sigma4 + c(2).
void verify_fourth_moment(ExperimentReport& report, std::uint64_t seed, std::size_t replicas);
/// Neighbor datasets, perturbed index forced into every batch, synchronous
/// continuous windows: E|x_t - y_t| against W1(mu, nu) + 2 L eta t.
void verify_synchronous_divergence(ExperimentReport& report, std::uint64_t seed,
                                   std::size_t replicas, double lambda);
/// Per-coordinate two-sample z-tests (1% level) of the mean and variance of
/// each reflection-coupled marginal against independent plain chains.
void verify_reflection_marginals(ExperimentReport& report, std::uint64_t seed, std::size_t replicas);
/// 1-D Ornstein-Uhlenbeck pair from 0 and 4: at least 99% of pairs meet by t = 20.
void verify_reflection_meeting(ExperimentReport& report, std::uint64_t seed, std::size_t replicas);
/// Exact W1 and W2^2 of mixtures r mu1 + (1 - r) mu2 of 32-point empirical
/// measures against the convex combination of the component distances.
void verify_wasserstein_convexity(ExperimentReport& report, std::uint64_t seed, std::size_t instances);
/// Certificates of every declared assumption of the built-in families in dimension d.
void verify_certificates(ExperimentReport& report, const LossModel& model, std::uint64_t seed,
                         std::size_t probes, std::size_t d);
/// Semimetric lemma suite; one verdict per lemma.
void verify_semimetric(ExperimentReport& report, const SemimetricParams& params, std::uint64_t seed,
                       std::size_t probes, std::size_t d);

/// `bounds` subcommand: every constant and the theorem curves on the record grid.
ExperimentReport run_bounds(const ExperimentConfig& config);
/// `simulate` subcommand: moment curves of independent chains.
ExperimentReport run_simulate(const ExperimentConfig& config);
/// `couple` subcommand: coupled-pair distance curves on one dataset pair.
ExperimentReport run_couple(const ExperimentConfig& config);

}  // namespace sgldstab
