#pragma once

// Helpers shared by the experiment runners and the verification suite.

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "sgldstab/harness.hpp"

namespace sgldstab::detail {

/// Dissipativity constants of the weight-decayed objective f + lambda/2 |x|^2:
/// (m + lambda, b) with smoothness M + lambda.
struct EffectiveDissipative {
  double M = 0.0, m = 0.0, b = 0.0;
};

std::optional<EffectiveDissipative> effective_dissipative(const LossModel& model, double lambda);

DissipativeConstants dissipative_for(const ExperimentConfig& config, const LossModel& model,
                                     const InitialSpec& init);

/// Lipschitz-regime constants; L comes from the model or reference_L.
LipschitzConstants lipschitz_for(const ExperimentConfig& config, const LossModel& model,
                                 const InitialSpec& init);

std::vector<std::size_t> record_grid(std::size_t horizon, std::size_t stride);

Curve make_curve(const std::string& name, const std::string& unit, const std::vector<double>& t,
                 const std::vector<MeanSem>& values, std::vector<double> bound = {});

/// max over t of mean - bound - 3 sem; <= 0 means the bound dominates.
double worst_domination_margin(const Curve& curve);

Verdict domination_verdict(const std::string& name, const Curve& curve);

Fit to_fit(const std::string& name, const LinearFit& f);

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace sgldstab::detail
