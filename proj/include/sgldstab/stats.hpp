#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sgldstab {

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
};

/// Streaming mean/variance (Welford). Feeding values in a fixed order gives
/// bitwise-reproducible results.
class RunningStats {
 public:
  void add(double value);
  std::size_t count() const { return count_; }
  MeanSem result() const;

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Sample mean and standard error (n-1 denominator). Summation runs in index
/// order so results do not depend on how the samples were produced.
MeanSem mean_sem(std::span<const double> samples);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;  // OLS standard error from residuals
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x. Needs >= 2 points.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Runs body(i) for i in [0, count) across hardware threads. Each index is
/// handled by exactly one call; callers write results into index-addressed
/// slots and reduce in index order afterwards.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace sgldstab
