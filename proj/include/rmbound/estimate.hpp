#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace rmb {

/// Monte Carlo summary of a scalar statistic.
struct NormEstimate {
  double mean = 0.0;
  double std_error = 0.0;  ///< sample standard deviation / sqrt(trials)
  int trials = 0;
  std::vector<double> per_trial_values;
  std::uint64_t seed = 0;
};

/// Mean and standard error from stored per-trial values, summed in index
/// order so the result does not depend on how the trials were scheduled.
inline NormEstimate summarize(std::vector<double> values, std::uint64_t seed) {
  NormEstimate e;
  e.trials = static_cast<int>(values.size());
  e.seed = seed;
  if (values.empty()) return e;
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    e.std_error = sd / std::sqrt(static_cast<double>(values.size()));
  }
  e.per_trial_values = std::move(values);
  return e;
}

}  // namespace rmb
