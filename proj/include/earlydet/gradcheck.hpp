#pragma once

// Central finite-difference checks of the analytic loss gradients.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "earlydet/losses.hpp"

namespace earlydet {

struct GradientCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t parameters_checked = 0;
  std::string worst_parameter;
};

// Relative error |a - b| / max(|a|, |b|, floor). The floor keeps entries whose
// true gradient is ~0 from being judged on finite-difference round-off alone.
double relative_error(double analytic, double numeric, double floor);

inline constexpr double kGradCheckStep = 1e-6;
inline constexpr double kGradCheckFloor = 1e-4;
// Pass mark for the maximum relative error.
inline constexpr double kGradCheckTolerance = 1e-5;

// Compares loss(params).gradients against (f(θ+h) - f(θ-h)) / 2h for every
// weight and bias.
GradientCheckResult check_gradients(
    const NetworkParams& params,
    const std::function<LossReport(const NetworkParams&)>& loss,
    double step = kGradCheckStep, double floor = kGradCheckFloor);

struct GradientSuiteEntry {
  std::uint64_t seed;
  std::string loss;  // "weighted" or "multitask"
  int batch_size;
  GradientCheckResult result;
};

struct GradientSuiteReport {
  std::vector<GradientSuiteEntry> entries;
  double max_rel_error = 0.0;
};

// Random tiny networks (input 6, hidden 8/6/8, C=3, N in [1,5], dropout off)
// checked for both losses, one network pair per seed.
GradientSuiteReport run_gradient_suite(int num_seeds, std::uint64_t base_seed);

}  // namespace earlydet
