#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace nse {

struct OptimizerConfig {
  std::size_t restarts = 5;
  std::size_t max_iterations = 2000;
  double simplex_tolerance = 1e-8;
  /// Initial simplex edge, relative to max(|x_i|, 1).
  double initial_scale = 0.1;
};

/// Throws ConfigError when a field is zero or non-positive.
void validate(const OptimizerConfig& config);

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(const std::vector<double>&)>;

/// Nelder-Mead with the dimension-adaptive coefficients of Gao and Han.
/// Non-finite objective values are treated as +inf, which keeps the simplex
/// inside the feasible region without explicit constraints. Stops when both
/// the spread of function values and the simplex diameter (relative) fall
/// below `tolerance`.
MinimizeResult nelder_mead(const Objective& f, std::vector<double> start, double initial_scale,
                           std::size_t max_iterations, double tolerance);

}  // namespace nse
