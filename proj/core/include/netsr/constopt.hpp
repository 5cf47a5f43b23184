#pragma once

// Quasi-Newton refinement of the numeric constants of an expression.

#include <cstddef>
#include <cstdint>

#include "netsr/dataset.hpp"
#include "netsr/expr.hpp"

namespace netsr {

struct RefineConfig {
  std::size_t max_iterations = 500;
  double gradient_tolerance = 1e-8;
  double armijo_c1 = 1e-4;
  std::size_t max_halvings = 40;
  /// Total starts. Extra starts perturb the initial constants multiplicatively.
  std::size_t restarts = 1;
  std::uint64_t seed = 0;
};

struct RefineResult {
  Expression expression;
  double mse = 0.0;
  double initial_mse = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Mean squared error under guarded evaluation.
double guarded_mse(const Expression& e, const Dataset& data);

/// BFGS on the training MSE, starting from the constants already in `e`.
/// The result never has a larger MSE than the input.
RefineResult refine(const Expression& e, const Dataset& data, const RefineConfig& config = {});

}  // namespace netsr
