#pragma once

#include <functional>

#include "scalefit/objective.hpp"
#include "scalefit/types.hpp"

namespace scalefit {

struct OptimizerConfig {
  int max_iterations = 1000;
  Real gradient_tolerance = 1e-8;
  Real parameter_tolerance = 1e-10;
  int history_size = 10;
  bool finite_difference_gradients = false;
};

struct MinimizeResult {
  Vector parameters;
  Real objective = 0;
  bool converged = false;
  int iterations = 0;
  Real gradient_norm = 0;
};

/// L-BFGS with strong Wolfe line search (c1 = 1e-4, c2 = 0.9, cubic
/// interpolation). Curvature pairs with s.y <= 1e-10 |s||y| are skipped.
/// converged is true when the infinity norm of the gradient falls to
/// gradient_tolerance or an accepted step falls to parameter_tolerance
/// within max_iterations. A non-finite objective or gradient at the start
/// throws NumericalError carrying the iterate; non-finite trial values
/// inside the line search only shrink the step.
MinimizeResult lbfgs_minimize(
    const std::function<Real(const Vector&, Vector&)>& value_and_gradient,
    const Vector& init, const OptimizerConfig& cfg);

/// Convenience wrapper minimizing sum_i huber(r_i(theta)) for a residual
/// family, honoring cfg.finite_difference_gradients.
MinimizeResult minimize_huber_objective(const ResidualFamily& family,
                                        const Vector& init,
                                        const OptimizerConfig& cfg,
                                        const HuberConfig& huber);

}  // namespace scalefit
