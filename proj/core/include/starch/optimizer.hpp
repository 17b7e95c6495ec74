#pragma once

#include "starch/weights.hpp"

#include <functional>
#include <string>

namespace starch {

struct OptimizerOptions {
    double grad_tol = 1e-8;   ///< stop when ||J'r||_inf falls below
    double step_tol = 1e-10;  ///< stop when the relative step falls below
    int max_iter = 500;
    double initial_damping = 1e-3;
};

struct OptimResult {
    Vector x;
    double objective = 0.0;  ///< r'r at x
    double grad_norm = 0.0;  ///< ||J'r||_inf at x
    int iterations = 0;
    bool converged = false;
    std::string reason;
};

/// Fills the residual vector and (when non-null) its Jacobian at x.
using ResidualFn = std::function<void(const Vector& x, Vector& r, Matrix* jac)>;

/**
 * Levenberg-Marquardt with Nielsen's damping update for min r(x)'r(x).
 * Returns converged=false (never throws) when the iteration cap is hit.
 */
OptimResult levenberg_marquardt(const ResidualFn& fn, const Vector& x0,
                                const OptimizerOptions& opts = {});

}  // namespace starch
