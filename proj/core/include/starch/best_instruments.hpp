#pragma once

#include "starch/effects.hpp"
#include "starch/moments.hpp"

namespace starch {

struct BestInstrumentOptions {
    /// Power series in A stop once ||A^h||_inf drops below this (0 keeps all T terms).
    double truncation_tol = 1e-12;
};

/**
 * Kurtosis weight of the diagonal correction in the best quadratic matrices.
 * With cross-sectional demeaning: (n/(n-2))^2 (1/(n/(n-2) + (eta4-3)/2) - (n-2)/n).
 * Without it: 2/(eta4-1) - 1. Both vanish at eta4 = 3.
 */
double best_quadratic_weight(Index n, double eta4, bool project);

/// Best quadratic matrices P*_j, j = 1..p, built from G_j = M_j S^{-1}.
std::vector<Matrix> best_quadratic(const std::vector<Matrix>& G, double eta4, bool project);

/**
 * Approximate conditional means H_t of the transformed lag (T-1 columns),
 * evaluated at a preliminary theta and time effects alpha (length T).
 */
Matrix best_lag_means(const EstimationData& data, const Vector& theta, const Vector& alpha,
                      const BestInstrumentOptions& opts = {});

/**
 * Feasible best moments: Q*_t = (G_r (K_t eta + alpha*_t 1), K_t) with
 * K_t = (H_t, M H_t, X*_t), and the p best quadratic matrices.
 */
MomentSet best_instruments(const EstimationData& data, const Vector& theta,
                           const FixedEffects& effects, double eta4, Warnings* warnings = nullptr,
                           const BestInstrumentOptions& opts = {});

}  // namespace starch
