#pragma once

#include "starch/estimation_data.hpp"

namespace starch {

struct FixedEffects {
    Vector alpha;       ///< length T, time effects for periods 1..T (zero without time effects)
    Vector mu;          ///< length n, unit effects plus the error-mean constant
    Vector alpha_star;  ///< length T-1, Helmert transform of alpha
};

/**
 * Recovers the fixed effects from level residuals at theta. The time effects
 * are per-period cross-sectional means, identified under the normalization
 * that unit effects (including the error mean) sum to zero.
 */
FixedEffects recover_effects(const EstimationData& data, const Vector& theta);

}  // namespace starch
