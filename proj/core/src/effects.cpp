#include "starch/effects.hpp"

namespace starch {

FixedEffects recover_effects(const EstimationData& data, const Vector& theta) {
    const Matrix v = data.level_residuals(theta);
    const Index T = data.T();
    FixedEffects fx;
    fx.alpha = Vector::Zero(T);
    if (data.spec.has_time_effects) fx.alpha = v.colwise().mean().transpose();
    Matrix centred = v;
    centred.rowwise() -= fx.alpha.transpose();
    fx.mu = centred.rowwise().mean();
    const Matrix a = fx.alpha.transpose();
    fx.alpha_star = helmert(a).row(0).transpose();
    return fx;
}

}  // namespace starch
