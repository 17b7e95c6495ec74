#pragma once

#include "starch/model.hpp"
#include "starch/panel.hpp"
#include "starch/transforms.hpp"

#include <memory>

namespace starch {

/**
 * Everything the estimators need from one panel, precomputed once.
 *
 * Per transformed period t (0-based, T-1 periods) the regressor block is
 * R_t = (M_1 Y**_t .. M_p Y**_t, Y**lag_t, M_1 Y**lag_t .. M_p Y**lag_t, X*_t),
 * so the transformed residual is U_t(theta) = Y**_t - R_t theta.
 */
struct EstimationData {
    ModelSpec spec;
    std::shared_ptr<const SpatialWeightSet> weights;
    Panel panel;
    Matrix ystar;                 ///< n x (T+1)
    TransformedPanel tp;
    std::vector<Matrix> R;        ///< T-1 blocks, n x K
    Warnings warnings;

    Index n() const noexcept { return ystar.rows(); }
    Index T() const noexcept { return ystar.cols() - 1; }
    Index periods() const noexcept { return T() - 1; }
    /// N = n (T - 1).
    double N() const noexcept { return static_cast<double>(n() * periods()); }
    /// Cross-sectional demeaning applies only with time effects.
    bool project() const noexcept { return spec.has_time_effects; }

    /// Applies J_n (or the identity without time effects) to each column.
    Matrix pi(const Matrix& m) const;
    Vector pi(const Vector& v) const;

    /// U_t(theta) for every transformed period, as an n x (T-1) matrix.
    Matrix residuals(const Vector& theta) const;

    /// Level-equation residuals S Y*_t - Z*_t eta for t = 1..T (n x T);
    /// they still contain the unit and time effects.
    Matrix level_residuals(const Vector& theta) const;
};

EstimationData make_estimation_data(const Panel& panel,
                                    std::shared_ptr<const SpatialWeightSet> weights,
                                    const ModelSpec& spec);

}  // namespace starch
