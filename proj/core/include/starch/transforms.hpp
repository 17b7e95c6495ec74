#pragma once

#include "starch/panel.hpp"

namespace starch {

/// Helmert scale c_t = sqrt((T-t)/(T-t+1)) for t = 1..T-1 (entry t-1).
Vector helmert_scales(Index T);

/// Elementwise log(y^2). Throws DataError listing zero entries; near-zero
/// magnitudes (< 1e-12) are counted into warnings.
Matrix log_square(const Matrix& y, Warnings* warnings = nullptr);

/// Forward orthogonal deviations of an n x T matrix -> n x (T-1).
Matrix helmert(const Matrix& m);

/// Same weights applied to the lagged block Y*_0..Y*_{T-1} (n x T input).
Matrix helmert_lag(const Matrix& m);

/// Subtracts each column's mean.
Matrix demean_cross_section(const Matrix& m);

/// Column t = column t+1 - column t.
Matrix first_difference(const Matrix& m);

struct TransformedPanel {
    Matrix ystar2;               ///< n x (T-1)
    Matrix ylag2;                ///< n x (T-1)
    std::vector<Matrix> xstar;   ///< k matrices n x (T-1)
    Vector c;                    ///< length T-1
};

/// Helmert transforms of a log-squared panel (ystar is n x (T+1)).
TransformedPanel transform_panel(const Matrix& ystar, const std::vector<Matrix>& x);

}  // namespace starch
