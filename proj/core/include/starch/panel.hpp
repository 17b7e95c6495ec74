#pragma once

#include "starch/weights.hpp"

#include <vector>

namespace starch {

/// Observed outcomes and regressors of one panel.
struct Panel {
    Matrix y;               ///< n x (T+1), column 0 holds Y_0
    std::vector<Matrix> x;  ///< k matrices, each n x T (periods 1..T)

    Index n() const noexcept { return y.rows(); }
    Index T() const noexcept { return y.cols() - 1; }
    int k() const noexcept { return static_cast<int>(x.size()); }

    /// Throws DataError on inconsistent shapes, non-finite values or T < 2.
    void validate() const;
};

}  // namespace starch
