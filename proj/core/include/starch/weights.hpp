#pragma once

#include "starch/errors.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

namespace starch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Tolerance used to decide whether a nonzero row sums to one.
inline constexpr double kRowSumTolerance = 1e-12;

/**
 * Ordered set of p dense n x n spatial weight matrices M_1..M_p.
 *
 * Every matrix has an exactly zero diagonal and finite non-negative entries.
 * The row-normalized flag of each matrix is derived from its contents: it is
 * set when every nonzero row sums to one within kRowSumTolerance. Rows of all
 * zeros (islands) are permitted.
 *
 * Instances are immutable and may be shared read-only between threads.
 */
class SpatialWeightSet {
public:
    /// Validates and takes ownership of the matrices. Throws DataError.
    explicit SpatialWeightSet(std::vector<Matrix> mats);

    Index n() const noexcept { return n_; }
    Index p() const noexcept { return static_cast<Index>(mats_.size()); }

    const Matrix& operator[](Index l) const { return mats_.at(static_cast<std::size_t>(l)); }
    const std::vector<Matrix>& matrices() const noexcept { return mats_; }

    bool row_normalized(Index l) const { return normalized_.at(static_cast<std::size_t>(l)); }
    bool all_row_normalized() const noexcept;

    /// max_l ||M_l||_inf (maximum absolute row sum).
    double max_row_sum_norm() const noexcept;

    /// Ordered products M_a M_b for a, b = 1..p (a-major order).
    std::vector<Matrix> ordered_products() const;

private:
    Index n_ = 0;
    std::vector<Matrix> mats_;
    std::vector<bool> normalized_;
};

/// Row-normalized queen contiguity on a side x side lattice (p = 1).
SpatialWeightSet build_queen_contiguity(int side);

/// First-lag (M_1) and second-lag (M_2) queen neighbours, each row-normalized.
SpatialWeightSet build_second_order_contiguity(int side);

/// Divides each nonzero row by its sum; zero rows stay zero.
SpatialWeightSet row_normalize(const SpatialWeightSet& w);

/// Binary queen adjacency of a side x side lattice (row-major cell order).
Matrix queen_adjacency(int side);

/**
 * Triplet text format: header "n p", then "l i j w" lines with a 1-based
 * matrix index l and 0-based i, j. Lines starting with '#' are comments.
 */
SpatialWeightSet load_weights(const std::filesystem::path& path);
void save_weights(const SpatialWeightSet& w, const std::filesystem::path& path);

}  // namespace starch
