#include "starch/weights.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <queue>

using namespace starch;

namespace {

// Graph distances on the queen lattice by breadth-first search.
std::vector<std::vector<int>> bfs_distances(int side) {
    const int n = side * side;
    std::vector<std::vector<int>> dist(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), -1));
    for (int s = 0; s < n; ++s) {
        auto& d = dist[static_cast<std::size_t>(s)];
        std::queue<int> q;
        d[static_cast<std::size_t>(s)] = 0;
        q.push(s);
        while (!q.empty()) {
            const int c = q.front();
            q.pop();
            const int r = c / side, col = c % side;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr, cc = col + dc;
                    if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= side || cc >= side) continue;
                    const int nb = rr * side + cc;
                    if (d[static_cast<std::size_t>(nb)] < 0) {
                        d[static_cast<std::size_t>(nb)] = d[static_cast<std::size_t>(c)] + 1;
                        q.push(nb);
                    }
                }
        }
    }
    return dist;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("starch_weights_" + name);
}

}  // namespace

TEST(QueenContiguity, SideEightHasSixtyFourUnits) {
    const auto w = build_queen_contiguity(8);
    EXPECT_EQ(w.n(), 64);
    EXPECT_EQ(w.p(), 1);
    EXPECT_TRUE(w.all_row_normalized());
}

TEST(QueenContiguity, SideTwoIsCompleteGraph) {
    const auto w = build_queen_contiguity(2);
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(w[0](i, j), i == j ? 0.0 : 1.0 / 3.0);
}

TEST(QueenContiguity, SideThreeNeighbourCounts) {
    const auto w = build_queen_contiguity(3);
    auto nnz = [&](Index i) { return (w[0].row(i).array() != 0.0).count(); };
    for (Index corner : {0, 2, 6, 8}) EXPECT_EQ(nnz(corner), 3);
    for (Index edge : {1, 3, 5, 7}) EXPECT_EQ(nnz(edge), 5);
    EXPECT_EQ(nnz(4), 8);
    for (Index i = 0; i < 9; ++i) EXPECT_NEAR(w[0].row(i).sum(), 1.0, 1e-15);
}

TEST(QueenContiguity, MatchesBfsDistanceOne) {
    for (int side : {2, 3, 5, 8}) {
        const auto w = build_queen_contiguity(side);
        const auto d = bfs_distances(side);
        for (Index i = 0; i < w.n(); ++i)
            for (Index j = 0; j < w.n(); ++j)
                EXPECT_EQ(w[0](i, j) > 0.0, d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] == 1);
    }
}

TEST(QueenContiguity, RejectsDegenerateSide) {
    EXPECT_THROW(build_queen_contiguity(0), InvalidArgument);
    EXPECT_THROW(build_queen_contiguity(1), InvalidArgument);
    EXPECT_THROW(build_second_order_contiguity(2), InvalidArgument);
}

TEST(SecondOrderContiguity, SideSevenHasFortyNineUnits) {
    const auto w = build_second_order_contiguity(7);
    EXPECT_EQ(w.n(), 49);
    EXPECT_EQ(w.p(), 2);
}

TEST(SecondOrderContiguity, RingsAreDisjoint) {
    for (int side : {3, 4, 7}) {
        const auto w = build_second_order_contiguity(side);
        EXPECT_EQ((w[0].array() * w[1].array()).abs().maxCoeff(), 0.0);
    }
}

TEST(SecondOrderContiguity, MatchesBfsDistanceTwo) {
    for (int side : {3, 5, 7}) {
        const auto w = build_second_order_contiguity(side);
        const auto d = bfs_distances(side);
        for (Index i = 0; i < w.n(); ++i) {
            int expected = 0;
            for (Index j = 0; j < w.n(); ++j) {
                const bool ring2 = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] == 2;
                expected += ring2;
                EXPECT_EQ(w[1](i, j) > 0.0, ring2);
            }
            if (expected > 0) {
                EXPECT_NEAR(w[1].row(i).sum(), 1.0, 1e-14);
            }
        }
    }
}

TEST(SecondOrderContiguity, CentreOfThreeByThreeHasNoSecondRing) {
    const auto w = build_second_order_contiguity(3);
    EXPECT_EQ(w[1].row(4).cwiseAbs().sum(), 0.0);
    EXPECT_FALSE(w[1].row(4).hasNaN());
}

TEST(RowNormalize, DividesByRowSum) {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 1) = 2.0;
    m(0, 2) = 2.0;
    m(1, 0) = 1.0;
    const auto w = row_normalize(SpatialWeightSet({m}));
    EXPECT_DOUBLE_EQ(w[0](0, 1), 0.5);
    EXPECT_DOUBLE_EQ(w[0](0, 2), 0.5);
    EXPECT_DOUBLE_EQ(w[0](1, 0), 1.0);
    EXPECT_EQ(w[0].row(2).cwiseAbs().sum(), 0.0);
    EXPECT_FALSE(w[0].hasNaN());
}

TEST(RowNormalize, Idempotent) {
    const auto w = build_queen_contiguity(4);
    const auto again = row_normalize(w);
    EXPECT_EQ(again[0], w[0]);
}

TEST(SpatialWeightSet, RejectsInvalidMatrices) {
    Matrix diag = Matrix::Zero(3, 3);
    diag(1, 1) = 0.1;
    EXPECT_THROW(SpatialWeightSet({diag}), DataError);
    Matrix neg = Matrix::Zero(3, 3);
    neg(0, 1) = -1.0;
    EXPECT_THROW(SpatialWeightSet({neg}), DataError);
    EXPECT_THROW(SpatialWeightSet({Matrix::Zero(3, 3), Matrix::Zero(4, 4)}), DataError);
    Matrix nonsq = Matrix::Zero(3, 4);
    EXPECT_THROW(SpatialWeightSet({nonsq}), DataError);
}

TEST(SpatialWeightSet, OrderedProductsAreAMajor) {
    const auto w = build_second_order_contiguity(4);
    const auto prods = w.ordered_products();
    ASSERT_EQ(prods.size(), 4u);
    EXPECT_LT((prods[1] - w[0] * w[1]).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((prods[2] - w[1] * w[0]).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(WeightsFile, RoundTripIsBitExact) {
    const auto w = build_queen_contiguity(3);
    const auto path = temp_file("roundtrip.txt");
    save_weights(w, path);
    const auto back = load_weights(path);
    ASSERT_EQ(back.n(), w.n());
    EXPECT_EQ(back[0], w[0]);
    std::filesystem::remove(path);
}

TEST(WeightsFile, RejectsNonzeroDiagonal) {
    const auto path = temp_file("diag.txt");
    std::ofstream(path) << "6 1\n1 5 5 0.1\n";
    EXPECT_THROW(load_weights(path), DataError);
    std::filesystem::remove(path);
}

TEST(WeightsFile, RejectsOutOfRangeIndex) {
    const auto path = temp_file("range.txt");
    std::ofstream(path) << "4 1\n1 0 4 1.0\n";
    EXPECT_THROW(load_weights(path), DataError);
    std::ofstream(path) << "4 1\n2 0 1 1.0\n";
    EXPECT_THROW(load_weights(path), DataError);
    std::filesystem::remove(path);
}

TEST(WeightsFile, MissingFileIsDataError) {
    EXPECT_THROW(load_weights(temp_file("does_not_exist.txt")), DataError);
}

TEST(QueenContiguity, SupportIsSymmetricAndRowsSumToOne) {
    for (int side = 2; side <= 6; ++side) {
        const auto w = build_queen_contiguity(side);
        const auto d = bfs_distances(side);
        for (Index i = 0; i < w.n(); ++i) {
            const double rs = w[0].row(i).sum();
            EXPECT_TRUE(std::abs(rs) < 1e-12 || std::abs(rs - 1.0) < 1e-12);
            EXPECT_EQ(w[0](i, i), 0.0);
            for (Index j = 0; j < w.n(); ++j) {
                EXPECT_EQ(w[0](i, j) > 0.0, w[0](j, i) > 0.0);
                EXPECT_EQ(w[0](i, j) > 0.0, d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] == 1);
            }
        }
    }
}

TEST(SecondOrderContiguity, ExhaustiveBfsUpToSideSix) {
    for (int side = 3; side <= 6; ++side) {
        const auto w = build_second_order_contiguity(side);
        const auto d = bfs_distances(side);
        for (Index i = 0; i < w.n(); ++i) {
            const double rs = w[1].row(i).sum();
            EXPECT_TRUE(std::abs(rs) < 1e-12 || std::abs(rs - 1.0) < 1e-12);
            EXPECT_EQ(w[1](i, i), 0.0);
            for (Index j = 0; j < w.n(); ++j)
                EXPECT_EQ(w[1](i, j) > 0.0, d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] == 2);
        }
    }
}
