#include "starch/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace starch {

namespace {

bool rows_normalized(const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        const double s = m.row(i).sum();
        if (s != 0.0 && std::abs(s - 1.0) > kRowSumTolerance) return false;
    }
    return true;
}

void check_lattice(int side, int min_side) {
    if (side < min_side) {
        throw InvalidArgument("invalid lattice: side must be >= " + std::to_string(min_side) +
                              ", got " + std::to_string(side));
    }
}

// Queen graph distance (Chebyshev distance on the lattice).
int chebyshev(int side, Index a, Index b) {
    const int ra = static_cast<int>(a) / side, ca = static_cast<int>(a) % side;
    const int rb = static_cast<int>(b) / side, cb = static_cast<int>(b) % side;
    return std::max(std::abs(ra - rb), std::abs(ca - cb));
}

Matrix ring_at_distance(int side, int distance) {
    const Index n = static_cast<Index>(side) * side;
    Matrix m = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (chebyshev(side, i, j) == distance) m(i, j) = 1.0;
    return m;
}

Matrix normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (Index i = 0; i < out.rows(); ++i) {
        const double s = out.row(i).sum();
        if (s > 0.0) out.row(i) /= s;
    }
    return out;
}

}  // namespace

SpatialWeightSet::SpatialWeightSet(std::vector<Matrix> mats) : mats_(std::move(mats)) {
    if (mats_.empty()) throw DataError("weight set must contain at least one matrix");
    n_ = mats_.front().rows();
    if (n_ < 1) throw DataError("weight matrices must be non-empty");
    for (std::size_t l = 0; l < mats_.size(); ++l) {
        const Matrix& m = mats_[l];
        const std::string tag = "weight matrix " + std::to_string(l + 1);
        if (m.rows() != n_ || m.cols() != n_)
            throw DataError(tag + ": dimension mismatch, expected " + std::to_string(n_) + "x" +
                            std::to_string(n_));
        for (Index i = 0; i < n_; ++i) {
            if (m(i, i) != 0.0)
                throw DataError(tag + ": nonzero diagonal entry at (" + std::to_string(i) + "," +
                                std::to_string(i) + ")");
            for (Index j = 0; j < n_; ++j) {
                const double v = m(i, j);
                if (!std::isfinite(v)) throw DataError(tag + ": non-finite entry");
                if (v < 0.0)
                    throw DataError(tag + ": negative entry at (" + std::to_string(i) + "," +
                                    std::to_string(j) + ")");
            }
        }
        normalized_.push_back(rows_normalized(m));
    }
}

bool SpatialWeightSet::all_row_normalized() const noexcept {
    return std::all_of(normalized_.begin(), normalized_.end(), [](bool b) { return b; });
}

double SpatialWeightSet::max_row_sum_norm() const noexcept {
    double best = 0.0;
    for (const auto& m : mats_) best = std::max(best, m.cwiseAbs().rowwise().sum().maxCoeff());
    return best;
}

std::vector<Matrix> SpatialWeightSet::ordered_products() const {
    std::vector<Matrix> out;
    out.reserve(mats_.size() * mats_.size());
    for (const auto& a : mats_)
        for (const auto& b : mats_) out.emplace_back(a * b);
    return out;
}

Matrix queen_adjacency(int side) {
    check_lattice(side, 2);
    return ring_at_distance(side, 1);
}

SpatialWeightSet build_queen_contiguity(int side) {
    check_lattice(side, 2);
    return SpatialWeightSet({normalize_rows(ring_at_distance(side, 1))});
}

SpatialWeightSet build_second_order_contiguity(int side) {
    check_lattice(side, 3);
    return SpatialWeightSet(
        {normalize_rows(ring_at_distance(side, 1)), normalize_rows(ring_at_distance(side, 2))});
}

SpatialWeightSet row_normalize(const SpatialWeightSet& w) {
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(w.p()));
    for (const auto& m : w.matrices()) {
        if (m.rows() > 0 && m.minCoeff() < 0.0)
            throw DataError("row_normalize: negative weights are not supported");
        out.push_back(normalize_rows(m));
    }
    return SpatialWeightSet(std::move(out));
}

SpatialWeightSet load_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open weights file: " + path.string());

    std::string line;
    long lineno = 0;
    long n = -1, p = -1;
    std::vector<Matrix> mats;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (n < 0) {
            if (!(ss >> n >> p) || n < 1 || p < 1)
                throw DataError(where + ": expected header 'n p' with positive integers");
            mats.assign(static_cast<std::size_t>(p), Matrix::Zero(n, n));
            continue;
        }
        long l = 0, i = 0, j = 0;
        std::string wtext;
        if (!(ss >> l >> i >> j >> wtext))
            throw DataError(where + ": expected 'l i j w'");
        char* end = nullptr;
        const double w = std::strtod(wtext.c_str(), &end);
        if (end == wtext.c_str() || *end != '\0') throw DataError(where + ": bad weight value");
        if (l < 1 || l > p) throw DataError(where + ": matrix index out of range");
        if (i < 0 || i >= n || j < 0 || j >= n)
            throw DataError(where + ": entry index out of range for n=" + std::to_string(n));
        if (i == j && w != 0.0)
            throw DataError(where + ": nonzero diagonal entry (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
        mats[static_cast<std::size_t>(l - 1)](i, j) = w;
    }
    if (n < 0) throw DataError(path.string() + ": missing header");
    return SpatialWeightSet(std::move(mats));
}

void save_weights(const SpatialWeightSet& w, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write weights file: " + path.string());
    out << "# spatial weights: l i j w (l 1-based, i j 0-based)\n";
    out << w.n() << ' ' << w.p() << '\n';
    char buf[64];
    for (Index l = 0; l < w.p(); ++l) {
        const Matrix& m = w[l];
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j) {
                if (m(i, j) == 0.0) continue;
                std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
                out << (l + 1) << ' ' << i << ' ' << j << ' ' << buf << '\n';
            }
    }
    if (!out) throw DataError("failed writing weights file: " + path.string());
}

}  // namespace starch
