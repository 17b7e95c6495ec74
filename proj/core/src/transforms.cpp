#include "starch/transforms.hpp"

#include <cmath>
#include <sstream>

namespace starch {

namespace {

void require_periods(const Matrix& m, const char* what) {
    if (m.cols() < 2)
        throw InvalidArgument(std::string(what) + ": need at least 2 periods, got " +
                              std::to_string(m.cols()));
}

}  // namespace

Vector helmert_scales(Index T) {
    Vector c(T - 1);
    for (Index t = 1; t < T; ++t)
        c(t - 1) = std::sqrt(static_cast<double>(T - t) / static_cast<double>(T - t + 1));
    return c;
}

Matrix log_square(const Matrix& y, Warnings* warnings) {
    std::ostringstream zeros;
    long nzero = 0, ntiny = 0;
    for (Index t = 0; t < y.cols(); ++t)
        for (Index i = 0; i < y.rows(); ++i) {
            const double v = y(i, t);
            if (v == 0.0) {
                if (nzero < 20) zeros << " (" << i << "," << t << ")";
                ++nzero;
            } else if (std::abs(v) < 1e-12) {
                ++ntiny;
            }
        }
    if (nzero > 0) {
        std::ostringstream msg;
        msg << nzero << " zero outcome(s), log(y^2) undefined at (unit,time):" << zeros.str();
        if (nzero > 20) msg << " ...";
        throw DataError(msg.str());
    }
    if (ntiny > 0 && warnings)
        warnings->push_back(std::to_string(ntiny) + " outcome(s) with |y| < 1e-12");
    return y.array().square().log().matrix();
}

Matrix helmert(const Matrix& m) {
    require_periods(m, "helmert");
    const Index T = m.cols();
    Matrix out(m.rows(), T - 1);
    Vector tail = Vector::Zero(m.rows());  // sum of columns t+1..T (1-based)
    const Vector c = helmert_scales(T);
    for (Index t = T - 1; t >= 1; --t) {
        tail += m.col(t);
        out.col(t - 1) = c(t - 1) * (m.col(t - 1) - tail / static_cast<double>(T - t));
    }
    return out;
}

Matrix helmert_lag(const Matrix& m) {
    require_periods(m, "helmert_lag");
    // Column t uses Y*_{t-1} minus the mean of Y*_t..Y*_{T-1}: the same
    // forward weights as helmert on the block Y*_0..Y*_{T-1}.
    return helmert(m);
}

Matrix demean_cross_section(const Matrix& m) {
    if (m.rows() < 2) throw InvalidArgument("demean_cross_section: need n >= 2");
    return m.rowwise() - m.colwise().mean();
}

Matrix first_difference(const Matrix& m) {
    require_periods(m, "first_difference");
    return m.rightCols(m.cols() - 1) - m.leftCols(m.cols() - 1);
}

TransformedPanel transform_panel(const Matrix& ystar, const std::vector<Matrix>& x) {
    const Index T = ystar.cols() - 1;
    if (T < 2) throw InvalidArgument("transform_panel: need T >= 2");
    TransformedPanel tp;
    tp.ystar2 = helmert(ystar.rightCols(T));
    tp.ylag2 = helmert_lag(ystar.leftCols(T));
    for (const auto& xj : x) {
        if (xj.rows() != ystar.rows() || xj.cols() != T)
            throw DataError("regressor block has wrong shape");
        tp.xstar.push_back(helmert(xj));
    }
    tp.c = helmert_scales(T);
    return tp;
}

}  // namespace starch
