#include "starch/covariance.hpp"

#include <cmath>
#include <limits>

namespace starch {

namespace {

Matrix projected(const EstimationData& data, const Matrix& P) {
    return data.pi(Matrix(data.pi(P).transpose())).transpose();
}

// A^h S^{-1} for h = 0..T-2.
std::vector<Matrix> impulse_powers(const Operators& ops, Index count) {
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(count));
    Matrix cur = ops.S_inv;
    for (Index h = 0; h < count; ++h) {
        out.push_back(cur);
        if (h + 1 < count) cur = ops.A * cur;
    }
    return out;
}

double lag_expectation_from(const std::vector<Matrix>& powers, const Matrix& B, double sigma2,
                            Index T) {
    const Index H = static_cast<Index>(powers.size());
    Vector tau(H);
    for (Index h = 0; h < H; ++h) tau(h) = powers[static_cast<std::size_t>(h)].cwiseProduct(B).sum();
    Vector cum = Vector::Zero(H + 1);
    for (Index h = 0; h < H; ++h) cum(h + 1) = cum(h) + tau(h);
    double total = 0.0;
    for (Index t = 1; t <= T - 1; ++t) {
        const double inv = 1.0 / static_cast<double>(T - t);
        double inner = 0.0;
        for (Index d = 0; d <= T - 1 - t; ++d) inner += tau(d) - inv * cum(d);
        total += -sigma2 / static_cast<double>(T - t + 1) * inner;
    }
    return total;
}

}  // namespace

VcovForm resolve_vcov_form(VcovForm form, Index periods) {
    if (form != VcovForm::Auto) return form;
    return periods >= kLargeTThreshold ? VcovForm::LargeT : VcovForm::FiniteT;
}

const char* vcov_form_name(VcovForm form) {
    switch (form) {
        case VcovForm::LargeT: return "large-T";
        case VcovForm::FiniteT: return "finite-T";
        default: return "auto";
    }
}

Matrix quadratic_trace_matrix(const EstimationData& data, const std::vector<Matrix>& P,
                              const std::vector<Matrix>& G) {
    const double periods = static_cast<double>(data.periods());
    Matrix C(static_cast<Index>(P.size()), static_cast<Index>(G.size()));
    for (std::size_t l = 0; l < P.size(); ++l) {
        const Matrix B = projected(data, P[l]);
        const Matrix Bs = B + B.transpose();
        for (std::size_t r = 0; r < G.size(); ++r)
            C(static_cast<Index>(l), static_cast<Index>(r)) = periods * G[r].cwiseProduct(Bs).sum();
    }
    return C;
}

double lag_expectation(const EstimationData& data, const Operators& ops, const Matrix& B,
                       double sigma2) {
    return lag_expectation_from(impulse_powers(ops, data.T() - 1), B, sigma2, data.T());
}

Matrix jacobian_large_t(const EstimationData& data, const MomentSet& set, const Vector& theta,
                        double sigma2, const Vector& alpha_star) {
    const Theta th = Theta::from_vector(data.spec, theta);
    const Operators ops = build_operators(*data.weights, th);
    const Index p = data.spec.p, K = data.spec.num_params();
    const Index m = set.m(), kq = set.kq();
    Matrix D = Matrix::Zero(m + kq, K);
    if (m > 0) D.topLeftCorner(m, p) = sigma2 * quadratic_trace_matrix(data, set.P, ops.G);
    const std::vector<Matrix> lz = expected_regressors(data, theta, alpha_star);
    for (Index t = 0; t < data.periods(); ++t)
        D.bottomRows(kq).noalias() +=
            data.pi(set.Q[static_cast<std::size_t>(t)]).transpose() * lz[static_cast<std::size_t>(t)];
    return -D / data.N();
}

Matrix jacobian_finite_t_correction(const EstimationData& data, const MomentSet& set,
                                    const Vector& theta, double sigma2) {
    const Theta th = Theta::from_vector(data.spec, theta);
    const Operators ops = build_operators(*data.weights, th);
    const SpatialWeightSet& w = *data.weights;
    const Index p = data.spec.p, K = data.spec.num_params();
    const Index m = set.m(), kq = set.kq();
    Matrix D = Matrix::Zero(m + kq, K);
    if (m == 0) return D;
    const std::vector<Matrix> powers = impulse_powers(ops, data.T() - 1);
    const Matrix Gamma = temporal_filter(w, th.gamma, th.delta);
    const Index T = data.T();
    for (Index l = 0; l < m; ++l) {
        const Matrix B = projected(data, set.P[static_cast<std::size_t>(l)]);
        const Matrix Bs = B + B.transpose();
        for (Index r = 0; r < p; ++r) {
            const Matrix GG = ops.G[static_cast<std::size_t>(r)] * Gamma;
            D(l, r) = lag_expectation_from(powers, GG.transpose() * Bs, sigma2, T);
        }
        D(l, p) = lag_expectation_from(powers, Bs, sigma2, T);
        for (Index j = 0; j < p; ++j)
            D(l, p + 1 + j) = lag_expectation_from(powers, w[j].transpose() * Bs, sigma2, T);
    }
    return -D / data.N();
}

Matrix efficient_vcov(const Matrix& D, const Matrix& omega, double N) {
    const Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) throw NumericalError("weighting matrix is not positive definite");
    const Matrix info = D.transpose() * llt.solve(D);
    return info.inverse() / N;
}

Matrix sandwich_vcov(const Matrix& D, const Matrix& weight, const Matrix& omega, double N) {
    const Matrix dw = D.transpose() * weight;
    const Matrix bread = (dw * D).inverse();
    return bread * (dw * omega * dw.transpose()) * bread.transpose() / N;
}

Vector standard_errors(Matrix& vcov) {
    vcov = 0.5 * (vcov + vcov.transpose()).eval();
    Vector se(vcov.rows());
    for (Index i = 0; i < vcov.rows(); ++i)
        se(i) = vcov(i, i) >= 0.0 ? std::sqrt(vcov(i, i)) : std::numeric_limits<double>::quiet_NaN();
    return se;
}

}  // namespace starch
