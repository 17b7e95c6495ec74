#include "starch/moments.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace starch {

namespace {

std::string wname(Index l, Index p) { return p == 1 ? "W" : "W" + std::to_string(l + 1); }

std::string pname(Index a, Index b, Index p) {
    return p == 1 ? "WW" : "W" + std::to_string(a + 1) + "W" + std::to_string(b + 1);
}

double trace_product(const Matrix& a, const Matrix& b) {
    // tr(a b)
    return a.cwiseProduct(b.transpose()).sum();
}

}  // namespace

IvSet default_iv(const EstimationData& data, Warnings* warnings) {
    const SpatialWeightSet& w = *data.weights;
    const Index p = w.p();
    const int k = data.spec.k;
    const std::vector<Matrix> prods = w.ordered_products();

    IvSet iv;
    iv.labels.emplace_back("ylag");
    for (Index l = 0; l < p; ++l) iv.labels.push_back(wname(l, p) + "*ylag");
    for (Index a = 0; a < p; ++a)
        for (Index b = 0; b < p; ++b) iv.labels.push_back(pname(a, b, p) + "*ylag");
    for (int j = 0; j < k; ++j) iv.labels.push_back("x" + std::to_string(j + 1));
    for (Index l = 0; l < p; ++l)
        for (int j = 0; j < k; ++j) iv.labels.push_back(wname(l, p) + "*x" + std::to_string(j + 1));
    for (Index a = 0; a < p; ++a)
        for (Index b = 0; b < p; ++b)
            for (int j = 0; j < k; ++j)
                iv.labels.push_back(pname(a, b, p) + "*x" + std::to_string(j + 1));

    const Index width = (1 + p + p * p) * (1 + k);
    for (Index t = 0; t < data.periods(); ++t) {
        Matrix q(data.n(), width);
        Index c = 0;
        const Vector ylag = data.ystar.col(t);
        q.col(c++) = ylag;
        for (Index l = 0; l < p; ++l) q.col(c++) = w[l] * ylag;
        for (const auto& m2 : prods) q.col(c++) = m2 * ylag;
        Matrix xs(data.n(), k);
        for (int j = 0; j < k; ++j) xs.col(j) = data.tp.xstar[static_cast<std::size_t>(j)].col(t);
        if (k > 0) {
            q.middleCols(c, k) = xs;
            c += k;
            for (Index l = 0; l < p; ++l) {
                q.middleCols(c, k) = w[l] * xs;
                c += k;
            }
            for (const auto& m2 : prods) {
                q.middleCols(c, k) = m2 * xs;
                c += k;
            }
        }
        iv.blocks.push_back(std::move(q));
    }
    prune_iv(data, iv, warnings);
    if (iv.blocks.front().cols() < data.spec.num_params())
        throw NumericalError("under-identified: only " + std::to_string(iv.blocks.front().cols()) +
                             " usable instruments for " +
                             std::to_string(data.spec.num_params()) + " parameters");
    return iv;
}

void prune_iv(const EstimationData& data, IvSet& iv, Warnings* warnings) {
    if (iv.blocks.empty()) return;
    const Index width = iv.blocks.front().cols();
    Matrix gram = Matrix::Zero(width, width);
    for (const auto& q : iv.blocks) {
        const Matrix pq = data.pi(q);
        gram.noalias() += pq.transpose() * pq;
    }
    std::vector<Index> keep;
    for (Index j = 0; j < width; ++j) {
        const std::string& name = j < static_cast<Index>(iv.labels.size()) ? iv.labels[j] : "?";
        const double var = gram(j, j) / data.N();
        if (!(var >= kMinIvVariance)) {
            if (warnings) warnings->push_back("dropped near-constant instrument column " + name);
            continue;
        }
        double resid = gram(j, j);
        if (!keep.empty()) {
            const Index nk = static_cast<Index>(keep.size());
            Matrix gkk(nk, nk);
            Vector gkj(nk);
            for (Index a = 0; a < nk; ++a) {
                gkj(a) = gram(keep[a], j);
                for (Index b = 0; b < nk; ++b) gkk(a, b) = gram(keep[a], keep[b]);
            }
            resid -= gkj.dot(gkk.ldlt().solve(gkj));
        }
        if (!(resid > 1e-10 * gram(j, j))) {
            if (warnings) warnings->push_back("dropped collinear instrument column " + name);
            continue;
        }
        keep.push_back(j);
    }
    if (static_cast<Index>(keep.size()) == width) return;
    std::vector<std::string> labels;
    for (Index j : keep)
        labels.push_back(j < static_cast<Index>(iv.labels.size()) ? iv.labels[j] : "?");
    for (auto& q : iv.blocks) {
        Matrix kept(q.rows(), static_cast<Index>(keep.size()));
        for (std::size_t c = 0; c < keep.size(); ++c) kept.col(static_cast<Index>(c)) = q.col(keep[c]);
        q = std::move(kept);
    }
    iv.labels = std::move(labels);
}

std::vector<Matrix> default_quadratic(const SpatialWeightSet& w, bool project) {
    const Index n = w.n();
    const double nd = static_cast<double>(n);
    auto centre = [&](const Matrix& m) -> Matrix {
        if (!project) return m - (m.trace() / nd) * Matrix::Identity(n, n);
        const double tr_mj = m.trace() - m.sum() / nd;
        Matrix j = Matrix::Identity(n, n);
        j.array() -= 1.0 / nd;
        return m - (tr_mj / (nd - 1.0)) * j;
    };
    std::vector<Matrix> out;
    for (Index l = 0; l < w.p(); ++l) out.push_back(centre(w[l]));
    for (Index l = 0; l < w.p(); ++l) out.push_back(centre(w[l] * w[l]));
    return out;
}

MomentSet default_moments(const EstimationData& data, Warnings* warnings) {
    IvSet iv = default_iv(data, warnings);
    MomentSet set;
    set.Q = std::move(iv.blocks);
    set.q_labels = std::move(iv.labels);
    set.P = default_quadratic(*data.weights, data.project());
    const Index p = data.weights->p();
    for (Index l = 0; l < p; ++l) set.p_labels.push_back(wname(l, p));
    for (Index l = 0; l < p; ++l) set.p_labels.push_back(wname(l, p) + "^2");
    set.kind = MomentKind::Default;
    return set;
}

MomentFunction::MomentFunction(const EstimationData& data, const MomentSet& set)
    : m_(set.m()), kq_(set.kq()), K_(data.spec.num_params()) {
    if (static_cast<Index>(set.Q.size()) != data.periods())
        throw InvalidArgument("moment set has " + std::to_string(set.Q.size()) +
                              " IV blocks for " + std::to_string(data.periods()) + " periods");
    a_ = Vector::Zero(m_);
    b_.assign(static_cast<std::size_t>(m_), Vector::Zero(K_));
    C_.assign(static_cast<std::size_t>(m_), Matrix::Zero(K_, K_));
    for (Index l = 0; l < m_; ++l) {
        const Matrix& P = set.P[static_cast<std::size_t>(l)];
        if (P.rows() != data.n() || P.cols() != data.n())
            throw InvalidArgument("quadratic matrix has wrong dimension");
        const Matrix B = data.pi(Matrix(data.pi(P).transpose())).transpose();
        auto& b = b_[static_cast<std::size_t>(l)];
        auto& C = C_[static_cast<std::size_t>(l)];
        for (Index t = 0; t < data.periods(); ++t) {
            const Matrix& R = data.R[static_cast<std::size_t>(t)];
            const auto y = data.tp.ystar2.col(t);
            const Vector By = B * y;
            const Matrix BR = B * R;
            a_(l) += y.dot(By);
            b.noalias() += R.transpose() * By + BR.transpose() * y;
            C.noalias() += R.transpose() * BR;
        }
        C = 0.5 * (C + C.transpose()).eval();
    }
    q_ = Vector::Zero(kq_);
    Wq_ = Matrix::Zero(kq_, K_);
    qpq_ = Matrix::Zero(kq_, kq_);
    for (Index t = 0; t < data.periods(); ++t) {
        const Matrix& Q = set.Q[static_cast<std::size_t>(t)];
        if (Q.rows() != data.n() || Q.cols() != kq_)
            throw InvalidArgument("IV block has wrong dimension");
        const Matrix pq = data.pi(Q);
        q_.noalias() += pq.transpose() * data.tp.ystar2.col(t);
        Wq_.noalias() += pq.transpose() * data.R[static_cast<std::size_t>(t)];
        qpq_.noalias() += pq.transpose() * pq;
    }
}

Vector MomentFunction::value(const Vector& theta) const {
    Vector g(size());
    for (Index l = 0; l < m_; ++l) {
        const auto s = static_cast<std::size_t>(l);
        g(l) = a_(l) - theta.dot(b_[s]) + theta.dot(C_[s] * theta);
    }
    g.tail(kq_) = q_ - Wq_ * theta;
    return g;
}

Matrix MomentFunction::jacobian(const Vector& theta) const {
    Matrix d(size(), K_);
    for (Index l = 0; l < m_; ++l) {
        const auto s = static_cast<std::size_t>(l);
        d.row(l) = (2.0 * (C_[s] * theta) - b_[s]).transpose();
    }
    d.bottomRows(kq_) = -Wq_;
    return d;
}

Vector moment_vector(const Vector& theta, const EstimationData& data, const MomentSet& set) {
    if (theta.size() != data.spec.num_params()) throw InvalidArgument("theta has wrong length");
    if (static_cast<Index>(set.Q.size()) != data.periods())
        throw InvalidArgument("moment set does not match the panel periods");
    const Theta th = Theta::from_vector(data.spec, theta);
    const SpatialWeightSet& w = *data.weights;
    const Matrix S = spatial_filter(w, th.rho);
    const Index p = data.spec.p;
    const int k = data.spec.k;

    Vector g = Vector::Zero(set.size());
    for (Index t = 0; t < data.periods(); ++t) {
        // U_t = S Y**_t - Z**_t eta, built without the stacked regressor block.
        Vector u = S * data.tp.ystar2.col(t) - th.gamma * data.tp.ylag2.col(t);
        for (Index l = 0; l < p; ++l) u -= th.delta(l) * (w[l] * data.tp.ylag2.col(t));
        for (int j = 0; j < k; ++j) u -= th.beta(j) * data.tp.xstar[static_cast<std::size_t>(j)].col(t);
        const Vector ju = data.pi(u);
        for (Index l = 0; l < set.m(); ++l)
            g(l) += ju.dot(data.pi(Vector(set.P[static_cast<std::size_t>(l)] * ju)));
        g.tail(set.kq()) += set.Q[static_cast<std::size_t>(t)].transpose() * ju;
    }
    return g;
}

double sigma2_hat(const Matrix& residuals, bool project) {
    if (residuals.size() == 0) return 0.0;
    const Matrix v = project ? Matrix(residuals.rowwise() - residuals.colwise().mean()) : residuals;
    return v.squaredNorm() / static_cast<double>(residuals.size());
}

double mu4_hat(const Matrix& level_residuals, double sigma2, bool project) {
    const Matrix d = first_difference(level_residuals);
    const Matrix v = project ? Matrix(d.rowwise() - d.colwise().mean()) : d;
    const double N = static_cast<double>(d.size());
    return v.array().pow(4).sum() / (2.0 * N) - 3.0 * sigma2 * sigma2;
}

NoiseMoments estimate_noise_moments(const EstimationData& data, const Vector& theta,
                                    Warnings* warnings) {
    NoiseMoments nm;
    nm.sigma2 = sigma2_hat(data.residuals(theta), data.project());
    if (!(nm.sigma2 > 0.0)) {
        nm.sigma2 = 0.0;
        nm.mu4 = 0.0;
        nm.eta4 = 3.0;
        if (warnings) warnings->push_back("residual variance is zero; kurtosis set to 3");
        return nm;
    }
    nm.mu4 = mu4_hat(data.level_residuals(theta), nm.sigma2, data.project());
    const double s4 = nm.sigma2 * nm.sigma2;
    nm.eta4 = nm.mu4 / s4;
    if (!(nm.eta4 >= kMinKurtosis)) {
        std::ostringstream msg;
        msg << "kurtosis estimate " << nm.eta4 << " below Jensen bound; clamped to "
            << kMinKurtosis;
        if (warnings) warnings->push_back(msg.str());
        nm.eta4 = kMinKurtosis;
        nm.mu4 = nm.eta4 * s4;
        nm.clamped = true;
    }
    return nm;
}

OmegaHat omega_hat(const EstimationData& data, const MomentSet& set, double sigma2, double mu4) {
    const Index m = set.m(), kq = set.kq();
    const double N = data.N();
    const double periods = static_cast<double>(data.periods());
    OmegaHat out;
    Matrix& om = out.omega;
    om = Matrix::Zero(m + kq, m + kq);

    std::vector<Matrix> B;
    B.reserve(static_cast<std::size_t>(m));
    for (const auto& P : set.P) B.push_back(data.pi(Matrix(data.pi(P).transpose())).transpose());
    const double s4 = sigma2 * sigma2;
    for (Index l = 0; l < m; ++l)
        for (Index j = l; j < m; ++j) {
            const Matrix& bl = B[static_cast<std::size_t>(l)];
            const Matrix& bj = B[static_cast<std::size_t>(j)];
            const double tr = trace_product(bl, bj) + bl.cwiseProduct(bj).sum();
            const double dd = bl.diagonal().dot(bj.diagonal());
            om(l, j) = om(j, l) = (s4 * tr + (mu4 - 3.0 * s4) * dd) * periods / N;
        }

    Matrix qpq = Matrix::Zero(kq, kq);
    for (const auto& Q : set.Q) {
        const Matrix pq = data.pi(Q);
        qpq.noalias() += pq.transpose() * pq;
    }
    om.bottomRightCorner(kq, kq) = sigma2 * qpq / N;

    Eigen::LLT<Matrix> llt(om);
    out.rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (!(out.rcond >= 1e-12)) {
        const double scale = om.diagonal().mean();
        const double ridge = scale > 0.0 ? 1e-8 * scale : 1e-8;
        om.diagonal().array() += ridge;
        out.ridged = true;
        Eigen::LLT<Matrix> again(om);
        out.rcond = again.info() == Eigen::Success ? again.rcond() : 0.0;
        if (!(out.rcond > 1e-300))
            throw NumericalError("weighting matrix is not invertible after ridge");
    }
    return out;
}

std::vector<Matrix> expected_regressors(const EstimationData& data, const Vector& theta,
                                        const Vector& alpha_star) {
    const Theta th = Theta::from_vector(data.spec, theta);
    const Operators ops = build_operators(*data.weights, th);
    const Index p = data.spec.p;
    const Index K = data.spec.num_params();
    const Vector eta = th.eta();
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(data.periods()));
    for (Index t = 0; t < data.periods(); ++t) {
        const Matrix& R = data.R[static_cast<std::size_t>(t)];
        Vector mean = R.rightCols(K - p) * eta;
        if (alpha_star.size() > 0) mean.array() += alpha_star(t);
        Matrix lz(data.n(), K);
        for (Index r = 0; r < p; ++r) lz.col(r) = ops.G[static_cast<std::size_t>(r)] * mean;
        lz.rightCols(K - p) = R.rightCols(K - p);
        out.push_back(std::move(lz));
    }
    return out;
}

IdentificationReport identification_diagnostic(const std::vector<Matrix>& Q,
                                               const std::vector<Matrix>& LZ, bool project) {
    if (Q.size() != LZ.size() || Q.empty())
        throw InvalidArgument("identification_diagnostic: block count mismatch");
    Matrix cross = Matrix::Zero(Q.front().cols(), LZ.front().cols());
    double N = 0.0;
    for (std::size_t t = 0; t < Q.size(); ++t) {
        Matrix pq = Q[t];
        if (project) pq = pq.rowwise() - pq.colwise().mean();
        cross.noalias() += pq.transpose() * LZ[t];
        N += static_cast<double>(Q[t].rows());
    }
    cross /= N;
    Eigen::JacobiSVD<Matrix> svd(cross);
    const Vector sv = svd.singularValues();
    IdentificationReport rep;
    rep.min_singular_value = sv.size() ? sv(sv.size() - 1) : 0.0;
    rep.condition_number = rep.min_singular_value > 0.0
                               ? sv(0) / rep.min_singular_value
                               : std::numeric_limits<double>::infinity();
    rep.flagged = !(rep.condition_number <= kIdentificationConditionLimit);
    return rep;
}

}  // namespace starch
