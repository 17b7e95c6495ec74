#include "starch/estimation_data.hpp"

#include <cmath>

namespace starch {

void Panel::validate() const {
    if (y.rows() < 2) throw DataError("panel needs at least 2 units");
    if (y.cols() < 3) throw DataError("panel needs T >= 2 periods after Y_0");
    if (!y.allFinite()) throw DataError("panel outcomes contain non-finite values");
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j].rows() != y.rows() || x[j].cols() != y.cols() - 1)
            throw DataError("regressor " + std::to_string(j + 1) + " has shape " +
                            std::to_string(x[j].rows()) + "x" + std::to_string(x[j].cols()) +
                            ", expected " + std::to_string(y.rows()) + "x" +
                            std::to_string(y.cols() - 1));
        if (!x[j].allFinite())
            throw DataError("regressor " + std::to_string(j + 1) + " has non-finite values");
    }
}

Matrix EstimationData::pi(const Matrix& m) const {
    if (!project()) return m;
    return m.rowwise() - m.colwise().mean();
}

Vector EstimationData::pi(const Vector& v) const {
    if (!project()) return v;
    return v.array() - v.mean();
}

Matrix EstimationData::residuals(const Vector& theta) const {
    Matrix u(n(), periods());
    for (Index t = 0; t < periods(); ++t)
        u.col(t) = tp.ystar2.col(t) - R[static_cast<std::size_t>(t)] * theta;
    return u;
}

Matrix EstimationData::level_residuals(const Vector& theta) const {
    const Theta th = Theta::from_vector(spec, theta);
    const SpatialWeightSet& w = *weights;
    const Matrix S = spatial_filter(w, th.rho);
    const Matrix Gm = temporal_filter(w, th.gamma, th.delta);
    Matrix v = S * ystar.rightCols(T()) - Gm * ystar.leftCols(T());
    for (int j = 0; j < spec.k; ++j) v -= th.beta(j) * panel.x[static_cast<std::size_t>(j)];
    return v;
}

EstimationData make_estimation_data(const Panel& panel,
                                    std::shared_ptr<const SpatialWeightSet> weights,
                                    const ModelSpec& spec) {
    spec.validate();
    panel.validate();
    if (!weights) throw InvalidArgument("no spatial weights supplied");
    if (weights->n() != panel.n())
        throw DataError("weights have n=" + std::to_string(weights->n()) + " but panel has n=" +
                        std::to_string(panel.n()));
    if (weights->p() != spec.p)
        throw DataError("weights contain " + std::to_string(weights->p()) +
                        " matrices but spec has p=" + std::to_string(spec.p));
    if (panel.k() != spec.k)
        throw DataError("panel has " + std::to_string(panel.k()) + " regressors but spec has k=" +
                        std::to_string(spec.k));

    EstimationData d;
    d.spec = spec;
    d.weights = std::move(weights);
    d.panel = panel;
    d.ystar = log_square(panel.y, &d.warnings);
    d.tp = transform_panel(d.ystar, panel.x);

    const SpatialWeightSet& w = *d.weights;
    const int p = spec.p, k = spec.k;
    const Index K = spec.num_params();
    d.R.reserve(static_cast<std::size_t>(d.periods()));
    for (Index t = 0; t < d.periods(); ++t) {
        Matrix r(d.n(), K);
        const auto y2 = d.tp.ystar2.col(t);
        const auto yl = d.tp.ylag2.col(t);
        for (int l = 0; l < p; ++l) r.col(l) = w[l] * y2;
        r.col(p) = yl;
        for (int l = 0; l < p; ++l) r.col(p + 1 + l) = w[l] * yl;
        for (int j = 0; j < k; ++j) r.col(2 * p + 1 + j) = d.tp.xstar[static_cast<std::size_t>(j)].col(t);
        d.R.push_back(std::move(r));
    }
    return d;
}

}  // namespace starch
