#include "starch/best_instruments.hpp"

namespace starch {

double best_quadratic_weight(Index n, double eta4, bool project) {
    if (!project) return 2.0 / (eta4 - 1.0) - 1.0;
    const double nd = static_cast<double>(n);
    const double r = nd / (nd - 2.0);
    return r * r * (1.0 / (r + 0.5 * (eta4 - 3.0)) - (nd - 2.0) / nd);
}

std::vector<Matrix> best_quadratic(const std::vector<Matrix>& G, double eta4, bool project) {
    std::vector<Matrix> out;
    for (const auto& g : G) {
        const Index n = g.rows();
        const double nd = static_cast<double>(n);
        const double c = best_quadratic_weight(n, eta4, project);
        const Matrix I = Matrix::Identity(n, n);
        if (!project) {
            const double tr = g.trace();
            Matrix p = g - (tr / nd) * I;
            Matrix d = g.diagonal().asDiagonal();
            p += c * (d - (tr / nd) * I);
            out.push_back(std::move(p));
            continue;
        }
        Matrix J = I;
        J.array() -= 1.0 / nd;
        const double tr_gj = g.trace() - g.sum() / nd;
        const Matrix jgj = J * g * J;
        Matrix p = g - (tr_gj / (nd - 1.0)) * J;
        Matrix d = jgj.diagonal().asDiagonal();
        p += c * (d - (tr_gj / nd) * I);
        out.push_back(std::move(p));
    }
    return out;
}

Matrix best_lag_means(const EstimationData& data, const Vector& theta, const Vector& alpha,
                      const BestInstrumentOptions& opts) {
    const Theta th = Theta::from_vector(data.spec, theta);
    const Operators ops = build_operators(*data.weights, th);
    const Index n = data.n(), T = data.T();
    if (alpha.size() != T) throw InvalidArgument("time effects must have length T");
    const Matrix I = Matrix::Identity(n, n);

    // ps[m] = sum_{h=0}^{m} A^h for m = 0..T-1.
    std::vector<Matrix> ps(static_cast<std::size_t>(T));
    Matrix power = I;
    bool negligible = false;
    ps[0] = I;
    for (Index m = 1; m < T; ++m) {
        if (!negligible) {
            power = power * ops.A;
            if (opts.truncation_tol > 0.0 &&
                power.cwiseAbs().rowwise().sum().maxCoeff() < opts.truncation_tol)
                negligible = true;
        }
        ps[static_cast<std::size_t>(m)] = negligible ? ps[static_cast<std::size_t>(m - 1)]
                                                     : Matrix(ps[static_cast<std::size_t>(m - 1)] + power);
    }

    // w_r = S^{-1}(X_r beta + alpha_r 1), r = 1..T-1.
    std::vector<Vector> w(static_cast<std::size_t>(T));
    for (Index r = 1; r < T; ++r) {
        Vector v = Vector::Constant(n, alpha(r - 1));
        for (int j = 0; j < data.spec.k; ++j)
            v += th.beta(j) * data.panel.x[static_cast<std::size_t>(j)].col(r - 1);
        w[static_cast<std::size_t>(r)] = ops.S_inv * v;
    }

    const Matrix level = data.level_residuals(theta);
    const Vector c = data.tp.c;
    Matrix H(n, T - 1);
    Vector F = Vector::Zero(n);
    Matrix sum_ps = Matrix::Zero(n, n);
    for (Index tau = T - 1; tau >= 1; --tau) {
        const auto idx = static_cast<std::size_t>(T - tau - 1);
        F += ps[idx] * w[static_cast<std::size_t>(tau)];
        sum_ps += ps[idx];
        const double inv = 1.0 / static_cast<double>(T - tau);
        Vector h = data.ystar.col(tau - 1) -
                   inv * ((ps[static_cast<std::size_t>(T - tau)] - I) * data.ystar.col(tau - 1));
        h -= inv * F;
        if (tau >= 2) {
            Vector mu_tilde = Vector::Zero(n);
            for (Index s = 1; s < tau; ++s) mu_tilde += (level.col(s - 1).array() - alpha(s - 1)).matrix();
            mu_tilde /= static_cast<double>(tau - 1);
            h -= inv * (sum_ps * (ops.S_inv * mu_tilde));
        }
        H.col(tau - 1) = c(tau - 1) * h;
    }
    return H;
}

MomentSet best_instruments(const EstimationData& data, const Vector& theta,
                           const FixedEffects& effects, double eta4, Warnings* warnings,
                           const BestInstrumentOptions& opts) {
    const Theta th = Theta::from_vector(data.spec, theta);
    const Operators ops = build_operators(*data.weights, th);
    const SpatialWeightSet& w = *data.weights;
    const Index p = data.spec.p;
    const int k = data.spec.k;
    const Vector eta = th.eta();

    const Matrix H = best_lag_means(data, theta, effects.alpha, opts);

    IvSet iv;
    for (Index r = 0; r < p; ++r) iv.labels.push_back("G" + std::to_string(r + 1) + "*mean");
    iv.labels.emplace_back("H");
    for (Index l = 0; l < p; ++l) iv.labels.push_back("W" + std::to_string(l + 1) + "*H");
    for (int j = 0; j < k; ++j) iv.labels.push_back("x" + std::to_string(j + 1));

    const Index kz = 1 + p + k;
    for (Index t = 0; t < data.periods(); ++t) {
        Matrix K(data.n(), kz);
        K.col(0) = H.col(t);
        for (Index l = 0; l < p; ++l) K.col(1 + l) = w[l] * H.col(t);
        for (int j = 0; j < k; ++j) K.col(1 + p + j) = data.tp.xstar[static_cast<std::size_t>(j)].col(t);
        Vector mean = K * eta;
        if (effects.alpha_star.size() > 0) mean.array() += effects.alpha_star(t);
        Matrix q(data.n(), p + kz);
        for (Index r = 0; r < p; ++r) q.col(r) = ops.G[static_cast<std::size_t>(r)] * mean;
        q.rightCols(kz) = K;
        iv.blocks.push_back(std::move(q));
    }
    prune_iv(data, iv, warnings);
    if (iv.blocks.front().cols() < data.spec.num_params())
        throw NumericalError("best instruments are rank deficient");

    MomentSet set;
    set.Q = std::move(iv.blocks);
    set.q_labels = std::move(iv.labels);
    set.P = best_quadratic(ops.G, eta4, data.project());
    for (Index r = 0; r < p; ++r) set.p_labels.push_back("P*" + std::to_string(r + 1));
    set.kind = MomentKind::Best;
    return set;
}

}  // namespace starch
