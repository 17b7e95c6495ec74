#include "starch/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace starch {

void ModelSpec::validate() const {
    if (p < 1) throw InvalidArgument("model spec: p must be >= 1");
    if (k < 0) throw InvalidArgument("model spec: k must be >= 0");
}

Theta Theta::zeros(const ModelSpec& spec) {
    Theta t;
    t.rho = Vector::Zero(spec.p);
    t.delta = Vector::Zero(spec.p);
    t.beta = Vector::Zero(spec.k);
    return t;
}

Theta Theta::from_vector(const ModelSpec& spec, const Vector& theta) {
    if (theta.size() != spec.num_params())
        throw InvalidArgument("theta has length " + std::to_string(theta.size()) + ", expected " +
                              std::to_string(spec.num_params()));
    Theta t;
    t.rho = theta.head(spec.p);
    t.gamma = theta(spec.p);
    t.delta = theta.segment(spec.p + 1, spec.p);
    t.beta = theta.tail(spec.k);
    return t;
}

Vector Theta::to_vector() const {
    Vector v(rho.size() + 1 + delta.size() + beta.size());
    v << rho, gamma, delta, beta;
    return v;
}

Vector Theta::eta() const {
    Vector v(1 + delta.size() + beta.size());
    v << gamma, delta, beta;
    return v;
}

void Theta::validate(const ModelSpec& spec) const {
    if (rho.size() != spec.p || delta.size() != spec.p || beta.size() != spec.k)
        throw InvalidArgument("theta dimensions do not match model spec");
    if (!to_vector().allFinite()) throw InvalidArgument("theta has non-finite entries");
}

std::vector<std::string> parameter_labels(const ModelSpec& spec) {
    std::vector<std::string> out;
    auto indexed = [&](const std::string& base, int l) {
        return spec.p == 1 ? base : base + "_" + std::to_string(l + 1);
    };
    for (int l = 0; l < spec.p; ++l) out.push_back(indexed("rho", l));
    out.emplace_back("gamma");
    for (int l = 0; l < spec.p; ++l) out.push_back(indexed("delta", l));
    for (int j = 0; j < spec.k; ++j) out.push_back("beta_" + std::to_string(j));
    return out;
}

Matrix spatial_filter(const SpatialWeightSet& w, const Vector& rho) {
    Matrix s = Matrix::Identity(w.n(), w.n());
    for (Index l = 0; l < w.p(); ++l) s.noalias() -= rho(l) * w[l];
    return s;
}

Matrix temporal_filter(const SpatialWeightSet& w, double gamma, const Vector& delta) {
    Matrix b = gamma * Matrix::Identity(w.n(), w.n());
    for (Index l = 0; l < w.p(); ++l) b.noalias() += delta(l) * w[l];
    return b;
}

Operators build_operators(const SpatialWeightSet& w, const Theta& theta) {
    if (theta.rho.size() != w.p() || theta.delta.size() != w.p())
        throw InvalidArgument("theta spatial order does not match weight set");
    Operators ops;
    ops.S = spatial_filter(w, theta.rho);
    Eigen::PartialPivLU<Matrix> lu(ops.S);
    ops.rcond = lu.rcond();
    if (!(ops.rcond >= kMinReciprocalCondition)) {
        std::ostringstream msg;
        msg << "stationarity violation: S(rho) is singular or ill-conditioned (rcond=" << ops.rcond
            << ")";
        throw StationarityError(msg.str());
    }
    ops.S_inv = lu.inverse();
    ops.A = ops.S_inv * temporal_filter(w, theta.gamma, theta.delta);
    ops.G.reserve(static_cast<std::size_t>(w.p()));
    for (Index l = 0; l < w.p(); ++l) ops.G.emplace_back(w[l] * ops.S_inv);
    return ops;
}

std::string StationarityReport::describe() const {
    std::ostringstream os;
    if (ok()) {
        os << "ok";
    } else {
        os << "violated:";
        if (!condition_i) os << " condition (i) tau1=" << tau1 << " >= 1;";
        if (!condition_ii) os << " condition (ii) bound=" << bound_ii << " >= 1";
    }
    return os.str();
}

StationarityReport check_stationarity(const ModelSpec& spec, const Theta& theta,
                                      const SpatialWeightSet& w) {
    theta.validate(spec);
    const double norm = w.max_row_sum_norm();
    StationarityReport r;
    r.tau1 = theta.rho.cwiseAbs().sum() * norm;
    r.condition_i = r.tau1 < 1.0;
    const double numer = std::abs(theta.gamma) + theta.delta.cwiseAbs().sum() * norm;
    if (r.condition_i) {
        r.bound_ii = numer / (1.0 - r.tau1);
        r.condition_ii = r.bound_ii < 1.0;
    } else {
        r.bound_ii = std::numeric_limits<double>::infinity();
        r.condition_ii = false;
    }
    return r;
}

}  // namespace starch
