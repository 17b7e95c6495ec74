#include "starch/estimators.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace starch {

namespace {

Matrix nan_matrix(Index k) {
    return Matrix::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
}

StageRecord record_of(const GmmFit& fit, bool converged, int iterations, double grad,
                      const std::string& start) {
    StageRecord r;
    r.stage = fit.stage;
    r.converged = converged;
    r.iterations = iterations;
    r.objective = fit.objective;
    r.grad_norm = grad;
    r.start = start;
    r.theta = fit.theta;
    return r;
}

// Fills the fields every stage shares once theta is known.
void finish_fit(const EstimationData& data, GmmFit& fit, const std::vector<Matrix>& Q) {
    fit.spec = data.spec;
    fit.theta_hat = Theta::from_vector(data.spec, fit.theta);
    fit.labels = parameter_labels(data.spec);
    fit.stationarity = check_stationarity(data.spec, fit.theta_hat, *data.weights);
    if (!fit.stationarity.ok())
        fit.warnings.push_back("estimate outside the sufficient stationarity region: " +
                               fit.stationarity.describe());
    const FixedEffects fx = recover_effects(data, fit.theta);
    fit.alpha_hat = fx.alpha;
    fit.mu_hat = fx.mu;
    try {
        fit.identification =
            identification_diagnostic(Q, expected_regressors(data, fit.theta, fx.alpha_star),
                                      data.project());
        if (fit.identification.flagged)
            fit.warnings.push_back("weak identification: condition number " +
                                   std::to_string(fit.identification.condition_number));
    } catch (const StationarityError& e) {
        fit.warnings.push_back(std::string("identification diagnostic skipped: ") + e.what());
    }
    fit.se = standard_errors(fit.vcov);
}

std::vector<std::pair<std::string, Vector>> ladder_starts(const GmmFit& initial) {
    std::vector<std::pair<std::string, Vector>> starts;
    starts.emplace_back("initial", initial.theta);
    for (const auto& rec : initial.ladder)
        if (rec.stage == Stage::TwoSls) starts.emplace_back("2sls", rec.theta);
    starts.emplace_back("zero", Vector::Zero(initial.theta.size()));
    return starts;
}

// Spectral radius of A(theta); infinity when S(rho) cannot be inverted.
double lag_spectral_radius(const EstimationData& data, const Vector& theta) {
    try {
        const Operators ops = build_operators(*data.weights, Theta::from_vector(data.spec, theta));
        return Eigen::EigenSolver<Matrix>(ops.A, false).eigenvalues().cwiseAbs().maxCoeff();
    } catch (const StationarityError&) {
        return std::numeric_limits<double>::infinity();
    }
}

Matrix gmm_jacobian(const EstimationData& data, const MomentSet& set, const Vector& theta,
                    double sigma2, VcovForm form) {
    const FixedEffects fx = recover_effects(data, theta);
    Matrix D = jacobian_large_t(data, set, theta, sigma2, fx.alpha_star);
    if (form == VcovForm::FiniteT) D += jacobian_finite_t_correction(data, set, theta, sigma2);
    return D;
}

}  // namespace

const char* stage_name(Stage stage) {
    switch (stage) {
        case Stage::TwoSls: return "2sls";
        case Stage::Initial: return "initial";
        case Stage::Optimal: return "optimal";
        case Stage::Best: return "best";
    }
    return "?";
}

Stage parse_stage(const std::string& text) {
    if (text == "2sls") return Stage::TwoSls;
    if (text == "initial") return Stage::Initial;
    if (text == "optimal") return Stage::Optimal;
    if (text == "best") return Stage::Best;
    throw InvalidArgument("unknown stage '" + text + "' (expected 2sls, initial, optimal or best)");
}

GmmFit fit_2sls(const EstimationData& data, const EstimatorOptions& opts, const IvSet* iv_in) {
    GmmFit fit;
    fit.stage = Stage::TwoSls;
    IvSet iv_local;
    if (!iv_in) iv_local = default_iv(data, &fit.warnings);
    const IvSet& iv = iv_in ? *iv_in : iv_local;

    MomentSet set;
    set.Q = iv.blocks;
    set.q_labels = iv.labels;
    const MomentFunction mf(data, set);
    const Index p = data.spec.p, K = data.spec.num_params();
    const Eigen::LLT<Matrix> qq(mf.qpq());
    if (qq.info() != Eigen::Success || !(qq.rcond() > 1e-14))
        throw NumericalError("singular Q'JQ: instruments are under-identifying");

    Index first = 0;
    Vector q = mf.qpy();
    if (opts.fixed_rho) {
        if (opts.fixed_rho->size() != p) throw InvalidArgument("fixed_rho has wrong length");
        q -= mf.qpr().leftCols(p) * *opts.fixed_rho;
        first = p;
    }
    const Matrix B = mf.qpr().rightCols(K - first);
    const Matrix AiB = qq.solve(B);
    const Matrix xmx = B.transpose() * AiB;
    const Eigen::LDLT<Matrix> solver(xmx);
    if (solver.info() != Eigen::Success || !(solver.rcond() > 1e-14))
        throw NumericalError("2SLS normal equations are singular");
    const Vector free = solver.solve(AiB.transpose() * q);

    fit.theta = Vector::Zero(K);
    if (opts.fixed_rho) fit.theta.head(p) = *opts.fixed_rho;
    fit.theta.tail(K - first) = free;

    const Vector gq = mf.qpy() - mf.qpr() * fit.theta;
    fit.moments = gq / data.N();
    fit.objective = gq.dot(qq.solve(gq)) / data.N();
    fit.kq = mf.kq();
    fit.noise = estimate_noise_moments(data, fit.theta, &fit.warnings);

    fit.vcov = nan_matrix(K);
    if (fit.noise.sigma2 > 0.0) {
        try {
            const FixedEffects fx = recover_effects(data, fit.theta);
            const std::vector<Matrix> lz = expected_regressors(data, fit.theta, fx.alpha_star);
            Matrix cross = Matrix::Zero(mf.kq(), K);
            for (Index t = 0; t < data.periods(); ++t)
                cross.noalias() += data.pi(set.Q[static_cast<std::size_t>(t)]).transpose() *
                                   lz[static_cast<std::size_t>(t)];
            const Matrix cf = cross.rightCols(K - first);
            const Matrix v = fit.noise.sigma2 * (cf.transpose() * qq.solve(cf)).inverse();
            fit.vcov = Matrix::Zero(K, K);
            fit.vcov.bottomRightCorner(K - first, K - first) = v;
        } catch (const NumericalError& e) {
            fit.warnings.push_back(std::string("2SLS covariance unavailable: ") + e.what());
        }
    } else {
        fit.warnings.push_back("zero residual variance; covariance undefined");
    }
    fit.vcov_form = VcovForm::LargeT;
    finish_fit(data, fit, set.Q);
    fit.ladder.push_back(record_of(fit, true, 0, 0.0, "closed form"));
    return fit;
}

GmmFit fit_gmm_with(const EstimationData& data, const MomentSet& set, const Matrix& omega,
                    const std::vector<std::pair<std::string, Vector>>& starts,
                    const OptimizerOptions& opts, Stage stage) {
    const MomentFunction mf(data, set);
    const double N = data.N();
    const Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) throw NumericalError("weighting matrix is not positive definite");
    const Matrix L = llt.matrixL();

    const ResidualFn fn = [&](const Vector& x, Vector& r, Matrix* jac) {
        r = L.triangularView<Eigen::Lower>().solve(mf.value(x) / N);
        if (jac) *jac = L.triangularView<Eigen::Lower>().solve(mf.jacobian(x) / N);
    };

    OptimResult best;
    best.objective = std::numeric_limits<double>::infinity();
    std::string best_start;
    bool any_converged = false;
    for (const auto& [name, x0] : starts) {
        if (!x0.allFinite()) continue;
        OptimResult res = levenberg_marquardt(fn, x0, opts);
        const bool better = res.converged && (!any_converged || res.objective < best.objective);
        const bool fallback = !any_converged && !res.converged && res.objective < best.objective;
        if (better || fallback) {
            any_converged = any_converged || res.converged;
            best = std::move(res);
            best_start = name;
        }
    }
    if (!any_converged) {
        std::ostringstream msg;
        msg << stage_name(stage) << " GMM did not converge (gradient norm " << best.grad_norm
            << ", " << best.reason << ")";
        throw ConvergenceError(msg.str(), best.x, best.grad_norm);
    }

    GmmFit fit;
    fit.stage = stage;
    fit.theta = best.x;
    fit.objective = best.objective;
    fit.moments = mf.value(best.x) / N;
    fit.kq = mf.kq();
    fit.m = mf.m();
    fit.ladder.push_back(record_of(fit, best.converged, best.iterations, best.grad_norm, best_start));
    return fit;
}

GmmFit fit_initial_gmm(const EstimationData& data, const EstimatorOptions& opts) {
    EstimatorOptions plain = opts;
    plain.fixed_rho.reset();
    const GmmFit tsls = fit_2sls(data, plain);
    Warnings warnings;
    const MomentSet set = default_moments(data, &warnings);
    const Index K = data.spec.num_params();
    const Matrix identity = Matrix::Identity(set.size(), set.size());
    GmmFit fit = fit_gmm_with(data, set, identity,
                              {{"2sls", tsls.theta}, {"zero", Vector::Zero(K)}}, opts.optimizer,
                              Stage::Initial);
    fit.warnings = std::move(warnings);
    fit.noise = estimate_noise_moments(data, fit.theta, &fit.warnings);
    fit.vcov_form = resolve_vcov_form(opts.vcov, data.periods());
    fit.vcov = nan_matrix(K);
    if (fit.noise.sigma2 > 0.0) {
        const OmegaHat om = omega_hat(data, set, fit.noise.sigma2, fit.noise.mu4);
        fit.omega_rcond = om.rcond;
        fit.omega_ridged = om.ridged;
        const Matrix D = gmm_jacobian(data, set, fit.theta, fit.noise.sigma2, fit.vcov_form);
        fit.vcov = sandwich_vcov(D, identity, om.omega, data.N());
    } else {
        fit.warnings.push_back("zero residual variance; covariance undefined");
    }
    finish_fit(data, fit, set.Q);
    fit.ladder.insert(fit.ladder.begin(), tsls.ladder.begin(), tsls.ladder.end());
    return fit;
}

GmmFit fit_optimal_gmm(const EstimationData& data, const GmmFit& initial,
                       const EstimatorOptions& opts) {
    Warnings warnings;
    const MomentSet set = default_moments(data, &warnings);
    const NoiseMoments& nm = initial.noise;
    const OmegaHat om = omega_hat(data, set, nm.sigma2, nm.mu4);
    GmmFit fit = fit_gmm_with(data, set, om.omega, ladder_starts(initial), opts.optimizer,
                              Stage::Optimal);
    fit.warnings = std::move(warnings);
    if (om.ridged) fit.warnings.push_back("ridge added to the weighting matrix");
    fit.omega_rcond = om.rcond;
    fit.omega_ridged = om.ridged;
    fit.noise = estimate_noise_moments(data, fit.theta, &fit.warnings);
    fit.vcov_form = resolve_vcov_form(opts.vcov, data.periods());
    const Index K = data.spec.num_params();
    fit.vcov = nan_matrix(K);
    if (nm.sigma2 > 0.0) {
        const Matrix D = gmm_jacobian(data, set, fit.theta, nm.sigma2, fit.vcov_form);
        fit.vcov = efficient_vcov(D, om.omega, data.N());
    } else {
        fit.warnings.push_back("zero residual variance; covariance undefined");
    }
    finish_fit(data, fit, set.Q);
    fit.ladder.insert(fit.ladder.begin(), initial.ladder.begin(), initial.ladder.end());
    return fit;
}

GmmFit fit_best_gmm(const EstimationData& data, const GmmFit& initial,
                    const EstimatorOptions& opts) {
    Warnings warnings;
    // The conditional lag means sum powers of A, so the preliminary estimate
    // must have a summable A. An explosive initial estimate is replaced by 2SLS.
    Vector prelim = initial.theta;
    NoiseMoments nm = initial.noise;
    if (!(lag_spectral_radius(data, prelim) < 1.0)) {
        for (const auto& rec : initial.ladder) {
            if (rec.stage != Stage::TwoSls || !(lag_spectral_radius(data, rec.theta) < 1.0)) continue;
            std::ostringstream msg;
            msg << "initial estimate has an explosive lag operator (spectral radius "
                << lag_spectral_radius(data, prelim) << "); best instruments built from 2SLS";
            warnings.push_back(msg.str());
            prelim = rec.theta;
            nm = estimate_noise_moments(data, prelim, &warnings);
            break;
        }
    }
    const FixedEffects fx0 = recover_effects(data, prelim);
    const MomentSet set = best_instruments(data, prelim, fx0, nm.eta4, &warnings, opts.best);
    const OmegaHat om = omega_hat(data, set, nm.sigma2, nm.mu4);
    GmmFit fit = fit_gmm_with(data, set, om.omega, ladder_starts(initial), opts.optimizer,
                              Stage::Best);
    fit.warnings = std::move(warnings);
    if (om.ridged) fit.warnings.push_back("ridge added to the weighting matrix");
    fit.omega_rcond = om.rcond;
    fit.omega_ridged = om.ridged;
    fit.noise = estimate_noise_moments(data, fit.theta, &fit.warnings);
    fit.vcov_form = VcovForm::LargeT;
    const Index K = data.spec.num_params(), p = data.spec.p;
    fit.vcov = nan_matrix(K);
    if (nm.sigma2 > 0.0) {
        try {
            const Theta th = Theta::from_vector(data.spec, fit.theta);
            const Operators ops = build_operators(*data.weights, th);
            const FixedEffects fx = recover_effects(data, fit.theta);
            const std::vector<Matrix> lz = expected_regressors(data, fit.theta, fx.alpha_star);
            const double N = data.N();
            Matrix sigma = Matrix::Zero(K, K);
            sigma.topLeftCorner(p, p) = quadratic_trace_matrix(data, set.P, ops.G) / N;
            for (const auto& block : lz) {
                const Matrix pb = data.pi(block);
                sigma.noalias() += pb.transpose() * pb / (N * nm.sigma2);
            }
            sigma = 0.5 * (sigma + sigma.transpose()).eval();
            fit.vcov = sigma.inverse() / N;
        } catch (const NumericalError& e) {
            fit.warnings.push_back(std::string("best GMM covariance unavailable: ") + e.what());
        }
    } else {
        fit.warnings.push_back("zero residual variance; covariance undefined");
    }
    finish_fit(data, fit, set.Q);
    fit.ladder.insert(fit.ladder.begin(), initial.ladder.begin(), initial.ladder.end());
    return fit;
}

GmmFit estimate(const EstimationData& data, Stage target, const EstimatorOptions& opts) {
    GmmFit fit;
    if (target == Stage::TwoSls) {
        fit = fit_2sls(data, opts);
    } else {
        const GmmFit initial = fit_initial_gmm(data, opts);
        if (target == Stage::Initial)
            fit = initial;
        else if (target == Stage::Optimal)
            fit = fit_optimal_gmm(data, initial, opts);
        else
            fit = fit_best_gmm(data, initial, opts);
    }
    fit.warnings.insert(fit.warnings.begin(), data.warnings.begin(), data.warnings.end());
    if (opts.compute_diagnostics)
        fit.diagnostics = residual_diagnostics(fitted_residuals(data, fit), (*data.weights)[0],
                                               opts.diagnostic_options);
    return fit;
}

Matrix fitted_residuals(const EstimationData& data, const GmmFit& fit) {
    return data.pi(data.residuals(fit.theta));
}

}  // namespace starch
