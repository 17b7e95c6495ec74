#include "starch/best_instruments.hpp"
#include "starch/covariance.hpp"
#include "starch/effects.hpp"
#include "starch/moments.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace starch;
using starch::testing::design_sample;
using starch::testing::ring_weights;

namespace {

Matrix demeaner(Index n) {
    Matrix J = Matrix::Identity(n, n);
    J.array() -= 1.0 / static_cast<double>(n);
    return J;
}

// Central moments of log X by trapezoid quadrature on w = log x, where
// log_density(w) is the log density of W = log X.
template <class F>
std::pair<double, double> log_moments(F log_density, double lo, double hi) {
    const int steps = 400000;
    const double h = (hi - lo) / steps;
    double m0 = 0, m1 = 0;
    for (int i = 0; i <= steps; ++i) {
        const double w = lo + i * h;
        const double f = std::exp(log_density(w)) * ((i == 0 || i == steps) ? 0.5 : 1.0);
        m0 += f;
        m1 += f * w;
    }
    const double mean = m1 / m0;
    double m2 = 0, m4 = 0;
    for (int i = 0; i <= steps; ++i) {
        const double w = lo + i * h;
        const double f = std::exp(log_density(w)) * ((i == 0 || i == steps) ? 0.5 : 1.0);
        const double d = w - mean;
        m2 += f * d * d;
        m4 += f * d * d * d * d;
    }
    return {m2 / m0, m4 / m0};
}

// log of the density of log(Z^2), Z standard normal.
double log_chi2_log_density(double w) {
    return 0.5 * w - 0.5 * std::exp(w) - 0.5 * std::log(2.0 * std::numbers::pi);
}

Vector theta_m1() {
    Vector v(5);
    v << 0.2, 0.2, -0.2, 0.5, 1.0;
    return v;
}

}  // namespace

TEST(DefaultMoments, CountsForFirstDesign) {
    const auto s = design_sample(Design::M1, 5, 6, 1);
    const MomentSet set = default_moments(s.data);
    EXPECT_EQ(set.kq(), 9);
    EXPECT_EQ(set.m(), 2);
    EXPECT_EQ(set.Q.size(), 5u);
}

TEST(DefaultMoments, SecondOrderLagBlockHasSevenColumns) {
    const auto s = design_sample(Design::M3, 5, 6, 1);
    Warnings w;
    const IvSet iv = default_iv(s.data, &w);
    int lag_cols = 0;
    for (const auto& l : iv.labels)
        if (l.find("x") == std::string::npos) ++lag_cols;
    EXPECT_EQ(lag_cols, 7);
    EXPECT_EQ(default_moments(s.data).m(), 4);
}

TEST(DefaultQuadratic, RingOfFourClosedForm) {
    const auto w = ring_weights(4);
    const auto P = default_quadratic(*w, true);
    ASSERT_EQ(P.size(), 2u);
    const Matrix expected = (*w)[0] + demeaner(4) / 3.0;
    EXPECT_LT((P[0] - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DefaultQuadratic, ProjectedTracesVanish) {
    const auto w = build_second_order_contiguity(5);
    const Matrix J = demeaner(25);
    for (const auto& P : default_quadratic(w, true)) EXPECT_NEAR((J * P * J).trace(), 0.0, 1e-12);
    for (const auto& P : default_quadratic(w, false)) EXPECT_NEAR(P.trace(), 0.0, 1e-12);
}

TEST(BestQuadratic, ProjectedTracesVanish) {
    const auto w = build_queen_contiguity(5);
    Theta th = Theta::zeros(ModelSpec{});
    th.rho << 0.3;
    const Operators ops = build_operators(w, th);
    const Matrix J = demeaner(25);
    for (double eta4 : {3.0, 7.0, 12.0}) {
        for (const auto& P : best_quadratic(ops.G, eta4, true)) EXPECT_NEAR((J * P * J).trace(), 0.0, 1e-12);
        for (const auto& P : best_quadratic(ops.G, eta4, false)) EXPECT_NEAR(P.trace(), 0.0, 1e-12);
    }
}

TEST(BestQuadratic, KurtosisWeightVanishesAtThree) {
    EXPECT_EQ(best_quadratic_weight(64, 3.0, false), 0.0);
    EXPECT_NEAR(best_quadratic_weight(64, 3.0, true), 0.0, 1e-15);
    EXPECT_LT(best_quadratic_weight(64, 7.0, true), 0.0);
}

TEST(MomentFunction, JacobianMatchesCentralDifferences) {
    const auto s = design_sample(Design::M1, 4, 5, 2);
    const MomentSet set = default_moments(s.data);
    const MomentFunction g(s.data, set);
    Rng rng(99);
    for (int rep = 0; rep < 10; ++rep) {
        Vector th(5);
        for (Index i = 0; i < 5; ++i) th(i) = 0.5 * rng.normal();
        const Matrix J = g.jacobian(th);
        Matrix num(J.rows(), J.cols());
        for (Index j = 0; j < 5; ++j) {
            const double h = 1e-5;
            Vector a = th, b = th;
            a(j) += h;
            b(j) -= h;
            num.col(j) = (g.value(a) - g.value(b)) / (2 * h);
        }
        const double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
        EXPECT_LT((J - num).cwiseAbs().maxCoeff() / scale, 1e-6);
    }
}

TEST(MomentFunction, CompiledMatchesDirectEvaluation) {
    for (Design d : {Design::M1, Design::M3}) {
        const auto s = design_sample(d, 5, 6, 4);
        const MomentSet set = default_moments(s.data);
        const MomentFunction g(s.data, set);
        Rng rng(5);
        for (int rep = 0; rep < 5; ++rep) {
            Vector th(s.data.spec.num_params());
            for (Index i = 0; i < th.size(); ++i) th(i) = 0.4 * rng.normal();
            const Vector direct = moment_vector(th, s.data, set);
            const Vector compiled = g.value(th);
            EXPECT_LT((direct - compiled).cwiseAbs().maxCoeff() / std::max(1.0, direct.cwiseAbs().maxCoeff()),
                      1e-10);
        }
    }
}

TEST(MomentFunction, QuadraticRowsCentredAtTruth) {
    // E[g(theta0)] = 0: average the moments over independent panels.
    const auto first = design_sample(Design::M1, 6, 8, 1);
    const MomentSet set = default_moments(first.data);
    Vector mean = Vector::Zero(set.m());
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        const auto s = design_sample(Design::M1, 6, 8, 1000 + r);
        const Vector g = moment_vector(theta_m1(), s.data, default_moments(s.data));
        mean += g.head(set.m()) / s.data.N();
    }
    mean /= reps;
    EXPECT_LT(mean.cwiseAbs().maxCoeff(), 0.15);
}

TEST(NoiseOracle, LogChiSquareMomentsByQuadrature) {
    const double pi = std::numbers::pi;
    const auto [var, m4] = log_moments(log_chi2_log_density, -60.0, 6.0);
    EXPECT_NEAR(var, pi * pi / 2.0, 1e-8);
    EXPECT_NEAR(m4 / (var * var), 7.0, 1e-6);
}

// At n=100, T=40 a single panel estimates sigma^2 with about 4% sampling
// error and mu4 with about 25%, so these checks average 20 independent
// panels of that size.
TEST(NoiseMoments, MatchLogChiSquareOnAverage) {
    const auto [var, m4] = log_moments(log_chi2_log_density, -60.0, 6.0);
    double s2 = 0.0, f4 = 0.0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
        const auto s = design_sample(Design::M1, 10, 40, 100 + r);
        const NoiseMoments nm = estimate_noise_moments(s.data, theta_m1());
        EXPECT_FALSE(nm.clamped);
        s2 += nm.sigma2 / reps;
        f4 += nm.mu4 / reps;
    }
    EXPECT_LT(std::abs(s2 - var) / var, 0.05);
    EXPECT_LT(std::abs(f4 - m4) / m4, 0.10);
}

TEST(NoiseMoments, StudentSigmaHatMatchesDirectSampling) {
    const Vector e = draw_errors(ErrorLaw::student_t(3.0), 10000000, 123);
    const Vector l = e.array().square().log().matrix();
    const double direct = (l.array() - l.mean()).square().mean();
    double s2 = 0.0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
        const auto s = design_sample(Design::M1, 10, 40, 200 + r, ErrorLaw::student_t(3.0));
        s2 += estimate_noise_moments(s.data, theta_m1()).sigma2 / reps;
    }
    EXPECT_LT(std::abs(s2 - direct) / direct, 0.05);
}

TEST(NoiseMoments, ZeroResidualsGiveZero) {
    EXPECT_EQ(sigma2_hat(Matrix::Zero(4, 3), true), 0.0);
    EXPECT_EQ(mu4_hat(Matrix::Zero(4, 3), 0.0, true), 0.0);
}

TEST(NoiseMoments, RademacherFourthMoment) {
    Rng rng(17);
    const Index n = 1000, T = 60;
    Matrix e(n, T);
    for (Index t = 0; t < T; ++t)
        for (Index i = 0; i < n; ++i) e(i, t) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    EXPECT_NEAR(mu4_hat(e, 1.0, false), 1.0, 0.03);
}

TEST(NoiseMoments, SigmaHatIsMeanSquareWithoutProjection) {
    Matrix v(2, 2);
    v << 1, 2, 3, 4;
    EXPECT_DOUBLE_EQ(sigma2_hat(v, false), 30.0 / 4.0);
}

TEST(OmegaHat, LinearOnlyEqualsScaledQpq) {
    const auto s = design_sample(Design::M1, 5, 6, 1);
    MomentSet set = default_moments(s.data);
    set.P.clear();
    set.p_labels.clear();
    const OmegaHat om = omega_hat(s.data, set, 2.0, 30.0);
    const MomentFunction g(s.data, set);
    EXPECT_LT((om.omega - 2.0 * g.qpq() / s.data.N()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(OmegaHat, SymmetricPositiveDefinite) {
    const auto s = design_sample(Design::M1, 6, 10, 1);
    const MomentSet set = default_moments(s.data);
    const OmegaHat om = omega_hat(s.data, set, 4.9, 170.0);
    EXPECT_LT((om.omega - om.omega.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(om.omega);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
    EXPECT_FALSE(om.ridged);
    // Cross blocks are zero.
    EXPECT_EQ(om.omega.topRightCorner(set.m(), set.kq()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Identification, DuplicatedColumnIsFlagged) {
    const auto s = design_sample(Design::M1, 5, 6, 1);
    const MomentSet set = default_moments(s.data);
    const FixedEffects fx = recover_effects(s.data, theta_m1());
    auto LZ = expected_regressors(s.data, theta_m1(), fx.alpha_star);
    const auto ok = identification_diagnostic(set.Q, LZ, true);
    EXPECT_FALSE(ok.flagged);
    EXPECT_GT(ok.min_singular_value, 0.0);
    for (auto& b : LZ) b.col(b.cols() - 1) = b.col(b.cols() - 2);
    const auto bad = identification_diagnostic(set.Q, LZ, true);
    EXPECT_TRUE(bad.flagged);
}

TEST(BestLagMeans, MatchesForecastRecursion) {
    const auto s = design_sample(Design::M1, 3, 8, 6);
    const EstimationData& d = s.data;
    const Vector th = theta_m1();
    Rng rng(3);
    Vector alpha(d.T());
    for (Index t = 0; t < alpha.size(); ++t) alpha(t) = rng.normal();

    BestInstrumentOptions exact;
    exact.truncation_tol = 0.0;
    const Matrix H = best_lag_means(d, th, alpha, exact);
    const Matrix Ht = best_lag_means(d, th, alpha);
    EXPECT_LT((H - Ht).cwiseAbs().maxCoeff(), 1e-10);

    // Conditional forecasts of Y*_tau..Y*_{T-1} from Y*_{tau-1}, rolled forward.
    const Theta tt = Theta::from_vector(d.spec, th);
    const Operators ops = build_operators(*d.weights, tt);
    const Matrix level = d.level_residuals(th);
    const Index n = d.n(), T = d.T();
    const Vector c = helmert_scales(T);
    for (Index tau = 1; tau < T; ++tau) {
        Vector mu = Vector::Zero(n);
        if (tau >= 2) {
            for (Index s2 = 1; s2 < tau; ++s2) mu += (level.col(s2 - 1).array() - alpha(s2 - 1)).matrix();
            mu /= static_cast<double>(tau - 1);
        }
        Vector yhat = d.ystar.col(tau - 1);
        Vector total = Vector::Zero(n);
        for (Index s2 = tau; s2 < T; ++s2) {
            Vector drift = mu + Vector::Constant(n, alpha(s2 - 1));
            for (int j = 0; j < d.spec.k; ++j) drift += tt.beta(j) * d.panel.x[static_cast<std::size_t>(j)].col(s2 - 1);
            yhat = ops.A * yhat + ops.S_inv * drift;
            total += yhat;
        }
        const Vector expected = c(tau - 1) * (d.ystar.col(tau - 1) - total / static_cast<double>(T - tau));
        EXPECT_LT((H.col(tau - 1) - expected).cwiseAbs().maxCoeff(), 1e-10) << "tau " << tau;
    }
}

TEST(BestInstruments, ProjectedBlocksInvariantToTimeEffects) {
    const auto s = design_sample(Design::M1, 4, 7, 2);
    const Vector th = theta_m1();
    FixedEffects fx = recover_effects(s.data, th);
    const MomentSet a = best_instruments(s.data, th, fx, 7.0);
    Rng rng(8);
    for (Index t = 0; t < fx.alpha.size(); ++t) fx.alpha(t) += 3.0 * rng.normal();
    fx.alpha_star = helmert(Matrix(fx.alpha.transpose())).transpose();
    const MomentSet b = best_instruments(s.data, th, fx, 7.0);
    ASSERT_EQ(a.kq(), b.kq());
    for (std::size_t t = 0; t < a.Q.size(); ++t)
        EXPECT_LT((s.data.pi(a.Q[t]) - s.data.pi(b.Q[t])).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(a.m(), 1);
}

namespace {

// n=6 ring, T=3 panel with k=0; only its shape matters for omega_hat.
EstimationData small_ring_data() {
    const auto w = ring_weights(6);
    ModelSpec spec;
    spec.k = 0;
    Panel panel;
    panel.y = Matrix::Constant(6, 4, 1.5);
    Rng rng(4);
    for (Index t = 0; t < 4; ++t)
        for (Index i = 0; i < 6; ++i) panel.y(i, t) += rng.uniform();
    return make_estimation_data(panel, w, spec);
}

}  // namespace

TEST(OmegaHat, QuadraticEntryMatchesBruteForceVariance) {
    const EstimationData d = small_ring_data();
    const Matrix J = demeaner(6);
    Matrix P = (*d.weights)[0] + (*d.weights)[0].transpose();
    const Matrix B = J * P * J;
    MomentSet set;
    set.P = {P};
    set.p_labels = {"P"};
    Rng qrng(2);
    for (Index t = 0; t < d.periods(); ++t) {
        Matrix q(6, 1);
        for (Index i = 0; i < 6; ++i) q(i, 0) = qrng.normal();
        set.Q.push_back(q);
    }
    set.q_labels = {"q"};

    const double sqrt3 = std::sqrt(3.0);
    struct Law {
        double sigma2, mu4;
        bool uniform;
    };
    for (const Law law : {Law{2.0, 12.0, false}, Law{1.0, 9.0 / 5.0, true}}) {
        const OmegaHat om = omega_hat(d, set, law.sigma2, law.mu4);
        if (!law.uniform) {
            const double closed = 2.0 * law.sigma2 * law.sigma2 * (B * B).trace() * d.periods() / d.N();
            EXPECT_NEAR(om.omega(0, 0), closed, 1e-12);
        }
        Rng rng(77);
        const int draws = 1000000;
        double s1 = 0.0, s2 = 0.0;
        Vector u(6);
        for (int r = 0; r < draws; ++r) {
            double g = 0.0;
            for (Index t = 0; t < d.periods(); ++t) {
                for (Index i = 0; i < 6; ++i)
                    u(i) = law.uniform ? sqrt3 * (2.0 * rng.uniform() - 1.0) : std::sqrt(law.sigma2) * rng.normal();
                g += u.dot(B * u);
            }
            s1 += g;
            s2 += g * g;
        }
        const double var = s2 / draws - (s1 / draws) * (s1 / draws);
        EXPECT_LT(std::abs(var / d.N() - om.omega(0, 0)) / om.omega(0, 0), 0.01);
    }
}

TEST(OmegaHat, LinearBlockMatchesSampleCovariance) {
    const EstimationData d = small_ring_data();
    const Matrix J = demeaner(6);
    MomentSet set;
    Rng qrng(9);
    for (Index t = 0; t < d.periods(); ++t) {
        Matrix q(6, 2);
        for (Index j = 0; j < 2; ++j)
            for (Index i = 0; i < 6; ++i) q(i, j) = qrng.normal();
        set.Q.push_back(q);
    }
    set.q_labels = {"a", "b"};
    const OmegaHat om = omega_hat(d, set, 1.0, 3.0);
    Rng rng(10);
    const int draws = 200000;
    Matrix acc = Matrix::Zero(2, 2);
    for (int r = 0; r < draws; ++r) {
        Vector g = Vector::Zero(2);
        for (Index t = 0; t < d.periods(); ++t) {
            Vector u(6);
            for (Index i = 0; i < 6; ++i) u(i) = rng.normal();
            g += set.Q[static_cast<std::size_t>(t)].transpose() * J * u;
        }
        acc += g * g.transpose();
    }
    acc /= draws * d.N();
    EXPECT_LT((acc - om.omega).cwiseAbs().maxCoeff() / om.omega.cwiseAbs().maxCoeff(), 0.02);
}

TEST(MomentFunction, MeanAtTruthWithinMonteCarloError) {
    // Large lattice: the average of g(theta0)/N over 100 panels is within
    // 5 Monte Carlo standard errors of zero in every component.
    const int reps = 100;
    std::vector<Vector> draws;
    for (int r = 0; r < reps; ++r) {
        const auto s = design_sample(Design::M1, 20, 20, 500 + r);
        draws.push_back(moment_vector(theta_m1(), s.data, default_moments(s.data)) / s.data.N());
    }
    const Index m = draws.front().size();
    Vector mean = Vector::Zero(m), sq = Vector::Zero(m);
    for (const auto& g : draws) {
        mean += g / reps;
        sq += g.cwiseProduct(g) / reps;
    }
    for (Index j = 0; j < m; ++j) {
        const double se = std::sqrt((sq(j) - mean(j) * mean(j)) / reps);
        EXPECT_LT(std::abs(mean(j)), 5.0 * se) << "moment " << j;
    }
}

TEST(MomentFunction, InvariantToPerPeriodScaleOfOutcomes) {
    const auto s = design_sample(Design::M1, 5, 6, 3);
    Panel scaled = s.sim.panel;
    Rng rng(12);
    for (Index t = 0; t < scaled.y.cols(); ++t) scaled.y.col(t) *= std::exp(rng.normal());
    const EstimationData d2 = make_estimation_data(scaled, s.config.weights, s.config.spec);
    const MomentSet set = default_moments(s.data);
    const MomentSet set2 = default_moments(d2);
    Rng trng(13);
    for (int rep = 0; rep < 3; ++rep) {
        Vector th(5);
        for (Index i = 0; i < 5; ++i) th(i) = 0.4 * trng.normal();
        const Vector a = moment_vector(th, s.data, set);
        const Vector b = moment_vector(th, d2, set2);
        EXPECT_LT((a - b).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff()), 1e-9);
    }
}

TEST(DefaultQuadratic, SecondOrderOrdering) {
    const auto w = build_second_order_contiguity(4);
    const auto P = default_quadratic(w, true);
    ASSERT_EQ(P.size(), 4u);
    const Matrix J = demeaner(16);
    const Matrix M1sq = w[0] * w[0];
    const Matrix expected = M1sq - ((M1sq * J).trace() / J.trace()) * J;
    EXPECT_LT((P[2] - expected).cwiseAbs().maxCoeff(), 1e-14);
    const Matrix expected1 = w[1] - ((w[1] * J).trace() / J.trace()) * J;
    EXPECT_LT((P[1] - expected1).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Identification, RandomFullRankInstrumentsAndFirstDesign) {
    const auto s = design_sample(Design::M1, 8, 20, 1);
    const MomentSet set = default_moments(s.data);
    const FixedEffects fx = recover_effects(s.data, theta_m1());
    const auto LZ = expected_regressors(s.data, theta_m1(), fx.alpha_star);
    EXPECT_FALSE(identification_diagnostic(set.Q, LZ, true).flagged);

    Rng rng(31);
    std::vector<Matrix> noise;
    for (const auto& b : LZ) {
        Matrix q(b.rows(), b.cols());
        for (Index j = 0; j < q.cols(); ++j)
            for (Index i = 0; i < q.rows(); ++i) q(i, j) = rng.normal();
        noise.push_back(q);
    }
    EXPECT_FALSE(identification_diagnostic(noise, LZ, true).flagged);
}
