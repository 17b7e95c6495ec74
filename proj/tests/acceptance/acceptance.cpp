// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "starch/best_instruments.hpp"
#include "starch/estimators.hpp"
#include "starch/moments.hpp"
#include "starch/montecarlo.hpp"
#include "starch/transforms.hpp"

#include "helmert_oracle.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

using namespace starch;

namespace {

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

ExperimentResult run_preset(const std::string& name, int replications = 200) {
    ExperimentConfig cfg = preset(name);
    cfg.replications = replications;
    cfg.workers = workers();
    return run_experiment(cfg);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

bool in_band(double v, double lo, double hi) { return v >= lo && v <= hi; }

Index index_of(const ExperimentResult& r, const std::string& label) {
    const auto it = std::find(r.labels.begin(), r.labels.end(), label);
    return static_cast<Index>(it - r.labels.begin());
}

struct Check {
    bool ok = true;
    std::vector<std::string> notes;

    void require(bool cond, const std::string& what) {
        ok = ok && cond;
        notes.push_back(what + (cond ? " ok" : " FAILED"));
    }
};

void report(int id, const Check& c, std::vector<bool>& verdicts) {
    std::cout << "criterion " << id << ": " << (c.ok ? "PASS" : "FAIL");
    for (std::size_t i = 0; i < c.notes.size(); ++i) std::cout << (i ? "; " : " (") << c.notes[i];
    std::cout << (c.notes.empty() ? "" : ")") << std::endl;
    verdicts.push_back(c.ok);
}

void require_healthy(Check& c, const ExperimentResult& r) {
    c.require(!r.unreliable, r.name + " failures " + std::to_string(r.failures) + "/" +
                                 std::to_string(r.replications));
}

// ---------------------------------------------------------------- oracle suite

Matrix demeaner(Index n) {
    Matrix J = Matrix::Identity(n, n);
    J.array() -= 1.0 / static_cast<double>(n);
    return J;
}

double helmert_error() {
    const Matrix F = starch::testing::helmert_oracle(6);
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        Matrix y(5, 6);
        for (Index j = 0; j < 6; ++j)
            for (Index i = 0; i < 5; ++i) y(i, j) = rng.normal();
        worst = std::max(worst, (helmert(y) - y * F.transpose()).cwiseAbs().maxCoeff());
    }
    return worst;
}

double quadratic_trace_error() {
    double worst = 0.0;
    auto check = [&](const std::vector<Matrix>& Ps, bool project) {
        for (const auto& P : Ps) {
            const double tr = project ? (demeaner(P.rows()) * P * demeaner(P.rows())).trace() : P.trace();
            worst = std::max(worst, std::abs(tr));
        }
    };
    for (int side : {5, 8}) {
        const SpatialWeightSet q = build_queen_contiguity(side);
        const SpatialWeightSet s = build_second_order_contiguity(side);
        for (bool project : {true, false}) {
            check(default_quadratic(q, project), project);
            check(default_quadratic(s, project), project);
        }
        Theta th1 = Theta::zeros(ModelSpec{});
        th1.rho << 0.2;
        ModelSpec spec2;
        spec2.p = 2;
        Theta th2 = Theta::zeros(spec2);
        th2.rho << 0.6, 0.2;
        const Operators o1 = build_operators(q, th1);
        const Operators o2 = build_operators(s, th2);
        for (double eta4 : {3.0, 7.0, 12.0})
            for (bool project : {true, false}) {
                check(best_quadratic(o1.G, eta4, project), project);
                check(best_quadratic(o2.G, eta4, project), project);
            }
    }
    return worst;
}

double jacobian_error() {
    double worst = 0.0;
    for (Design d : {Design::M1, Design::M3}) {
        const auto s = starch::testing::design_sample(d, 5, 6, 2);
        const MomentFunction g(s.data, default_moments(s.data));
        const Index K = s.data.spec.num_params();
        Rng rng(99);
        for (int rep = 0; rep < 10; ++rep) {
            Vector th(K);
            for (Index i = 0; i < K; ++i) th(i) = 0.3 * rng.normal();
            const Matrix J = g.jacobian(th);
            Matrix num(J.rows(), J.cols());
            for (Index j = 0; j < K; ++j) {
                const double h = 1e-5;
                Vector a = th, b = th;
                a(j) += h;
                b(j) -= h;
                num.col(j) = (g.value(a) - g.value(b)) / (2 * h);
            }
            worst = std::max(worst, (J - num).cwiseAbs().maxCoeff() / std::max(1.0, J.cwiseAbs().maxCoeff()));
        }
    }
    return worst;
}

double zero_noise_error() {
    double worst = 0.0;
    const auto w = std::make_shared<const SpatialWeightSet>(build_queen_contiguity(4));
    for (bool time_effects : {true, false}) {
        ModelSpec spec;
        spec.k = 2;
        spec.has_time_effects = time_effects;
        Theta th = Theta::zeros(spec);
        th.rho << 0.2;
        th.gamma = 0.2;
        th.delta << -0.2;
        th.beta << 0.5, 1.0;
        const auto z = starch::testing::zero_noise_panel(*w, spec, th, 6, 21);
        const EstimationData data = make_estimation_data(z.panel, w, spec);
        for (Stage s : {Stage::TwoSls, Stage::Initial, Stage::Optimal, Stage::Best})
            worst = std::max(worst, (estimate(data, s).theta - th.to_vector()).cwiseAbs().maxCoeff());
    }
    return worst;
}

// Pre-declared sample: replication 0 of the M1 large gaussian preset.
double sigma2_relative_error() {
    const ExperimentConfig cfg = preset("table-a1-gaussian-large");
    DgpConfig dgp;
    dgp.spec = cfg.spec;
    dgp.theta = cfg.theta0;
    dgp.weights = cfg.weights;
    dgp.T = cfg.T;
    dgp.burn_in = cfg.burn_in;
    dgp.errors = cfg.errors;
    dgp.seed = replication_seed(cfg.seed, 0);
    const SimulatedPanel sim = simulate(dgp);
    const EstimationData data = make_estimation_data(sim.panel, cfg.weights, cfg.spec);
    const GmmFit fit = estimate(data, Stage::Best);
    const double target = std::numbers::pi * std::numbers::pi / 2.0;
    return std::abs(fit.noise.sigma2 - target) / target;
}

bool deterministic_across_workers() {
    ExperimentConfig cfg = design_config(Design::M1, 6, 10, ErrorLaw::gaussian());
    cfg.replications = 8;
    bool same = true;
    std::vector<ExperimentResult> runs;
    for (int w : {1, 3, 8}) {
        cfg.workers = w;
        runs.push_back(run_experiment(cfg));
    }
    for (std::size_t k = 1; k < runs.size(); ++k) {
        for (std::size_t i = 0; i < runs[0].outcomes.size(); ++i) {
            same = same && runs[k].outcomes[i].ok == runs[0].outcomes[i].ok;
            same = same && runs[k].outcomes[i].theta == runs[0].outcomes[i].theta;
            same = same && runs[k].outcomes[i].se == runs[0].outcomes[i].se;
        }
        same = same && emit_table({runs[k]}, TableFormat::Csv) == emit_table({runs[0]}, TableFormat::Csv);
    }
    return same;
}

}  // namespace

int main() {
    std::vector<bool> verdicts;
    std::cout << "workers: " << workers() << std::endl;

    const ExperimentResult small = run_preset("table-a1-gaussian-small");
    {
        Check c;
        require_healthy(c, small);
        const Index r = index_of(small, "rho"), g = index_of(small, "gamma");
        c.require(in_band(small.mae(r), 0.08, 0.15), "MAE rho " + fmt(small.mae(r)) + " in [0.08, 0.15]");
        c.require(std::abs(small.bias(r)) < 0.02, "|bias rho| " + fmt(std::abs(small.bias(r))) + " < 0.02");
        c.require(in_band(small.mae(g), 0.018, 0.036), "MAE gamma " + fmt(small.mae(g)) + " in [0.018, 0.036]");
        report(1, c, verdicts);
    }

    {
        Check c;
        const ExperimentResult large = run_preset("table-a1-gaussian-large");
        require_healthy(c, large);
        const Index r = index_of(large, "rho");
        c.require(in_band(large.mae(r), 0.042, 0.080), "MAE rho " + fmt(large.mae(r)) + " in [0.042, 0.080]");
        for (std::size_t i = 0; i < large.labels.size(); ++i) {
            const auto k = static_cast<Index>(i);
            c.require(large.mae(k) < small.mae(k),
                      "MAE " + large.labels[i] + " " + fmt(large.mae(k)) + " < " + fmt(small.mae(k)));
        }
        report(2, c, verdicts);
    }

    {
        Check c;
        const ExperimentResult m3 = run_preset("table-a3-gaussian-small");
        require_healthy(c, m3);
        for (std::size_t i = 0; i < m3.labels.size(); ++i) {
            const double b = std::abs(m3.bias(static_cast<Index>(i)));
            c.require(b < 0.03, "|bias " + m3.labels[i] + "| " + fmt(b));
        }
        const Index g = index_of(m3, "gamma");
        c.require(in_band(m3.mae(g), 0.018, 0.036), "MAE gamma " + fmt(m3.mae(g)) + " in [0.018, 0.036]");
        report(3, c, verdicts);
    }

    {
        Check c;
        const ExperimentResult t3 = run_preset("table-a1-t3-small");
        require_healthy(c, t3);
        for (std::size_t i = 0; i < t3.labels.size(); ++i) {
            const auto k = static_cast<Index>(i);
            const double rel = std::abs(t3.mae(k) - small.mae(k)) / small.mae(k);
            c.require(rel <= 0.30, "MAE " + t3.labels[i] + " t3 " + fmt(t3.mae(k)) + " vs gaussian " +
                                       fmt(small.mae(k)) + " rel " + fmt(rel));
        }
        report(4, c, verdicts);
    }

    {
        Check c;
        const double h = helmert_error();
        c.require(h <= 1e-10, "helmert vs oracle " + sci(h));
        const double tr = quadratic_trace_error();
        c.require(tr <= 1e-10, "max |tr(JPJ)| " + sci(tr));
        const double jac = jacobian_error();
        c.require(jac <= 1e-6, "jacobian rel err " + sci(jac));
        const double zn = zero_noise_error();
        c.require(zn <= 1e-8, "zero-noise max err " + sci(zn));
        const double s2 = sigma2_relative_error();
        c.require(s2 <= 0.05, "sigma2 rel err " + fmt(s2));
        const double chat = std::max({std::abs(best_quadratic_weight(64, 3.0, true)),
                                      std::abs(best_quadratic_weight(100, 3.0, true)),
                                      std::abs(best_quadratic_weight(64, 3.0, false))});
        c.require(chat <= 1e-12, "c_hat at eta4=3 " + sci(chat));
        c.require(deterministic_across_workers(), "bit-exact across 1/3/8 workers");
        report(5, c, verdicts);
    }

    {
        Check c;
        ExperimentConfig cfg = preset("table-a1-gaussian-small");
        cfg.replications = 500;
        cfg.stage = Stage::Optimal;
        cfg.vcov = VcovForm::LargeT;
        cfg.workers = workers();
        const ExperimentResult cov = run_experiment(cfg);
        require_healthy(c, cov);
        for (std::size_t i = 0; i < cov.labels.size(); ++i) {
            const double v = cov.coverage(static_cast<Index>(i));
            c.require(in_band(v, 0.90, 0.99), "coverage " + cov.labels[i] + " " + fmt(v));
        }
        report(6, c, verdicts);
    }

    const auto failed = std::count(verdicts.begin(), verdicts.end(), false);
    std::cout << "acceptance: " << verdicts.size() - static_cast<std::size_t>(failed) << "/" << verdicts.size()
              << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
