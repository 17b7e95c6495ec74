#include "starch/dgp.hpp"

#include "starch/rng.hpp"

#include <cmath>
#include <sstream>
#include <random>

namespace starch {

namespace {

constexpr std::uint64_t kEffectsStream = 1;
constexpr std::uint64_t kShockStream = 2;
constexpr std::uint64_t kBurnInStream = 3;
constexpr std::uint64_t kScaleStream = 4;

// Student t draws reuse the normal sequence of the gaussian law and take their
// chi-square scale from a side stream, so both laws share common random numbers.
class ErrorSampler {
public:
    ErrorSampler(Rng& base, const ErrorLaw& law, std::uint64_t seed)
        : base_(base), law_(law), scale_(derive_seed(seed, kScaleStream)) {}

    double operator()() {
        const double z = base_.normal();
        if (law_.dist == ErrorDist::Gaussian) return z;
        const double v = 2.0 * std::gamma_distribution<double>(0.5 * law_.df, 1.0)(scale_.engine());
        return z / std::sqrt(v / law_.df);
    }

private:
    Rng& base_;
    ErrorLaw law_;
    Rng scale_;
};

void check_law(const ErrorLaw& law) {
    if (law.dist == ErrorDist::StudentT && !(law.df > 2.0))
        throw InvalidArgument("student t errors require df > 2");
}

struct Period {
    Vector eps;
    double alpha = 0.0;
    std::vector<Vector> x;
};

}  // namespace

std::string ErrorLaw::name() const {
    if (dist == ErrorDist::Gaussian) return "gaussian";
    std::ostringstream os;
    os << "t" << df;
    return os.str();
}

ErrorLaw parse_error_law(const std::string& text) {
    if (text == "gaussian" || text == "normal") return ErrorLaw::gaussian();
    if (text == "t3") return ErrorLaw::student_t(3.0);
    const std::string prefix = "student_t:";
    if (text.rfind(prefix, 0) == 0) {
        try {
            std::size_t pos = 0;
            const std::string rest = text.substr(prefix.size());
            const double df = std::stod(rest, &pos);
            if (pos == rest.size()) {
                ErrorLaw law = ErrorLaw::student_t(df);
                check_law(law);
                return law;
            }
        } catch (const std::logic_error&) {
        }
    }
    throw InvalidArgument("unknown error distribution '" + text +
                          "' (expected gaussian, t3 or student_t:<df>)");
}

void DgpConfig::validate() const {
    spec.validate();
    theta.validate(spec);
    if (!weights) throw InvalidArgument("dgp config has no spatial weights");
    if (weights->p() != spec.p) throw InvalidArgument("weight set order differs from spec p");
    if (T < 2) throw InvalidArgument("T must be >= 2");
    if (burn_in < 0) throw InvalidArgument("burn_in must be >= 0");
    check_law(errors);
}

Vector draw_errors(const ErrorLaw& law, Index n, std::uint64_t seed) {
    check_law(law);
    Rng rng(seed);
    ErrorSampler draw(rng, law, seed);
    Vector e(n);
    for (Index i = 0; i < n; ++i) e(i) = draw();
    return e;
}

SimulatedPanel simulate(const DgpConfig& cfg) {
    cfg.validate();
    const SpatialWeightSet& w = *cfg.weights;
    const Index n = w.n();
    const Index T = cfg.T;
    const int k = cfg.spec.k;

    SimulatedPanel out;
    const StationarityReport st = check_stationarity(cfg.spec, cfg.theta, w);
    if (!st.ok()) out.warnings.push_back("sufficient stationarity condition " + st.describe());

    const Operators ops = build_operators(w, cfg.theta);
    const Matrix gamma_m = temporal_filter(w, cfg.theta.gamma, cfg.theta.delta);
    Eigen::PartialPivLU<Matrix> lu(ops.S);

    Rng effects(derive_seed(cfg.seed, kEffectsStream));
    out.mu = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) out.mu(i) = effects.normal();
    out.alpha = Vector::Zero(T);
    for (Index t = 0; t < T; ++t) out.alpha(t) = effects.normal();
    if (!(cfg.spec.has_unit_effects && cfg.draw_unit_effects)) out.mu.setZero();
    const bool time_fx = cfg.spec.has_time_effects && cfg.draw_time_effects;
    if (!time_fx) out.alpha.setZero();
    out.panel.x.assign(static_cast<std::size_t>(k), Matrix(n, T));
    for (int j = 0; j < k; ++j)
        for (Index t = 0; t < T; ++t)
            for (Index i = 0; i < n; ++i) out.panel.x[j](i, t) = effects.normal();

    // Burn-in periods 0, -1, ..., -(B-1), drawn backwards in time.
    const int B = cfg.burn_in;
    std::vector<Period> burn(static_cast<std::size_t>(std::max(B, 1)));
    Rng history(derive_seed(cfg.seed, kBurnInStream));
    ErrorSampler burn_draw(history, cfg.errors, derive_seed(cfg.seed, kBurnInStream));
    for (auto& per : burn) {
        per.eps.resize(n);
        for (Index i = 0; i < n; ++i) per.eps(i) = burn_draw();
        per.alpha = history.normal();
        per.x.resize(static_cast<std::size_t>(k));
        for (auto& xv : per.x) {
            xv.resize(n);
            for (Index i = 0; i < n; ++i) xv(i) = history.normal();
        }
        if (!time_fx) per.alpha = 0.0;
    }

    out.ystar = Matrix::Zero(n, T + 1);
    out.eps = Matrix::Zero(n, T + 1);
    out.h = Matrix::Zero(n, T);

    auto step = [&](const Vector& prev, const Vector& eps, double alpha,
                    const std::vector<Vector>& x, long period) {
        Vector rhs = gamma_m * prev + out.mu + eps.array().square().log().matrix();
        rhs.array() += alpha;
        for (int j = 0; j < k; ++j) rhs += cfg.theta.beta(j) * x[static_cast<std::size_t>(j)];
        Vector next = lu.solve(rhs);
        for (Index i = 0; i < n; ++i) {
            if (!(std::abs(next(i)) <= kMaxLogSquare)) {
                std::ostringstream msg;
                msg << "simulated log-squared outcome diverged at unit " << i << ", period "
                    << period << " (value " << next(i) << ")";
                throw DivergenceError(msg.str(), static_cast<long>(i), period);
            }
        }
        return next;
    };

    Vector state = Vector::Zero(n);
    for (int b = B - 1; b >= 0; --b) {
        const Period& per = burn[static_cast<std::size_t>(b)];
        state = step(state, per.eps, per.alpha, per.x, -static_cast<long>(b));
    }
    out.ystar.col(0) = state;
    out.eps.col(0) = burn.front().eps;

    Rng shocks(derive_seed(cfg.seed, kShockStream));
    ErrorSampler shock_draw(shocks, cfg.errors, derive_seed(cfg.seed, kShockStream));
    std::vector<Vector> xt(static_cast<std::size_t>(k));
    for (Index t = 1; t <= T; ++t) {
        Vector eps(n);
        for (Index i = 0; i < n; ++i) eps(i) = shock_draw();
        for (int j = 0; j < k; ++j) xt[static_cast<std::size_t>(j)] = out.panel.x[j].col(t - 1);
        state = step(state, eps, out.alpha(t - 1), xt, static_cast<long>(t));
        out.ystar.col(t) = state;
        out.eps.col(t) = eps;
        out.h.col(t - 1) =
            (state.array() - eps.array().square().log()).exp().matrix();
    }

    out.panel.y.resize(n, T + 1);
    for (Index t = 0; t <= T; ++t)
        for (Index i = 0; i < n; ++i) {
            const double mag = std::exp(0.5 * out.ystar(i, t));
            out.panel.y(i, t) = out.eps(i, t) < 0.0 ? -mag : mag;
        }
    return out;
}

}  // namespace starch
