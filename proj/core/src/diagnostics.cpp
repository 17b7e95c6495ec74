#include "starch/diagnostics.hpp"

#include "starch/rng.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <numeric>
#include <tuple>

namespace starch {

Vector autocorrelation(const Vector& x, int lags) {
    const Index n = x.size();
    if (lags < 1 || lags >= n) throw InvalidArgument("autocorrelation: lags must be in [1, n-1]");
    const Vector z = x.array() - x.mean();
    const double c0 = z.squaredNorm();
    Vector r = Vector::Zero(lags);
    if (c0 <= 0.0) return r;
    for (int h = 1; h <= lags; ++h) r(h - 1) = z.head(n - h).dot(z.tail(n - h)) / c0;
    return r;
}

std::pair<double, double> ljung_box(const Vector& x, int lags) {
    const Vector r = autocorrelation(x, lags);
    const double n = static_cast<double>(x.size());
    double q = 0.0;
    for (int h = 1; h <= lags; ++h) q += r(h - 1) * r(h - 1) / (n - h);
    q *= n * (n + 2.0);
    const boost::math::chi_squared chi(static_cast<double>(lags));
    return {q, boost::math::cdf(boost::math::complement(chi, q))};
}

double morans_i(const Vector& u, const Matrix& w) {
    const Vector z = u.array() - u.mean();
    const double denom = z.squaredNorm();
    if (denom <= 0.0) return 0.0;
    return z.dot(w * z) / denom;
}

PeriodMoran moran_test(const Vector& u, const Matrix& w, int permutations, std::uint64_t seed) {
    PeriodMoran out;
    out.moran_i = morans_i(u, w);
    if (permutations <= 0) return out;
    Rng rng(seed);
    std::vector<Index> idx(static_cast<std::size_t>(u.size()));
    std::iota(idx.begin(), idx.end(), 0);
    Vector shuffled(u.size());
    int extreme = 0;
    for (int b = 0; b < permutations; ++b) {
        std::shuffle(idx.begin(), idx.end(), rng.engine());
        for (Index i = 0; i < u.size(); ++i) shuffled(i) = u(idx[static_cast<std::size_t>(i)]);
        if (morans_i(shuffled, w) >= out.moran_i - 1e-12) ++extreme;
    }
    out.p_value = (1.0 + extreme) / (1.0 + permutations);
    return out;
}

Diagnostics residual_diagnostics(const Matrix& residuals, const Matrix& w,
                                 const DiagnosticOptions& opts) {
    const Index n = residuals.rows(), periods = residuals.cols();
    if (w.rows() != n || w.cols() != n) throw InvalidArgument("weights do not match residual rows");
    if (periods < 3) throw InvalidArgument("residual diagnostics need at least 3 periods");
    Diagnostics d;
    d.lags = opts.lags > 0 ? opts.lags
                           : static_cast<int>(std::max<Index>(1, std::min<Index>(10, periods / 4)));
    d.lags = static_cast<int>(std::min<Index>(d.lags, periods - 1));
    int rejected = 0;
    for (Index i = 0; i < n; ++i) {
        LocationAcf loc;
        const Vector series = residuals.row(i).transpose();
        loc.acf = autocorrelation(series, d.lags);
        std::tie(loc.q_stat, loc.p_value) = ljung_box(series, d.lags);
        if (loc.p_value < opts.level) ++rejected;
        d.locations.push_back(std::move(loc));
    }
    d.acf_rejection_rate = static_cast<double>(rejected) / static_cast<double>(n);
    rejected = 0;
    for (Index t = 0; t < periods; ++t) {
        PeriodMoran pm = moran_test(residuals.col(t), w, opts.permutations,
                                    derive_seed(opts.seed, static_cast<std::uint64_t>(t)));
        if (pm.p_value < opts.level) ++rejected;
        d.periods.push_back(pm);
    }
    d.moran_rejection_rate = static_cast<double>(rejected) / static_cast<double>(periods);
    return d;
}

}  // namespace starch
