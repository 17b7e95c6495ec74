#include "starch/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace starch {

OptimResult levenberg_marquardt(const ResidualFn& fn, const Vector& x0,
                                const OptimizerOptions& opts) {
    OptimResult res;
    Vector x = x0;
    Vector r;
    Matrix jac;
    fn(x, r, &jac);
    if (!r.allFinite() || !jac.allFinite()) {
        res.x = x;
        res.objective = std::numeric_limits<double>::infinity();
        res.grad_norm = std::numeric_limits<double>::infinity();
        res.reason = "non-finite residual at start";
        return res;
    }
    double f = r.squaredNorm();
    Matrix A = jac.transpose() * jac;
    Vector g = jac.transpose() * r;
    double mu = opts.initial_damping * std::max(A.diagonal().maxCoeff(), 1e-300);
    double nu = 2.0;

    auto finish = [&](bool ok, const char* why, int iters) {
        res.x = x;
        res.objective = f;
        res.grad_norm = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
        res.iterations = iters;
        res.converged = ok;
        res.reason = why;
        return res;
    };

    for (int it = 0; it < opts.max_iter; ++it) {
        if (g.size() == 0 || g.cwiseAbs().maxCoeff() < opts.grad_tol)
            return finish(true, "gradient tolerance", it);
        Matrix damped = A;
        damped.diagonal().array() += mu;
        const Vector h = damped.ldlt().solve(-g);
        if (!h.allFinite()) {
            mu *= nu;
            nu *= 2.0;
            continue;
        }
        if (h.norm() <= opts.step_tol * (x.norm() + opts.step_tol))
            return finish(true, "step tolerance", it);

        const Vector xn = x + h;
        Vector rn;
        Matrix jn;
        fn(xn, rn, &jn);
        const double fn_val = rn.allFinite() ? rn.squaredNorm() : std::numeric_limits<double>::infinity();
        // Predicted reduction of r'r under the linear model.
        const double pred = h.dot(mu * h - g);
        const double gain = pred > 0.0 ? (f - fn_val) / pred : -1.0;
        if (gain > 0.0 && std::isfinite(fn_val) && jn.allFinite()) {
            x = xn;
            r = std::move(rn);
            jac = std::move(jn);
            f = fn_val;
            A = jac.transpose() * jac;
            g = jac.transpose() * r;
            mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * gain - 1.0, 3));
            nu = 2.0;
        } else {
            mu *= nu;
            nu *= 2.0;
            if (!std::isfinite(mu) || mu > 1e300) return finish(false, "damping overflow", it + 1);
        }
    }
    return finish(false, "iteration cap", opts.max_iter);
}

}  // namespace starch
