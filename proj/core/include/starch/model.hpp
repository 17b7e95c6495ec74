#pragma once

#include "starch/weights.hpp"

#include <string>
#include <vector>

namespace starch {

/// Structural shape of the log-volatility equation.
struct ModelSpec {
    int p = 1;                      ///< spatial-lag order
    int k = 0;                      ///< number of exogenous regressors
    bool has_time_effects = true;   ///< alpha_t present
    bool has_unit_effects = true;   ///< mu_i present

    /// Length of theta = (rho', gamma, delta', beta')'.
    int num_params() const noexcept { return 2 * p + 1 + k; }
    /// Length of eta = (gamma, delta', beta')'.
    int num_eta() const noexcept { return p + 1 + k; }

    void validate() const;
};

/**
 * Parameter vector. The flattened ordering theta = (rho', gamma, delta', beta')'
 * is fixed here and followed by every vector and covariance matrix downstream.
 */
struct Theta {
    Vector rho;
    double gamma = 0.0;
    Vector delta;
    Vector beta;

    static Theta zeros(const ModelSpec& spec);
    static Theta from_vector(const ModelSpec& spec, const Vector& theta);

    Vector to_vector() const;
    /// eta = (gamma, delta', beta')'.
    Vector eta() const;
    int p() const noexcept { return static_cast<int>(rho.size()); }
    int k() const noexcept { return static_cast<int>(beta.size()); }

    void validate(const ModelSpec& spec) const;
};

/// Row labels matching the theta ordering ("rho", "gamma", "delta", "beta_0", ...).
std::vector<std::string> parameter_labels(const ModelSpec& spec);

/// Reduced-form operators evaluated at one theta.
struct Operators {
    Matrix S;               ///< I - sum_l rho_l M_l
    Matrix S_inv;
    Matrix A;               ///< S^{-1}(gamma I + sum_l delta_l M_l)
    std::vector<Matrix> G;  ///< G_r = M_r S^{-1}
    double rcond = 0.0;     ///< reciprocal condition estimate of S
};

/// Reciprocal-condition threshold below which S(rho) is rejected.
inline constexpr double kMinReciprocalCondition = 1e-10;

/// S(rho) = I - sum_l rho_l M_l.
Matrix spatial_filter(const SpatialWeightSet& w, const Vector& rho);

/// gamma I + sum_l delta_l M_l.
Matrix temporal_filter(const SpatialWeightSet& w, double gamma, const Vector& delta);

/// Materializes S, S^{-1}, A and G_r. Throws StationarityError when S is singular.
Operators build_operators(const SpatialWeightSet& w, const Theta& theta);

struct StationarityReport {
    bool condition_i = true;   ///< sum|rho_l| * max||M_l|| < 1
    bool condition_ii = true;  ///< (|gamma| + sum|delta_l| max||M_l||) / (1 - tau_1) < 1
    double tau1 = 0.0;
    double bound_ii = 0.0;

    bool ok() const noexcept { return condition_i && condition_ii; }
    std::string describe() const;
};

/**
 * Sufficient (row-sum norm) conditions for invertibility of S and summability
 * of A^h. For row-normalized weights these reduce to sum|rho| < 1 and
 * sum|rho| + |gamma| + sum|delta| < 1. Pure predicate: never throws for
 * well-formed inputs.
 */
StationarityReport check_stationarity(const ModelSpec& spec, const Theta& theta,
                                      const SpatialWeightSet& w);

}  // namespace starch
