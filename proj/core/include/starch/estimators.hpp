#pragma once

#include "starch/best_instruments.hpp"
#include "starch/covariance.hpp"
#include "starch/diagnostics.hpp"
#include "starch/optimizer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace starch {

enum class Stage { TwoSls, Initial, Optimal, Best };

const char* stage_name(Stage stage);
/// Parses "2sls", "initial", "optimal" or "best".
Stage parse_stage(const std::string& text);

struct StageRecord {
    Stage stage = Stage::TwoSls;
    bool converged = true;
    int iterations = 0;
    double objective = 0.0;
    double grad_norm = 0.0;
    std::string start;  ///< which starting point won
    Vector theta;
};

struct GmmFit {
    ModelSpec spec;
    Theta theta_hat;
    Vector theta;              ///< flattened theta_hat
    Matrix vcov;
    Vector se;
    double objective = 0.0;    ///< weighted objective at the estimate (g scaled by 1/N)
    Stage stage = Stage::TwoSls;
    VcovForm vcov_form = VcovForm::LargeT;
    Vector moments;            ///< g(theta_hat) / N
    double omega_rcond = 0.0;
    bool omega_ridged = false;
    NoiseMoments noise;        ///< sigma^2 and mu_4 from this fit's residuals
    Vector alpha_hat;
    Vector mu_hat;
    Index kq = 0;
    Index m = 0;
    IdentificationReport identification;
    StationarityReport stationarity;
    std::vector<StageRecord> ladder;
    std::vector<std::string> labels;
    std::optional<Diagnostics> diagnostics;
    Warnings warnings;
};

struct EstimatorOptions {
    VcovForm vcov = VcovForm::Auto;
    OptimizerOptions optimizer;
    BestInstrumentOptions best;
    /// When set, the spatial coefficients are held at these values (2SLS only).
    std::optional<Vector> fixed_rho;
    bool compute_diagnostics = false;
    DiagnosticOptions diagnostic_options;
};

/// Closed-form 2SLS with the default instruments (or the given IV blocks).
GmmFit fit_2sls(const EstimationData& data, const EstimatorOptions& opts = {},
                const IvSet* iv = nullptr);

/// Minimizes g'g with the default moments, multistart {2SLS, 0}.
GmmFit fit_initial_gmm(const EstimationData& data, const EstimatorOptions& opts = {});

/// Minimizes g' Omega^{-1} g with the default moments, Omega from `initial`.
GmmFit fit_optimal_gmm(const EstimationData& data, const GmmFit& initial,
                       const EstimatorOptions& opts = {});

/// Feasible best GMM built from a preliminary (initial) fit.
GmmFit fit_best_gmm(const EstimationData& data, const GmmFit& initial,
                    const EstimatorOptions& opts = {});

/// Generic weighted GMM with an arbitrary moment set (used by the stages above).
GmmFit fit_gmm_with(const EstimationData& data, const MomentSet& set, const Matrix& omega,
                    const std::vector<std::pair<std::string, Vector>>& starts,
                    const OptimizerOptions& opts, Stage stage);

/// Runs the stage ladder 2sls -> initial -> optimal/best up to `target`.
GmmFit estimate(const EstimationData& data, Stage target, const EstimatorOptions& opts = {});

/// Transformed residuals Pi U_t(theta_hat), n x (T-1).
Matrix fitted_residuals(const EstimationData& data, const GmmFit& fit);

}  // namespace starch
