#pragma once

#include "starch/model.hpp"
#include "starch/panel.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace starch {

enum class ErrorDist { Gaussian, StudentT };

struct ErrorLaw {
    ErrorDist dist = ErrorDist::Gaussian;
    double df = 3.0;  ///< only used for StudentT

    static ErrorLaw gaussian() { return {}; }
    static ErrorLaw student_t(double df) { return {ErrorDist::StudentT, df}; }
    std::string name() const;
};

/// Parses "gaussian", "t3" or "student_t:<df>".
ErrorLaw parse_error_law(const std::string& text);

struct DgpConfig {
    ModelSpec spec;
    Theta theta;
    std::shared_ptr<const SpatialWeightSet> weights;
    Index T = 20;
    int burn_in = 200;
    ErrorLaw errors;
    std::uint64_t seed = 0;
    /// Fixed effects are drawn N(0,1) when the spec includes them; these
    /// switches allow zeroing them for controlled experiments.
    bool draw_unit_effects = true;
    bool draw_time_effects = true;

    void validate() const;
};

struct SimulatedPanel {
    Panel panel;    ///< y and x
    Matrix h;       ///< n x T latent volatilities, periods 1..T
    Matrix ystar;   ///< n x (T+1) log-squared outcomes
    Matrix eps;     ///< n x (T+1) raw errors, column 0 is the last burn-in draw
    Vector mu;      ///< unit effects
    Vector alpha;   ///< time effects, periods 1..T
    Warnings warnings;
};

/**
 * Simulates the log-volatility recursion one linear solve per period.
 *
 * Seed streams: 1 draws mu, alpha and X for periods 1..T; 2 draws the errors
 * of periods 1..T; 3 draws burn-in periods backwards from period 0, so a
 * longer burn-in only prepends history and leaves Y*_0 essentially unchanged.
 * Student t errors reuse the gaussian normals of the same seed (paired designs).
 * Throws DivergenceError when |Y*| exceeds 700.
 */
SimulatedPanel simulate(const DgpConfig& config);

/// n i.i.d. draws of the error law. t errors are not rescaled.
Vector draw_errors(const ErrorLaw& law, Index n, std::uint64_t seed);

inline constexpr double kMaxLogSquare = 700.0;

}  // namespace starch
