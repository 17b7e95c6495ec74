#pragma once

#include "starch/weights.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace starch {

struct DiagnosticOptions {
    int lags = 0;                 ///< Ljung-Box lags; 0 picks max(1, min(10, periods/4))
    int permutations = 999;
    std::uint64_t seed = 20240101;
    double level = 0.05;
};

struct LocationAcf {
    Vector acf;           ///< lags 1..L
    double q_stat = 0.0;  ///< Ljung-Box statistic
    double p_value = 1.0;
};

struct PeriodMoran {
    double moran_i = 0.0;
    double p_value = 1.0;  ///< one-sided, positive autocorrelation
};

struct Diagnostics {
    int lags = 0;
    std::vector<LocationAcf> locations;
    std::vector<PeriodMoran> periods;
    double acf_rejection_rate = 0.0;    ///< share of locations with p < level
    double moran_rejection_rate = 0.0;  ///< share of periods with p < level
};

/// Sample autocorrelations of a series at lags 1..L.
Vector autocorrelation(const Vector& x, int lags);

/// Ljung-Box statistic and chi-square p-value for the first L autocorrelations.
std::pair<double, double> ljung_box(const Vector& x, int lags);

/// z'Wz / z'z on the demeaned vector z.
double morans_i(const Vector& u, const Matrix& w);

/// Moran's I with a seeded permutation p-value.
PeriodMoran moran_test(const Vector& u, const Matrix& w, int permutations, std::uint64_t seed);

/// Residual diagnostics for an n x periods residual matrix against M_1.
Diagnostics residual_diagnostics(const Matrix& residuals, const Matrix& w,
                                 const DiagnosticOptions& opts = {});

}  // namespace starch
