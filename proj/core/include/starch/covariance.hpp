#pragma once

#include "starch/moments.hpp"

namespace starch {

enum class VcovForm { Auto, LargeT, FiniteT };

/// Periods T-1 at or above which Auto selects the large-T form.
inline constexpr Index kLargeTThreshold = 50;

VcovForm resolve_vcov_form(VcovForm form, Index periods);
const char* vcov_form_name(VcovForm form);

/// C[l, r] = (T-1) tr(G_r' B_l^s), B_l = Pi P_l Pi.
Matrix quadratic_trace_matrix(const EstimationData& data, const std::vector<Matrix>& P,
                              const std::vector<Matrix>& G);

/**
 * Expected value of sum_t Y**lag_t' B U_t at theta with error variance sigma2,
 * from the moving-average form Y*_s = sum_h A^h S^{-1} u_{s-h} + (deterministic).
 */
double lag_expectation(const EstimationData& data, const Operators& ops, const Matrix& B,
                       double sigma2);

/// Large-T Jacobian of g/N: -(1/N) [sigma^2 C, 0; Q'Pi L, Q'Pi Z].
Matrix jacobian_large_t(const EstimationData& data, const MomentSet& set, const Vector& theta,
                        double sigma2, const Vector& alpha_star);

/// O(1/T) correction from the correlation of the transformed lag with U.
Matrix jacobian_finite_t_correction(const EstimationData& data, const MomentSet& set,
                                    const Vector& theta, double sigma2);

/// (D' Omega^{-1} D)^{-1} / N.
Matrix efficient_vcov(const Matrix& D, const Matrix& omega, double N);

/// (D'WD)^{-1} D'W Omega W D (D'WD)^{-1} / N.
Matrix sandwich_vcov(const Matrix& D, const Matrix& weight, const Matrix& omega, double N);

/// Symmetrizes and checks a covariance; returns standard errors (NaN when undefined).
Vector standard_errors(Matrix& vcov);

}  // namespace starch
