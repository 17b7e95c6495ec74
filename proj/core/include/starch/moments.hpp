#pragma once

#include "starch/estimation_data.hpp"

#include <string>
#include <vector>

namespace starch {

enum class MomentKind { Default, Best };

/// Linear IV blocks Q_t and quadratic matrices P_l defining g(theta).
struct MomentSet {
    std::vector<Matrix> Q;              ///< one n x kq block per transformed period
    std::vector<Matrix> P;              ///< m matrices, n x n
    std::vector<std::string> q_labels;
    std::vector<std::string> p_labels;
    MomentKind kind = MomentKind::Default;

    Index kq() const noexcept { return Q.empty() ? 0 : Q.front().cols(); }
    Index m() const noexcept { return static_cast<Index>(P.size()); }
    Index size() const noexcept { return m() + kq(); }
};

struct IvSet {
    std::vector<Matrix> blocks;
    std::vector<std::string> labels;
};

/// Variance threshold (after projection) below which an IV column is dropped.
inline constexpr double kMinIvVariance = 1e-12;

/**
 * Default instruments (Y*_{t-1}, M Y*_{t-1}, M^2 Y*_{t-1}, X*_t, M X*_t, M^2 X*_t),
 * where M^2 runs over all ordered products M_a M_b. Near-constant and linearly
 * dependent columns are dropped with a warning. Throws NumericalError when
 * fewer than K columns remain.
 */
IvSet default_iv(const EstimationData& data, Warnings* warnings = nullptr);

/// Removes near-constant and collinear columns from IV blocks (in place).
void prune_iv(const EstimationData& data, IvSet& iv, Warnings* warnings);

/**
 * P_j = M_j - tr(M_j Pi)/tr(Pi) Pi and P_{j+p} = M_j^2 - tr(M_j^2 Pi)/tr(Pi) Pi,
 * with Pi = J_n when `project` is set and I_n otherwise.
 */
std::vector<Matrix> default_quadratic(const SpatialWeightSet& w, bool project = true);

/// Default IV plus default quadratic matrices.
MomentSet default_moments(const EstimationData& data, Warnings* warnings = nullptr);

/**
 * g(theta) compiled into polynomial coefficients. Quadratic rows are
 * a_l - theta'b_l + theta'C_l theta, linear rows q - Wq theta. Evaluation is
 * O(m K^2 + kq K) and does not touch the panel again.
 */
class MomentFunction {
public:
    MomentFunction(const EstimationData& data, const MomentSet& set);

    Index size() const noexcept { return m_ + kq_; }
    Index m() const noexcept { return m_; }
    Index kq() const noexcept { return kq_; }
    Index num_params() const noexcept { return K_; }

    /// Unscaled moment vector (sums over all periods).
    Vector value(const Vector& theta) const;
    /// d g / d theta'.
    Matrix jacobian(const Vector& theta) const;

    /// sum_t Q_t' Pi Q_t.
    const Matrix& qpq() const noexcept { return qpq_; }
    /// sum_t Q_t' Pi R_t.
    const Matrix& qpr() const noexcept { return Wq_; }
    /// sum_t Q_t' Pi Y**_t.
    const Vector& qpy() const noexcept { return q_; }

private:
    Index m_ = 0, kq_ = 0, K_ = 0;
    Vector a_;
    std::vector<Vector> b_;
    std::vector<Matrix> C_;
    Vector q_;
    Matrix Wq_;
    Matrix qpq_;
};

/// Direct per-period evaluation of g(theta); independent of MomentFunction.
Vector moment_vector(const Vector& theta, const EstimationData& data, const MomentSet& set);

/// (1/N) sum_t V_t' Pi V_t for an n x (T-1) residual matrix.
double sigma2_hat(const Matrix& residuals, bool project);

/// (1/2N) sum (Pi dV)^4 - 3 sigma^4 from n x T level residuals.
double mu4_hat(const Matrix& level_residuals, double sigma2, bool project);

struct NoiseMoments {
    double sigma2 = 0.0;
    double mu4 = 0.0;
    double eta4 = 3.0;
    bool clamped = false;
};

inline constexpr double kMinKurtosis = 1.0 + 1e-6;

/// sigma^2, mu_4 and eta_4 from residuals at theta, with the Jensen clamp.
NoiseMoments estimate_noise_moments(const EstimationData& data, const Vector& theta,
                                    Warnings* warnings = nullptr);

struct OmegaHat {
    Matrix omega;
    double rcond = 0.0;
    bool ridged = false;
};

/**
 * Plug-in covariance of g/sqrt(N): quadratic block
 * [sigma^4 tr(B_l B_j^s) + (mu4 - 3 sigma^4) diag(B_l)'diag(B_j)] (T-1)/N with
 * B = Pi P Pi, linear block sigma^2 sum Q'Pi Q / N, zero cross blocks.
 */
OmegaHat omega_hat(const EstimationData& data, const MomentSet& set, double sigma2, double mu4);

/// Per-period (L_t, Z**_t) with L_t = (G_r (Z**_t eta + alpha*_t 1))_r.
std::vector<Matrix> expected_regressors(const EstimationData& data, const Vector& theta,
                                        const Vector& alpha_star);

struct IdentificationReport {
    double min_singular_value = 0.0;
    double condition_number = 0.0;
    bool flagged = false;
};

inline constexpr double kIdentificationConditionLimit = 1e8;

/// Conditioning of (1/N) sum_t Q_t' Pi (L_t, Z_t).
IdentificationReport identification_diagnostic(const std::vector<Matrix>& Q,
                                               const std::vector<Matrix>& LZ, bool project);

}  // namespace starch
