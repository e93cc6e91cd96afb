#pragma once

// Stability and L2 performance of the reduced PI loop.
//
// With a = k_p and b = omega_c * k_i the closed-form norms are
//   |omega - omega_ss|^2 = q / (2a),   |delta|^2 = q / (2ab),
// where q = omega_u^T L^+ omega_u. For two perturbed nodes q = alpha^2 R_ij.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>

#include "bittide/errors.hpp"
#include "bittide/graph.hpp"
#include "bittide/numerics.hpp"
#include "bittide/ode_model.hpp"

namespace bittide {

struct HurwitzResult {
    bool is_hurwitz;
    double spectral_abscissa;
};

inline HurwitzResult hurwitz_check(const Matrix& m, double rel_tol = 1e-10)
{
    const ComplexVector ev = numerics::eigenvalues(m);
    double abscissa = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < ev.size(); ++k)
        abscissa = std::max(abscissa, ev(k).real());
    return {abscissa < -rel_tol * m.norm(), abscissa};
}

struct LyapunovCertificate {
    Matrix X1;
    Matrix X2;
    double residual1 = 0.0;    // |A^T X1 + X1 A + C1^T C1|_F
    double residual2 = 0.0;    // same with X2, C2
    double residual_sum = 0.0; // same with X1 + X2, C
    double scale1 = 0.0;       // |C1^T C1|_F
    double scale2 = 0.0;
    double scale_sum = 0.0;
    double min_eig_x1 = 0.0;
    double min_eig_x2 = 0.0;
    double min_eig_schur = 0.0; // Schur complement of the (1,1) block of X1

    double relative1() const { return residual1 / scale1; }
    double relative2() const { return residual2 / scale2; }
    double relative_sum() const { return residual_sum / scale_sum; }
};

/// Builds the explicit Lyapunov solutions
///   X1 = [ (a/2) Lh + (b/2a) I,   -(b/2) I        ]
///        [ -(b/2) I,               (b^2/2a) Lh^-1 ]
///   X2 = [ (1/2a) I,  0              ]
///        [ 0,         (b/2a) Lh^-1   ]
/// and measures their residuals against the reduced system.
inline LyapunovCertificate build_lyapunov_certificate(const ReducedSystem& rs, const SpectralData& sd)
{
    const double a = rs.a;
    const double b = rs.b;
    const Matrix& lhat = sd.reduced_laplacian;
    const auto k = lhat.rows();
    const Matrix id = Matrix::Identity(k, k);
    const Matrix lhat_inv = numerics::symmetrized(numerics::inverse(lhat));

    LyapunovCertificate cert;
    cert.X1.resize(2 * k, 2 * k);
    cert.X1 << (a / 2.0) * lhat + (b / (2.0 * a)) * id, -(b / 2.0) * id,
        -(b / 2.0) * id, (b * b / (2.0 * a)) * lhat_inv;
    cert.X2 = Matrix::Zero(2 * k, 2 * k);
    cert.X2.topLeftCorner(k, k) = id / (2.0 * a);
    cert.X2.bottomRightCorner(k, k) = (b / (2.0 * a)) * lhat_inv;

    cert.residual1 = numerics::lyapunov_residual(rs.A_hat, cert.X1, rs.C1_hat);
    cert.residual2 = numerics::lyapunov_residual(rs.A_hat, cert.X2, rs.C2_hat);
    cert.residual_sum = numerics::lyapunov_residual(rs.A_hat, cert.X1 + cert.X2, rs.C_hat);
    cert.scale1 = (rs.C1_hat.transpose() * rs.C1_hat).norm();
    cert.scale2 = (rs.C2_hat.transpose() * rs.C2_hat).norm();
    cert.scale_sum = (rs.C_hat.transpose() * rs.C_hat).norm();

    cert.min_eig_x1 = numerics::eig_symmetric(cert.X1).values(0);
    cert.min_eig_x2 = numerics::eig_symmetric(cert.X2).values(0);
    const Matrix top = cert.X1.topLeftCorner(k, k);
    const Matrix schur = (b * b / (2.0 * a)) * lhat_inv -
                         (b * b / 4.0) * numerics::inverse(top);
    cert.min_eig_schur = numerics::eig_symmetric(numerics::symmetrized(schur)).values(0);

    if (cert.min_eig_x1 <= 0.0 || cert.min_eig_x2 <= 0.0)
        throw PositivityViolation("Lyapunov certificate is not positive definite");
    return cert;
}

struct PerformanceReport {
    double freq_dev_norm_sq = 0.0;  // |omega - omega_ss|_2^2
    double occupancy_norm_sq = 0.0; // |delta|_2^2
    double quadratic_form = 0.0;    // omega_u^T L^+ omega_u
    double a = 0.0;
    double b = 0.0;
};

inline PerformanceReport predicted_performance(const SpectralData& sd, const Gains& gains,
                                               const Vector& omega_u)
{
    gains.validate();
    if (omega_u.size() != sd.node_count())
        throw DimensionMismatch("predicted_performance: omega_u has wrong length");
    PerformanceReport r;
    r.a = gains.a();
    r.b = gains.b();
    // L^+ annihilates the mean; removing it first avoids cancellation near 1.
    const Vector centered = omega_u.array() - omega_u.mean();
    r.quadratic_form = std::max(0.0, centered.dot(sd.pseudo_inverse * centered));
    r.freq_dev_norm_sq = r.quadratic_form / (2.0 * r.a);
    r.occupancy_norm_sq = r.quadratic_form / (2.0 * r.a * r.b);
    return r;
}

struct TwoNodePerturbation {
    Vector omega_u;
    PerformanceReport report;
    double resistance;
};

/// omega_u = base * 1 + alpha (e_i - e_j); norms from the resistance distance.
inline TwoNodePerturbation two_node_perturbation(const SpectralData& sd, const Gains& gains, int i,
                                                 int j, double alpha, double base_freq)
{
    gains.validate();
    const int n = sd.node_count();
    if (i == j)
        throw std::invalid_argument("two_node_perturbation: nodes must differ");
    if (i < 0 || j < 0 || i >= n || j >= n)
        throw std::out_of_range("two_node_perturbation: node index out of range");

    TwoNodePerturbation out;
    out.omega_u = Vector::Constant(n, base_freq);
    out.omega_u(i) += alpha;
    out.omega_u(j) -= alpha;
    out.resistance = resistance_distance(sd, i, j);
    auto& r = out.report;
    r.a = gains.a();
    r.b = gains.b();
    r.quadratic_form = alpha * alpha * out.resistance;
    r.freq_dev_norm_sq = r.quadratic_form / (2.0 * r.a);
    r.occupancy_norm_sq = r.quadratic_form / (2.0 * r.a * r.b);
    return out;
}

struct WorstCase {
    Vector omega_u;
    double attained; // gamma^2 / lambda_2
    bool degenerate;
};

/// Maximizer of omega^T L^+ omega over |omega|_2 <= gamma.
inline WorstCase worst_case_frequency(const SpectralData& sd, double gamma)
{
    if (!(gamma > 0.0))
        throw std::invalid_argument("worst_case_frequency: gamma must be positive");
    const auto f = fiedler_vector(sd);
    return {gamma * f.vector, gamma * gamma / f.algebraic_connectivity, f.degenerate};
}

struct EmpiricalNorms {
    double freq_dev_norm_sq = 0.0;
    double occupancy_norm_sq = 0.0;
    double tail_estimate = 0.0; // relative size of the truncated tail
    bool insufficient_horizon = false;
};

/// Trapezoid integrals of |omega - omega_ss|^2 and |delta|^2 over the trace.
/// When the spectral abscissa is known the truncated tail is estimated from the
/// last integrand value assuming exp(2 sigma t) decay; otherwise from the growth
/// over the final tenth of the window.
inline EmpiricalNorms empirical_norms(const OdeTrace& trace, const Vector& omega_ss,
                                      std::optional<double> spectral_abscissa = std::nullopt)
{
    if (trace.size() < 2)
        throw Error("empirical_norms: trace needs at least two samples");
    EmpiricalNorms out;
    out.freq_dev_norm_sq = numerics::l2_norm_squared(trace.times, trace.omega, omega_ss);
    const Vector zero = Vector::Zero(trace.delta.front().size());
    out.occupancy_norm_sq = numerics::l2_norm_squared(trace.times, trace.delta, zero);

    const double total = out.freq_dev_norm_sq + out.occupancy_norm_sq;
    if (total <= 0.0)
        return out;
    const double last = (trace.omega.back() - omega_ss).squaredNorm() + trace.delta.back().squaredNorm();
    double tail = 0.0;
    if (spectral_abscissa && *spectral_abscissa < 0.0) {
        tail = last / (2.0 * std::abs(*spectral_abscissa));
    } else {
        const double t_end = trace.times.back();
        const double cut = trace.times.front() + 0.9 * (t_end - trace.times.front());
        const auto first = static_cast<std::size_t>(
            std::lower_bound(trace.times.begin(), trace.times.end(), cut) - trace.times.begin());
        const std::span<const double> times(trace.times.data() + first, trace.size() - first);
        if (times.size() >= 2) {
            tail = numerics::l2_norm_squared(
                       times, std::span<const Vector>(trace.omega.data() + first, times.size()), omega_ss) +
                   numerics::l2_norm_squared(
                       times, std::span<const Vector>(trace.delta.data() + first, times.size()), zero);
        }
    }
    out.tail_estimate = tail / total;
    out.insufficient_horizon = out.tail_estimate > 1e-3;
    return out;
}

/// Horizon used for empirical norms: 30 / |spectral abscissa of A_hat|.
inline double norm_horizon(const ReducedSystem& rs)
{
    const auto h = hurwitz_check(rs.A_hat);
    if (!h.is_hurwitz)
        throw Error("norm_horizon: reduced system is not Hurwitz");
    return 30.0 / std::abs(h.spectral_abscissa);
}

} // namespace bittide
