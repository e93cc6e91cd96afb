#pragma once

// Continuous-time linear approximation of the synchronization loop under PI
// control: phases x1 = theta_bar, scaled integrator x2 = xi / omega_c.
//
//   xdot  = A x + B2 omega_u,   x(0) = 0
//   omega = C1 x + omega_u
//   delta = C2 x
//
// with a = k_p, b = omega_c * k_i, A = [-aL bI; -L 0], C1 = [-aL bI],
// C2 = [-B^T 0].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "bittide/errors.hpp"
#include "bittide/graph.hpp"
#include "bittide/numerics.hpp"

namespace bittide {

struct Gains {
    double k_p = 0.0;
    double k_i = 0.0;
    double omega_c = 1.0;

    double a() const { return k_p; }
    double b() const { return omega_c * k_i; }

    void validate() const
    {
        if (!(a() > 0.0))
            throw ValidationError("controller.k_p", "proportional gain a = k_p must be positive");
        if (!(b() > 0.0))
            throw ValidationError("controller.k_i", "scaled integral gain b = omega_c * k_i must be positive");
    }
};

struct OdeSystem {
    Matrix A;
    Matrix B2;
    Matrix C1;
    Matrix D1;
    Matrix C2;

    int node_count() const { return static_cast<int>(B2.cols()); }
    int edge_count() const { return static_cast<int>(C2.rows()); }
};

struct ReducedSystem {
    Matrix A_hat;
    Matrix B2_hat;
    Matrix C1_hat;
    Matrix C2_hat;
    Matrix C_hat; // [C1_hat; C2_hat]
    Matrix u1;
    double a = 0.0;
    double b = 0.0;
};

/// [-a M, b I; -M, 0] for a square M. Used for both A (M = L) and A_hat (M = L_hat).
inline Matrix pi_block_matrix(const Matrix& m, double a, double b)
{
    const auto k = m.rows();
    Matrix out = Matrix::Zero(2 * k, 2 * k);
    out.topLeftCorner(k, k) = -a * m;
    out.topRightCorner(k, k) = b * Matrix::Identity(k, k);
    out.bottomLeftCorner(k, k) = -m;
    return out;
}

inline OdeSystem build_full_system(const SpectralData& sd, const Gains& gains)
{
    gains.validate();
    const int n = sd.node_count();
    const int m = sd.edge_count();
    const double a = gains.a();
    const double b = gains.b();
    const auto& lap = sd.laplacian;

    OdeSystem sys;
    sys.A = pi_block_matrix(lap, a, b);
    sys.B2 = Matrix::Zero(2 * n, n);
    sys.B2.topRows(n) = Matrix::Identity(n, n);
    sys.C1.resize(n, 2 * n);
    sys.C1 << -a * lap, b * Matrix::Identity(n, n);
    sys.D1 = Matrix::Identity(n, n);
    sys.C2 = Matrix::Zero(m, 2 * n);
    sys.C2.leftCols(n) = -sd.incidence.transpose();
    return sys;
}

inline ReducedSystem build_reduced_system(const SpectralData& sd, const Gains& gains)
{
    gains.validate();
    const int n = sd.node_count();
    const int m = sd.edge_count();
    const int k = n - 1;
    const double a = gains.a();
    const double b = gains.b();

    ReducedSystem rs;
    rs.a = a;
    rs.b = b;
    rs.u1 = sd.u1;
    rs.A_hat = pi_block_matrix(sd.reduced_laplacian, a, b);
    rs.B2_hat = Matrix::Zero(2 * k, n);
    rs.B2_hat.topRows(k) = sd.u1.transpose();
    rs.C1_hat.resize(n, 2 * k);
    rs.C1_hat << -a * sd.laplacian * sd.u1, b * sd.u1;
    rs.C2_hat = Matrix::Zero(m, 2 * k);
    rs.C2_hat.leftCols(k) = -sd.incidence.transpose() * sd.u1;
    rs.C_hat.resize(n + m, 2 * k);
    rs.C_hat << rs.C1_hat, rs.C2_hat;
    return rs;
}

/// (1/20) of the fastest closed-loop time scale implied by the block structure.
inline double default_time_step(const SpectralData& sd, const Gains& gains)
{
    const double lmax = sd.lambda_max();
    return std::min(1.0 / (gains.a() * lmax), 1.0 / std::sqrt(gains.b() * lmax)) / 20.0;
}

struct OdeTrace {
    std::vector<double> times;
    std::vector<Vector> states; // full 2n state x = (theta_bar, xi / omega_c)
    std::vector<Vector> omega;  // ticks / second
    std::vector<Vector> delta;  // frames, one entry per edge

    std::size_t size() const { return times.size(); }
};

/// RK4 trajectory from x(0) = 0 over [0, t_end]. Every `sample_every`-th step
/// is recorded, plus the final sample.
inline OdeTrace simulate_ode(const OdeSystem& sys, const Vector& omega_u, double t_end, double dt,
                             std::size_t sample_every = 1)
{
    const int n = sys.node_count();
    if (omega_u.size() != n)
        throw DimensionMismatch("simulate_ode: omega_u has wrong length");
    if (sample_every == 0)
        sample_every = 1;

    const Vector forcing = sys.B2 * omega_u;
    const Matrix& a = sys.A;
    auto deriv = [&](double, const Vector& x) -> Vector { return a * x + forcing; };

    OdeTrace trace;
    std::size_t step = 0;
    numerics::rk4_for_each(deriv, Vector::Zero(2 * n), 0.0, t_end, dt,
                           [&](double t, const Vector& x) {
                               const bool last = t >= t_end;
                               if (step++ % sample_every != 0 && !last)
                                   return;
                               trace.times.push_back(t);
                               trace.states.push_back(x);
                               trace.omega.push_back(sys.C1 * x + sys.D1 * omega_u);
                               trace.delta.push_back(sys.C2 * x);
                           });
    return trace;
}

struct SteadyState {
    Vector closed_form;  // [0; -U1^T omega_u / b]
    Vector solved;       // -A_hat^{-1} B2_hat omega_u
    Vector omega_ss;     // omega_avg * 1
    double relative_gap; // |closed_form - solved| / max(|closed_form|, tiny)
};

inline SteadyState steady_state(const ReducedSystem& rs, const Vector& omega_u)
{
    const auto k = rs.u1.cols();
    SteadyState ss;
    ss.closed_form = Vector::Zero(2 * k);
    // The integrator block settles where b x2 + U1^T omega_u = 0.
    ss.closed_form.tail(k) = -rs.u1.transpose() * omega_u / rs.b;
    ss.solved = -numerics::solve(rs.A_hat, rs.B2_hat * omega_u);
    ss.omega_ss = Vector::Constant(omega_u.size(), omega_u.mean());
    const double scale = std::max({ss.closed_form.norm(), ss.solved.norm(), 1e-300});
    ss.relative_gap = (ss.closed_form - ss.solved).norm() / scale;
    return ss;
}

struct DecoupledTrace {
    std::vector<double> times;
    std::vector<Vector> x1; // U1^T theta_bar
    std::vector<Vector> x2; // U1^T (xi / omega_c)
    std::vector<double> x3; // ones^T theta_bar / sqrt(n)
    std::vector<double> x4; // ones^T (xi / omega_c) / sqrt(n)
};

/// Orthogonal change of coordinates separating the Laplacian kernel (drift)
/// from the stable subspace.
inline DecoupledTrace decoupled_coordinates(const OdeTrace& trace, const SpectralData& sd)
{
    const int n = sd.node_count();
    const Vector u2 = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    DecoupledTrace out;
    out.times = trace.times;
    for (const auto& x : trace.states) {
        const auto theta = x.head(n);
        const auto integ = x.tail(n);
        out.x1.push_back(sd.u1.transpose() * theta);
        out.x2.push_back(sd.u1.transpose() * integ);
        out.x3.push_back(u2.dot(theta));
        out.x4.push_back(u2.dot(integ));
    }
    return out;
}

} // namespace bittide
