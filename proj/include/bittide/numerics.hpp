#pragma once

// Small dense linear algebra and integration kernel.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bittide/errors.hpp"

namespace bittide {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;

namespace numerics {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Throws in checked builds when `m` carries a NaN or Inf.
inline void require_finite([[maybe_unused]] const Matrix& m, [[maybe_unused]] const char* what) {
#ifndef NDEBUG
    if (!m.allFinite())
        throw Error(std::string(what) + ": non-finite entry");
#endif
}

struct SymmetricEigen {
    Vector values;  // ascending
    Matrix vectors; // orthonormal columns, vectors.col(k) pairs with values(k)
};

inline SymmetricEigen eig_symmetric(const Matrix& m)
{
    if (m.rows() != m.cols())
        throw NotSymmetric("eig_symmetric: matrix is not square");
    require_finite(m, "eig_symmetric");
    const double scale = std::max(m.norm(), 1e-300);
    if ((m - m.transpose()).norm() > 1e-12 * scale)
        throw NotSymmetric("eig_symmetric: relative asymmetry exceeds 1e-12");

    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    if (solver.info() != Eigen::Success)
        throw ConvergenceFailure("eig_symmetric: solver did not converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Eigenvalues of a general real matrix (Hessenberg reduction + real Schur).
inline ComplexVector eigenvalues(const Matrix& m)
{
    if (m.rows() != m.cols())
        throw DimensionMismatch("eigenvalues: matrix is not square");
    require_finite(m, "eigenvalues");
    Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw ConvergenceFailure("eigenvalues: QR iteration did not converge");
    return solver.eigenvalues();
}

inline Vector solve(const Matrix& m, const Vector& rhs)
{
    if (m.rows() != m.cols() || m.rows() != rhs.size())
        throw DimensionMismatch("solve: non-conformable system");
    require_finite(m, "solve");
    Eigen::FullPivLU<Matrix> lu(m);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible())
        throw Singular("solve: matrix is numerically singular");
    return lu.solve(rhs);
}

inline Matrix inverse(const Matrix& m)
{
    if (m.rows() != m.cols())
        throw DimensionMismatch("inverse: matrix is not square");
    Eigen::FullPivLU<Matrix> lu(m);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible())
        throw Singular("inverse: matrix is numerically singular");
    return lu.inverse();
}

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
};

/// Classical fixed-step RK4 from t0 to t1. `observer(t, x)` is called at
/// both endpoints and after every step. The final step is shortened so the
/// last sample lands exactly on t1.
template <class Deriv, class Observer>
void rk4_for_each(Deriv&& deriv, Vector x, double t0, double t1, double dt, Observer&& observer)
{
    if (!(dt > 0.0))
        throw NonpositiveStep("rk4: step must be positive");
    if (t1 < t0)
        throw Error("rk4: t1 precedes t0");

    observer(t0, static_cast<const Vector&>(x));
    const double span = t1 - t0;
    auto full = static_cast<std::size_t>(std::floor(span / dt));
    double remainder = span - static_cast<double>(full) * dt;
    if (remainder <= 1e-9 * dt)
        remainder = 0.0;

    auto step = [&](double t, double h) {
        const Vector k1 = deriv(t, x);
        const Vector k2 = deriv(t + 0.5 * h, Vector(x + 0.5 * h * k1));
        const Vector k3 = deriv(t + 0.5 * h, Vector(x + 0.5 * h * k2));
        const Vector k4 = deriv(t + h, Vector(x + h * k3));
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    };

    for (std::size_t k = 0; k < full; ++k) {
        const double t = t0 + static_cast<double>(k) * dt;
        step(t, dt);
        const bool last = (k + 1 == full) && remainder == 0.0;
        observer(last ? t1 : t0 + static_cast<double>(k + 1) * dt, static_cast<const Vector&>(x));
    }
    if (remainder > 0.0) {
        step(t0 + static_cast<double>(full) * dt, remainder);
        observer(t1, static_cast<const Vector&>(x));
    }
}

template <class Deriv>
Trajectory rk4_integrate(Deriv&& deriv, const Vector& x0, double t0, double t1, double dt)
{
    Trajectory out;
    rk4_for_each(std::forward<Deriv>(deriv), x0, t0, t1, dt, [&](double t, const Vector& x) {
        out.times.push_back(t);
        out.states.push_back(x);
    });
    return out;
}

/// Composite trapezoid approximation of the integral of |y(t) - reference|^2.
inline double l2_norm_squared(std::span<const double> times, std::span<const Vector> samples,
                              const Vector& reference)
{
    if (times.size() != samples.size())
        throw DimensionMismatch("l2_norm_squared: times and samples differ in length");
    if (times.size() < 2)
        throw Error("l2_norm_squared: at least two samples are required");
    double total = 0.0;
    double prev = (samples[0] - reference).squaredNorm();
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double cur = (samples[k] - reference).squaredNorm();
        total += 0.5 * (times[k] - times[k - 1]) * (prev + cur);
        prev = cur;
    }
    return total;
}

/// Frobenius norm of A^T X + X A + C^T C.
inline double lyapunov_residual(const Matrix& a, const Matrix& x, const Matrix& c)
{
    if (a.rows() != a.cols() || x.rows() != a.rows() || x.cols() != a.cols() ||
        c.cols() != a.rows())
        throw DimensionMismatch("lyapunov_residual: non-conformable A, X, C");
    return (a.transpose() * x + x * a + c.transpose() * c).norm();
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

} // namespace numerics
} // namespace bittide
