#pragma once

// Test-side oracles, kept independent of the library paths they check.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>

#include "loopflow/region.hpp"

namespace oracle {

/// Naive power-sum polynomial evaluation (vs the library's Horner scheme).
inline std::complex<double> eval_poly_naive(const Eigen::VectorXd& coeffs, std::complex<double> s) {
    std::complex<double> acc(0.0, 0.0);
    for (Eigen::Index k = 0; k < coeffs.size(); ++k)
        acc += coeffs[k] * std::pow(s, static_cast<double>(k));
    return acc;
}

inline std::complex<double> central_diff(const std::function<std::complex<double>(double)>& f,
                                         double x, double step) {
    return (f(x + step) - f(x - step)) / (2.0 * step);
}

inline double central_diff_real(const std::function<double(double)>& f, double x, double step) {
    return (f(x + step) - f(x - step)) / (2.0 * step);
}

/// Central finite-difference gradient of a scalar field on the plane.
inline Eigen::Vector2d gradient_fd(const std::function<double(std::complex<double>)>& f,
                                   std::complex<double> p, double step) {
    const double gx = (f(p + std::complex<double>(step, 0.0)) - f(p - std::complex<double>(step, 0.0))) /
                      (2.0 * step);
    const double gy = (f(p + std::complex<double>(0.0, step)) - f(p - std::complex<double>(0.0, step))) /
                      (2.0 * step);
    return Eigen::Vector2d(gx, gy);
}

/// Dense direct solve of the same linear system the SOR iteration relaxes:
/// 4 V(c) - sum of neighbors = 0 on forbidden interior non-source cells,
/// V = 1 at sources, V = 0 on admissible and border cells.
inline Eigen::MatrixXd laplace_dense(const loopflow::GridMaskRegion& mask) {
    using loopflow::CellKind;
    auto relaxed = [&](int ix, int iy) {
        if (ix <= 0 || iy <= 0 || ix >= mask.nx - 1 || iy >= mask.ny - 1) return false;
        return mask.cell(ix, iy) == CellKind::Forbidden;
    };
    auto pinned = [&](int ix, int iy) -> double {
        return mask.cell(ix, iy) == CellKind::Source &&
                       !(ix == 0 || iy == 0 || ix == mask.nx - 1 || iy == mask.ny - 1)
                   ? 1.0
                   : 0.0;
    };

    Eigen::MatrixXi index = Eigen::MatrixXi::Constant(mask.ny, mask.nx, -1);
    int             unknowns = 0;
    for (int iy = 0; iy < mask.ny; ++iy)
        for (int ix = 0; ix < mask.nx; ++ix)
            if (relaxed(ix, iy)) index(iy, ix) = unknowns++;

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(unknowns, unknowns);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(unknowns);
    const int       dx[4] = {1, -1, 0, 0};
    const int       dy[4] = {0, 0, 1, -1};
    for (int iy = 0; iy < mask.ny; ++iy) {
        for (int ix = 0; ix < mask.nx; ++ix) {
            const int row = index(iy, ix);
            if (row < 0) continue;
            a(row, row) = 4.0;
            for (int d = 0; d < 4; ++d) {
                const int jx = ix + dx[d], jy = iy + dy[d];
                if (index(jy, jx) >= 0)
                    a(row, index(jy, jx)) = -1.0;
                else
                    b(row) += pinned(jx, jy);
            }
        }
    }
    const Eigen::VectorXd x = a.partialPivLu().solve(b);

    Eigen::MatrixXd field = Eigen::MatrixXd::Zero(mask.ny, mask.nx);
    for (int iy = 0; iy < mask.ny; ++iy)
        for (int ix = 0; ix < mask.nx; ++ix)
            field(iy, ix) = index(iy, ix) >= 0 ? x(index(iy, ix)) : pinned(ix, iy);
    return field;
}

/// Closed-loop step response of 1/(s+1) under unity feedback: 1/(s+2).
inline double first_order_closed_loop(double t, double reference = 1.0) {
    return reference * 0.5 * (1.0 - std::exp(-2.0 * t));
}

}  // namespace oracle
