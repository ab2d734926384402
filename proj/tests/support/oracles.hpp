#pragma once

// Test-only oracles, kept independent of the library code paths they check.

#include <random>
#include <vector>

#include "flowmarket/problem.hpp"

namespace fmtest {

using flowmarket::EvalMode;
using flowmarket::Mat;
using flowmarket::NlpProblem;
using flowmarket::Vec;

/// Central finite differences of a constraint family's residual map.
inline Mat fd_jacobian(const flowmarket::ConstraintFamily& fam, const Vec& z, int ncols,
                       EvalMode mode = EvalMode::Exact, double step = 1e-6) {
    Mat J(fam.count(), ncols);
    Vec zl = z, zr = z;
    for (int j = 0; j < ncols; ++j) {
        const double h = step * std::max(1.0, std::abs(z[j]));
        zr[j] = z[j] + h;
        zl[j] = z[j] - h;
        const Vec rp = fam.residual(zr, mode);
        const Vec rm = fam.residual(zl, mode);
        J.col(j) = (rp - rm) / (2.0 * h);
        zr[j] = z[j];
        zl[j] = z[j];
    }
    return J;
}

inline double max_rel_jacobian_error(const flowmarket::ConstraintFamily& fam, const Vec& z,
                                     int ncols, EvalMode mode = EvalMode::Exact) {
    if (fam.count() == 0) return 0.0;
    const Mat Jfd = fd_jacobian(fam, z, ncols, mode);
    const Mat Jan = Mat(fam.jacobian(z, ncols, mode));
    double worst = 0.0;
    for (int i = 0; i < Jan.rows(); ++i)
        for (int j = 0; j < Jan.cols(); ++j) {
            const double scale = std::max(1.0, std::abs(Jan(i, j)));
            worst = std::max(worst, std::abs(Jan(i, j) - Jfd(i, j)) / scale);
        }
    return worst;
}

/// Central finite differences of the objective gradient.
inline Vec fd_objective_gradient(const NlpProblem& p, const Vec& z,
                                 EvalMode mode = EvalMode::Exact, double step = 1e-6) {
    Vec g(z.size());
    Vec zt = z;
    for (int j = 0; j < z.size(); ++j) {
        const double h = step * std::max(1.0, std::abs(z[j]));
        zt[j] = z[j] + h;
        const double fp = p.objective().value(zt, mode);
        zt[j] = z[j] - h;
        const double fm = p.objective().value(zt, mode);
        g[j] = (fp - fm) / (2.0 * h);
        zt[j] = z[j];
    }
    return g;
}

}  // namespace fmtest
