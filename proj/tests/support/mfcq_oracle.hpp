#pragma once

// Independent dense re-implementation of the constraint-qualification
// certificate, used only to cross-check the library's version. Rank comes
// from a hand-rolled cyclic Jacobi eigensolver on J J^T; the direction LP is
// solved by a self-contained full-tableau simplex with Dantzig pricing.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "flowmarket/problem.hpp"

namespace fmtest {

using flowmarket::Mat;
using flowmarket::Vec;

/// Singular values of J via cyclic Jacobi on the symmetric matrix J J^T.
inline Vec jacobi_singular_values(const Mat& J) {
    const int m = static_cast<int>(J.rows());
    Mat A = J * J.transpose();
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < m; ++p)
            for (int q = p + 1; q < m; ++q) off += A(p, q) * A(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < m; ++p)
            for (int q = p + 1; q < m; ++q) {
                if (std::abs(A(p, q)) < 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < m; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < m; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
            }
    }
    Vec sv(m);
    for (int i = 0; i < m; ++i) sv[i] = std::sqrt(std::max(A(i, i), 0.0));
    std::sort(sv.data(), sv.data() + m, std::greater<double>());
    return sv;
}

/// Full-tableau two-phase simplex for min c'x, Ax = b, x >= 0 with
/// Dantzig pricing. Returns the optimal objective; throws on infeasible or
/// unbounded problems.
inline double tableau_simplex(Mat A, Vec b, Vec c) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    for (int i = 0; i < m; ++i)
        if (b[i] < 0) {
            A.row(i) *= -1.0;
            b[i] *= -1.0;
        }
    // tableau with artificial basis
    Mat T = Mat::Zero(m + 1, n + m + 1);
    T.block(0, 0, m, n) = A;
    T.block(0, n, m, m) = Mat::Identity(m, m);
    T.col(n + m).segment(0, m) = b;
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) basis[i] = n + i;

    auto price_and_pivot = [&](int ncols) {
        for (int iter = 0; iter < 20000; ++iter) {
            int enter = -1;
            double best = -1e-9;
            for (int j = 0; j < ncols; ++j)
                if (T(m, j) < best) {
                    best = T(m, j);
                    enter = j;
                }
            if (enter < 0) return true;
            int leave = -1;
            double best_ratio = 0.0;
            for (int i = 0; i < m; ++i) {
                if (T(i, enter) <= 1e-9) continue;
                const double ratio = T(i, n + m) / T(i, enter);
                if (leave < 0 || ratio < best_ratio - 1e-12) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
            if (leave < 0) throw std::runtime_error("unbounded tableau");
            T.row(leave) /= T(leave, enter);
            for (int i = 0; i <= m; ++i)
                if (i != leave && std::abs(T(i, enter)) > 0)
                    T.row(i) -= T(i, enter) * T.row(leave);
            basis[leave] = enter;
        }
        throw std::runtime_error("tableau iteration limit");
    };

    // phase 1
    for (int j = 0; j < n + m; ++j) T(m, j) = j >= n ? 1.0 : 0.0;
    T(m, n + m) = 0.0;
    for (int i = 0; i < m; ++i) T.row(m) -= T.row(i);  // reduce artificial costs
    price_and_pivot(n + m);
    if (T(m, n + m) < -1e-7) throw std::runtime_error("infeasible tableau");
    // pivot basic artificials out where possible
    for (int i = 0; i < m; ++i) {
        if (basis[i] < n) continue;
        for (int j = 0; j < n; ++j)
            if (std::abs(T(i, j)) > 1e-9) {
                T.row(i) /= T(i, j);
                for (int r = 0; r <= m; ++r)
                    if (r != i && std::abs(T(r, j)) > 0) T.row(r) -= T(r, j) * T.row(i);
                basis[i] = j;
                break;
            }
    }
    // phase 2: block artificial columns by zeroing them out of pricing reach
    for (int i = 0; i < m; ++i)
        if (basis[i] >= n)
            for (int j = n; j < n + m; ++j) T(i, j) = 0.0;
    for (int j = 0; j < n + m; ++j) T(m, j) = j < n ? c[j] : 1e30;
    T(m, n + m) = 0.0;
    for (int i = 0; i < m; ++i)
        if (basis[i] < n) T.row(m) -= c[basis[i]] * T.row(i);
    price_and_pivot(n);
    double obj = 0.0;
    for (int i = 0; i < m; ++i)
        if (basis[i] < n) obj += c[basis[i]] * T(i, n + m);
    return obj;
}

struct DenseMfcq {
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    int rank = 0;
    bool rank_ok = false;
    double t_star = 0.0;
    bool holds = false;
};

/// Dense oracle: Jh and Jg_active must already be restricted to the (x, y)
/// columns. Solves max t s.t. Jg delta + t <= 0, Jh delta = 0,
/// |delta|_inf <= 1, t <= 1 through the substitution delta = dhat - 1,
/// t = 1 - that with dhat in [0, 2], that >= 0.
inline DenseMfcq dense_mfcq(const Mat& Jh, const Mat& Jg_active, double rank_tol = 1e-8,
                            double direction_tol = 1e-8) {
    DenseMfcq out;
    const int n = static_cast<int>(Jh.cols() > 0 ? Jh.cols() : Jg_active.cols());
    const int mh = static_cast<int>(Jh.rows());
    const int mg = static_cast<int>(Jg_active.rows());
    if (mh > 0) {
        const Vec sv = jacobi_singular_values(Jh);
        out.sigma_max = sv[0];
        out.sigma_min = sv[sv.size() - 1];
        for (int i = 0; i < sv.size(); ++i)
            if (sv[i] >= rank_tol * std::max(out.sigma_max, 1e-300)) ++out.rank;
        out.rank_ok = mh <= n && out.rank == mh;
    } else {
        out.rank_ok = true;
    }

    // columns: dhat (n), that (1), slack for Jg rows (mg), slack for dhat<=2 (n)
    const int ncols = n + 1 + mg + n;
    const int mrows = mg + mh + n;
    Mat A = Mat::Zero(mrows, ncols);
    Vec b = Vec::Zero(mrows);
    Vec c = Vec::Zero(ncols);
    c[n] = 1.0;  // min that == max t
    for (int r = 0; r < mg; ++r) {
        A.row(r).segment(0, n) = Jg_active.row(r);
        A(r, n) = -1.0;
        A(r, n + 1 + r) = 1.0;  // slack
        b[r] = Jg_active.row(r).sum() - 1.0;
    }
    for (int r = 0; r < mh; ++r) {
        A.row(mg + r).segment(0, n) = Jh.row(r);
        b[mg + r] = Jh.row(r).sum();
    }
    for (int j = 0; j < n; ++j) {
        A(mg + mh + j, j) = 1.0;
        A(mg + mh + j, n + 1 + mg + j) = 1.0;
        b[mg + mh + j] = 2.0;
    }
    const double that = tableau_simplex(A, b, c);
    out.t_star = 1.0 - that;
    out.holds = out.rank_ok && out.t_star > direction_tol;
    return out;
}

/// Convenience wrapper extracting the (x, y) Jacobians from a problem.
inline DenseMfcq dense_mfcq_of(const flowmarket::NlpProblem& p, const Vec& primal,
                               double active_tol = 1e-6) {
    using namespace flowmarket;
    const auto& L = p.layout();
    const int n_xy = L.n_exposed + L.n_dependent;
    const auto& heq = p.family(FamilyKind::SystemEquality);
    const auto& gin = p.family(FamilyKind::SystemInequality);
    Mat Jh(0, n_xy);
    if (heq.count() > 0)
        Jh = Mat(heq.jacobian(primal, L.total(), EvalMode::Exact)).rightCols(n_xy);
    const Vec g = gin.residual(primal, EvalMode::Exact);
    std::vector<int> active;
    for (int i = 0; i < g.size(); ++i)
        if (g[i] >= -active_tol) active.push_back(i);
    Mat Jg(static_cast<int>(active.size()), n_xy);
    if (!active.empty()) {
        const Mat Jga = Mat(gin.jacobian(primal, L.total(), EvalMode::Exact)).rightCols(n_xy);
        for (size_t r = 0; r < active.size(); ++r) Jg.row(static_cast<int>(r)) = Jga.row(active[r]);
    }
    return dense_mfcq(Jh, Jg);
}

}  // namespace fmtest
