#pragma once

#include <limits>
#include <vector>

#include "flowmarket/problem.hpp"

namespace flowmarket {

/// Dense LP in the form
///   min c'z  s.t.  A_eq z = b_eq,  A_le z <= b_le,  lb <= z <= ub
/// with +/-infinity allowed in lb/ub.
struct LpProblem {
    Mat A_eq;
    Vec b_eq;
    Mat A_le;
    Vec b_le;
    Vec c;
    Vec lb, ub;

    int num_vars() const { return static_cast<int>(c.size()); }
};

/// Duals follow the sign convention of the Lagrangian
///   L = c'z + dual_eq'(A_eq z - b_eq) + dual_le'(A_le z - b_le)
///       + dual_lb'(lb - z) + dual_ub'(z - ub),
/// so dual_le, dual_lb, dual_ub >= 0 at an optimum.
struct LpSolution {
    enum class Status { Optimal, Infeasible, Unbounded };
    Status status = Status::Infeasible;
    Vec x;
    double objective = 0.0;
    Vec dual_eq, dual_le, dual_lb, dual_ub;
    Vec basic_values;  // for degeneracy inspection
};

/// Two-phase primal simplex on a dense tableau with Bland's rule.
/// Deterministic; intended for desk-scale cross-checking, not performance.
class SimplexSolver {
public:
    explicit SimplexSolver(const LpProblem& p) : p_(p) { build_standard_form(); }

    LpSolution solve() {
        LpSolution sol;
        const int m = static_cast<int>(bhat_.size());
        // Phase 1: minimize sum of artificials.
        Vec phase1_cost = Vec::Zero(ncols_);
        for (int j = art_begin_; j < ncols_; ++j) phase1_cost[j] = 1.0;
        basis_.resize(m);
        for (int i = 0; i < m; ++i) basis_[i] = art_begin_ + i;
        PivotResult r1 = run_simplex(phase1_cost, /*bar_artificials=*/false);
        if (r1 == PivotResult::IterationLimit)
            throw NumericDomainError("simplex iteration limit exceeded (phase 1)");
        if (phase1_objective() > 1e-7) {
            sol.status = LpSolution::Status::Infeasible;
            return sol;
        }
        // Phase 2: original costs, artificials may stay basic at zero but
        // cannot re-enter.
        PivotResult r2 = run_simplex(chat_, /*bar_artificials=*/true);
        if (r2 == PivotResult::IterationLimit)
            throw NumericDomainError("simplex iteration limit exceeded (phase 2)");
        if (r2 == PivotResult::Unbounded) {
            sol.status = LpSolution::Status::Unbounded;
            return sol;
        }
        extract_solution(sol);
        return sol;
    }

private:
    enum class PivotResult { Optimal, Unbounded, IterationLimit };
    static constexpr double kPivTol = 1e-9;
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    const LpProblem& p_;
    Mat Ahat_;          // m x ncols_ standard-form matrix (includes artificials)
    Vec bhat_;          // >= 0
    Vec chat_;          // costs on standard-form columns (0 on slacks/artificials)
    std::vector<double> row_sign_;
    int ncols_ = 0;
    int art_begin_ = 0;
    std::vector<int> basis_;
    Vec xB_;
    Vec y_;  // simplex multipliers of the last factorization

    // per original variable: how it maps to standard-form columns
    struct VarMap {
        int col = -1;        // primary column
        int col_neg = -1;    // second column of a free split
        double shift = 0.0;  // z = shift + sign*u
        double sign = 1.0;
        int bound_row = -1;  // index into combined row list for a finite ub row
    };
    std::vector<VarMap> vmap_;
    int rows_total_ = 0;  // eq + le + bound rows

    void build_standard_form() {
        const int n = p_.num_vars();
        const int m_eq = static_cast<int>(p_.b_eq.size());
        const int m_le = static_cast<int>(p_.b_le.size());
        vmap_.resize(n);

        int extra_bound_rows = 0;
        int var_cols = 0;
        for (int j = 0; j < n; ++j) {
            const bool lo = std::isfinite(p_.lb[j]), hi = std::isfinite(p_.ub[j]);
            if (!lo && !hi) {
                var_cols += 2;
            } else {
                var_cols += 1;
                if (lo && hi) extra_bound_rows += 1;
            }
        }
        rows_total_ = m_eq + m_le + extra_bound_rows;
        const int slack_cols = m_le + extra_bound_rows;
        ncols_ = var_cols + slack_cols + rows_total_;
        art_begin_ = var_cols + slack_cols;

        Mat A = Mat::Zero(rows_total_, ncols_);
        Vec b = Vec::Zero(rows_total_);
        chat_ = Vec::Zero(ncols_);

        // assign variable columns
        int col = 0;
        int bound_row = m_eq + m_le;
        for (int j = 0; j < n; ++j) {
            const bool lo = std::isfinite(p_.lb[j]), hi = std::isfinite(p_.ub[j]);
            VarMap& vm = vmap_[j];
            if (!lo && !hi) {
                vm.col = col++;
                vm.col_neg = col++;
                vm.shift = 0.0;
                vm.sign = 1.0;
            } else if (lo) {
                vm.col = col++;
                vm.shift = p_.lb[j];
                vm.sign = 1.0;
                if (hi) vm.bound_row = bound_row++;
            } else {  // only ub finite: z = ub - u
                vm.col = col++;
                vm.shift = p_.ub[j];
                vm.sign = -1.0;
            }
        }

        auto add_var_entries = [&](int row, const auto& coeffs) {
            for (int j = 0; j < n; ++j) {
                const double a = coeffs(j);
                if (a == 0.0) continue;
                const VarMap& vm = vmap_[j];
                A(row, vm.col) += a * vm.sign;
                if (vm.col_neg >= 0) A(row, vm.col_neg) -= a;
                b[row] -= a * vm.shift;
            }
        };

        for (int i = 0; i < m_eq; ++i) {
            b[i] = p_.b_eq[i];
            add_var_entries(i, [&](int j) { return p_.A_eq(i, j); });
        }
        for (int r = 0; r < m_le; ++r) {
            const int row = m_eq + r;
            b[row] = p_.b_le[r];
            add_var_entries(row, [&](int j) { return p_.A_le(r, j); });
            A(row, var_cols + r) = 1.0;  // slack
        }
        int sl = m_le;
        for (int j = 0; j < n; ++j) {
            const VarMap& vm = vmap_[j];
            if (vm.bound_row < 0) continue;
            A(vm.bound_row, vm.col) = 1.0;
            A(vm.bound_row, var_cols + sl) = 1.0;
            b[vm.bound_row] = p_.ub[j] - p_.lb[j];
            ++sl;
        }

        for (int j = 0; j < n; ++j) {
            const VarMap& vm = vmap_[j];
            chat_[vm.col] += p_.c[j] * vm.sign;
            if (vm.col_neg >= 0) chat_[vm.col_neg] -= p_.c[j];
        }

        row_sign_.assign(rows_total_, 1.0);
        for (int i = 0; i < rows_total_; ++i) {
            if (b[i] < 0.0) {
                A.row(i) *= -1.0;
                b[i] *= -1.0;
                row_sign_[i] = -1.0;
            }
            A(i, art_begin_ + i) = 1.0;  // artificial
        }
        Ahat_ = std::move(A);
        bhat_ = std::move(b);
    }

    double phase1_objective() const {
        double v = 0.0;
        for (int i = 0; i < static_cast<int>(basis_.size()); ++i)
            if (basis_[i] >= art_begin_) v += xB_[i];
        return v;
    }

    PivotResult run_simplex(const Vec& cost, bool bar_artificials) {
        const int m = static_cast<int>(bhat_.size());
        Mat B(m, m);
        for (int iter = 0; iter < 50000; ++iter) {
            for (int i = 0; i < m; ++i) B.col(i) = Ahat_.col(basis_[i]);
            Eigen::PartialPivLU<Mat> lu(B);
            xB_ = lu.solve(bhat_);
            Vec cB(m);
            for (int i = 0; i < m; ++i) cB[i] = cost[basis_[i]];
            y_ = lu.transpose().solve(cB);

            // Bland: entering column = lowest index with negative reduced cost
            int enter = -1;
            const int limit = bar_artificials ? art_begin_ : ncols_;
            for (int j = 0; j < limit; ++j) {
                if (is_basic(j)) continue;
                const double rc = cost[j] - y_.dot(Ahat_.col(j));
                if (rc < -kPivTol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return PivotResult::Optimal;

            const Vec d = lu.solve(Ahat_.col(enter));
            int leave = -1;
            double best_ratio = kInf;
            for (int i = 0; i < m; ++i) {
                if (d[i] <= kPivTol) continue;
                const double ratio = xB_[i] / d[i];
                if (ratio < best_ratio - 1e-12 ||
                    (ratio < best_ratio + 1e-12 &&
                     (leave < 0 || basis_[i] < basis_[leave]))) {
                    best_ratio = ratio;
                    leave = i;
                }
            }
            if (leave < 0) return PivotResult::Unbounded;
            basis_[leave] = enter;
        }
        return PivotResult::IterationLimit;
    }

    bool is_basic(int j) const {
        for (int b : basis_)
            if (b == j) return true;
        return false;
    }

    void extract_solution(LpSolution& sol) const {
        const int n = p_.num_vars();
        const int m_eq = static_cast<int>(p_.b_eq.size());
        const int m_le = static_cast<int>(p_.b_le.size());
        Vec xhat = Vec::Zero(ncols_);
        for (int i = 0; i < static_cast<int>(basis_.size()); ++i)
            xhat[basis_[i]] = xB_[i];

        sol.status = LpSolution::Status::Optimal;
        sol.x = Vec(n);
        for (int j = 0; j < n; ++j) {
            const VarMap& vm = vmap_[j];
            double u = xhat[vm.col] * 1.0;
            double zj = vm.shift + vm.sign * u;
            if (vm.col_neg >= 0) zj -= xhat[vm.col_neg];
            sol.x[j] = zj;
        }
        sol.objective = p_.c.dot(sol.x);
        sol.basic_values = xB_;

        // row duals: L-convention multiplier is -row_sign * y
        sol.dual_eq = Vec(m_eq);
        for (int i = 0; i < m_eq; ++i) sol.dual_eq[i] = -row_sign_[i] * y_[i];
        sol.dual_le = Vec(m_le);
        for (int r = 0; r < m_le; ++r) {
            const double v = -row_sign_[m_eq + r] * y_[m_eq + r];
            sol.dual_le[r] = std::max(v, 0.0);
        }
        // bound duals from stationarity: c + A_eq'l + A_le'n - mu_lb + mu_ub = 0
        sol.dual_lb = Vec::Zero(n);
        sol.dual_ub = Vec::Zero(n);
        Vec stat = p_.c;
        if (m_eq > 0) stat += p_.A_eq.transpose() * sol.dual_eq;
        if (m_le > 0) stat += p_.A_le.transpose() * sol.dual_le;
        for (int j = 0; j < n; ++j) {
            const bool lo = std::isfinite(p_.lb[j]), hi = std::isfinite(p_.ub[j]);
            if (lo && stat[j] > 0.0) sol.dual_lb[j] = stat[j];
            if (hi && stat[j] < 0.0) sol.dual_ub[j] = -stat[j];
        }
    }
};

inline LpSolution solve_lp(const LpProblem& p) { return SimplexSolver(p).solve(); }

/// Extract the dense LP data of a fully linear NlpProblem. Throws BuildError
/// if any constraint row or the objective has nonlinear terms.
struct ProblemLp {
    LpProblem lp;
    int rows_conservation = 0;
    int rows_equality = 0;
    int rows_inequality = 0;
    double objective_constant = 0.0;
};

inline ProblemLp lp_from_problem(const NlpProblem& problem) {
    const int n = problem.layout().total();
    auto dense_row = [&](const Expr& e) {
        if (!e.is_linear()) throw BuildError("problem is not linear");
        Vec a = Vec::Zero(n);
        for (const auto& t : e.lin) a[t.var] += t.coef;
        return a;
    };
    ProblemLp out;
    const auto& cons = problem.family(FamilyKind::Conservation);
    const auto& heq = problem.family(FamilyKind::SystemEquality);
    const auto& gin = problem.family(FamilyKind::SystemInequality);
    out.rows_conservation = cons.count();
    out.rows_equality = heq.count();
    out.rows_inequality = gin.count();

    const int m_eq = cons.count() + heq.count();
    out.lp.A_eq = Mat::Zero(m_eq, n);
    out.lp.b_eq = Vec::Zero(m_eq);
    int r = 0;
    for (const auto* fam : {&cons, &heq}) {
        for (const auto& row : fam->rows) {
            out.lp.A_eq.row(r) = dense_row(row).transpose();
            out.lp.b_eq[r] = -row.constant;
            ++r;
        }
    }
    out.lp.A_le = Mat::Zero(gin.count(), n);
    out.lp.b_le = Vec::Zero(gin.count());
    for (int i = 0; i < gin.count(); ++i) {
        out.lp.A_le.row(i) = dense_row(gin.rows[i]).transpose();
        out.lp.b_le[i] = -gin.rows[i].constant;
    }
    if (!problem.objective().is_linear()) throw BuildError("objective is not linear");
    out.lp.c = Vec::Zero(n);
    for (const auto& t : problem.objective().lin) out.lp.c[t.var] += t.coef;
    out.objective_constant = problem.objective().constant;

    const double inf = std::numeric_limits<double>::infinity();
    out.lp.lb = Vec::Constant(n, -inf);
    out.lp.ub = Vec::Constant(n, inf);
    const auto& L = problem.layout();
    for (int k = 0; k < L.n_traded; ++k) {
        out.lp.lb[L.q_index(k)] = problem.q_lower()[k];
        out.lp.ub[L.q_index(k)] = problem.q_upper()[k];
    }
    return out;
}

struct LpOracleResult {
    LpSolution::Status status = LpSolution::Status::Infeasible;
    PrimalDualPoint point;
    double objective = 0.0;
};

/// Solve a linear NlpProblem with the simplex method and map the duals back
/// onto the problem's constraint families. Independent of the interior-point
/// path; used for cross-checks and the `oracle` command.
inline LpOracleResult solve_problem_lp(const NlpProblem& problem) {
    ProblemLp data = lp_from_problem(problem);
    LpSolution s = solve_lp(data.lp);
    LpOracleResult out;
    out.status = s.status;
    if (s.status != LpSolution::Status::Optimal) return out;
    const auto& L = problem.layout();
    out.point.primal = s.x;
    out.point.lambda = s.dual_eq.segment(0, data.rows_conservation);
    out.point.nu_e = s.dual_eq.segment(data.rows_conservation, data.rows_equality);
    out.point.nu_i = s.dual_le;
    out.point.mu_lower = Vec::Zero(L.n_traded);
    out.point.mu_upper = Vec::Zero(L.n_traded);
    for (int k = 0; k < L.n_traded; ++k) {
        out.point.mu_lower[k] = s.dual_lb[L.q_index(k)];
        out.point.mu_upper[k] = s.dual_ub[L.q_index(k)];
    }
    out.objective = s.objective + data.objective_constant;
    return out;
}

}  // namespace flowmarket
