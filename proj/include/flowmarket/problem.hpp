#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "flowmarket/expr.hpp"

namespace flowmarket {

/// Block layout of the flat primal vector: traded quantities q, exposed
/// (market-facing) system variables x, dependent system variables y.
struct VariableLayout {
    int n_traded = 0;
    int n_exposed = 0;
    int n_dependent = 0;

    int q_offset() const { return 0; }
    int x_offset() const { return n_traded; }
    int y_offset() const { return n_traded + n_exposed; }
    int total() const { return n_traded + n_exposed + n_dependent; }

    int q_index(int k) const { return q_offset() + k; }
    int x_index(int i) const { return x_offset() + i; }
    int y_index(int i) const { return y_offset() + i; }
};

enum class FamilyKind : int {
    NominationLower = 0,
    NominationUpper = 1,
    Conservation = 2,
    SystemEquality = 3,
    SystemInequality = 4,
};
constexpr int kNumFamilies = 5;

inline const char* family_name(FamilyKind k) {
    switch (k) {
        case FamilyKind::NominationLower: return "nomination_lower";
        case FamilyKind::NominationUpper: return "nomination_upper";
        case FamilyKind::Conservation: return "conservation";
        case FamilyKind::SystemEquality: return "system_equality";
        case FamilyKind::SystemInequality: return "system_inequality";
    }
    return "?";
}

inline bool family_is_equality(FamilyKind k) {
    return k == FamilyKind::Conservation || k == FamilyKind::SystemEquality;
}

/// One tagged group of constraint rows sharing an orientation:
/// equality rows are satisfied at 0, inequality rows when <= 0.
struct ConstraintFamily {
    FamilyKind kind = FamilyKind::SystemEquality;
    std::vector<Expr> rows;

    int count() const { return static_cast<int>(rows.size()); }
    bool is_equality() const { return family_is_equality(kind); }

    Vec residual(const Vec& z, EvalMode mode = EvalMode::Exact) const {
        Vec r(count());
        for (int i = 0; i < count(); ++i) {
            r[i] = rows[i].value(z, mode);
            if (!std::isfinite(r[i]))
                throw NumericDomainError(std::string("non-finite residual in family ") +
                                         family_name(kind) + " row " + std::to_string(i));
        }
        return r;
    }

    /// Sparse Jacobian with an evaluation-independent pattern.
    SpMat jacobian(const Vec& z, int ncols, EvalMode mode = EvalMode::Exact) const {
        std::vector<Triplet> trips;
        for (int i = 0; i < count(); ++i) rows[i].add_jacobian_row(z, i, trips, mode);
        for (const auto& t : trips)
            if (!std::isfinite(t.value()))
                throw NumericDomainError(std::string("non-finite Jacobian entry in family ") +
                                         family_name(kind));
        SpMat J(count(), ncols);
        J.setFromTriplets(trips.begin(), trips.end());
        return J;
    }
};

/// Primal point plus the dual variables of every constraint family.
struct PrimalDualPoint {
    Vec primal;    // (q, x, y)
    Vec mu_lower;  // duals of q_lower - q <= 0
    Vec mu_upper;  // duals of q - q_upper <= 0
    Vec lambda;    // duals of the conservation rows
    Vec nu_e;      // duals of the system equalities
    Vec nu_i;      // duals of the system inequalities

    const Vec& dual(FamilyKind k) const {
        switch (k) {
            case FamilyKind::NominationLower: return mu_lower;
            case FamilyKind::NominationUpper: return mu_upper;
            case FamilyKind::Conservation: return lambda;
            case FamilyKind::SystemEquality: return nu_e;
            case FamilyKind::SystemInequality: return nu_i;
        }
        return mu_lower;
    }

    double dual_sign_violation() const {
        double worst = 0.0;
        for (const Vec* v : {&mu_lower, &mu_upper, &nu_i})
            if (v->size() > 0) worst = std::min(worst, v->minCoeff());
        return worst;  // <= 0; most negative entry among sign-constrained duals
    }
};

/// Block-structured nonlinear program:
///
///   min  objective(q, y)
///   s.t. q_lower <= q <= q_upper          (nomination bounds)
///        x - P q + d = 0                  (conservation; P maps traded
///                                          entries to exposed rows)
///        H(x, y) = 0                      (system equalities)
///        G(x, y) <= 0                     (system inequalities)
///
/// Immutable after finalize(); evaluation is const and re-entrant.
class NlpProblem {
public:
    NlpProblem(int n_traded, int n_exposed, int n_dependent) {
        layout_.n_traded = n_traded;
        layout_.n_exposed = n_exposed;
        layout_.n_dependent = n_dependent;
        q_lower_ = Vec::Zero(n_traded);
        q_upper_ = Vec::Zero(n_traded);
        fixed_outflow_ = Vec::Zero(n_exposed);
        trade_node_.resize(n_traded);
        for (int k = 0; k < n_traded; ++k) trade_node_[k] = k;
    }

    const VariableLayout& layout() const { return layout_; }
    const Vec& q_lower() const { return q_lower_; }
    const Vec& q_upper() const { return q_upper_; }
    const Vec& fixed_outflow() const { return fixed_outflow_; }
    const std::vector<int>& trade_node() const { return trade_node_; }
    const Expr& objective() const { return objective_; }
    const Vec& initial_primal() const { return initial_primal_; }

    void set_bounds(const Vec& lo, const Vec& hi) {
        q_lower_ = lo;
        q_upper_ = hi;
    }
    void set_fixed_outflow(const Vec& d) { fixed_outflow_ = d; }
    void set_trade_node(std::vector<int> nodes) { trade_node_ = std::move(nodes); }
    void set_objective(Expr e) { objective_ = std::move(e); }
    void set_initial_primal(const Vec& z0) { initial_primal_ = z0; }
    void add_equality(Expr row) { h_rows_.push_back(std::move(row)); }
    void add_inequality(Expr row) { g_rows_.push_back(std::move(row)); }

    int num_equalities() const { return static_cast<int>(h_rows_.size()); }
    int num_inequalities() const { return static_cast<int>(g_rows_.size()); }

    const ConstraintFamily& family(FamilyKind k) const {
        return families_[static_cast<int>(k)];
    }
    const std::array<ConstraintFamily, kNumFamilies>& families() const { return families_; }

    /// Validate and freeze the problem. Builds the five constraint families.
    void finalize() {
        const int n = layout_.total();
        if (layout_.n_traded < 0 || layout_.n_exposed < 0 || layout_.n_dependent < 0)
            throw BuildError("negative block size");
        if (q_lower_.size() != layout_.n_traded || q_upper_.size() != layout_.n_traded)
            throw StructuralError("nomination bound length mismatch");
        if (fixed_outflow_.size() != layout_.n_exposed)
            throw StructuralError("fixed outflow length mismatch");
        if (static_cast<int>(trade_node_.size()) != layout_.n_traded)
            throw StructuralError("trade node map length mismatch");
        for (int k = 0; k < layout_.n_traded; ++k) {
            if (trade_node_[k] < 0 || trade_node_[k] >= layout_.n_exposed)
                throw BuildError("trade node index out of range");
            if (!(q_lower_[k] <= q_upper_[k]))
                throw BuildError("nomination bounds violate q_lower <= q_upper at entry " +
                                 std::to_string(k));
            if (!std::isfinite(q_lower_[k]) || !std::isfinite(q_upper_[k]))
                throw BuildError("nomination bounds must be finite");
        }
        auto check_rows = [&](const std::vector<Expr>& rows, const char* what) {
            for (size_t i = 0; i < rows.size(); ++i) {
                if (!rows[i].has_variables())
                    throw BuildError(std::string("constant ") + what + " row " +
                                     std::to_string(i) + " is degenerate");
                if (rows[i].max_var_index() >= n)
                    throw StructuralError(std::string(what) + " row " + std::to_string(i) +
                                          " references variable out of range");
            }
        };
        check_rows(h_rows_, "equality");
        check_rows(g_rows_, "inequality");
        if (objective_.max_var_index() >= n)
            throw StructuralError("objective references variable out of range");

        auto& fam = families_;
        fam[0].kind = FamilyKind::NominationLower;
        fam[1].kind = FamilyKind::NominationUpper;
        fam[2].kind = FamilyKind::Conservation;
        fam[3].kind = FamilyKind::SystemEquality;
        fam[4].kind = FamilyKind::SystemInequality;
        fam[0].rows.clear();
        fam[1].rows.clear();
        fam[2].rows.clear();
        for (int k = 0; k < layout_.n_traded; ++k) {
            Expr lo;  // q_lower - q <= 0
            lo.add_constant(q_lower_[k]).add_linear(layout_.q_index(k), -1.0);
            fam[0].rows.push_back(std::move(lo));
            Expr hi;  // q - q_upper <= 0
            hi.add_constant(-q_upper_[k]).add_linear(layout_.q_index(k), 1.0);
            fam[1].rows.push_back(std::move(hi));
        }
        for (int i = 0; i < layout_.n_exposed; ++i) {
            Expr c;  // x - P q + d = 0
            c.add_constant(fixed_outflow_[i]).add_linear(layout_.x_index(i), 1.0);
            for (int k = 0; k < layout_.n_traded; ++k)
                if (trade_node_[k] == i) c.add_linear(layout_.q_index(k), -1.0);
            fam[2].rows.push_back(std::move(c));
        }
        fam[3].rows = h_rows_;
        fam[4].rows = g_rows_;

        if (initial_primal_.size() == 0) {
            Vec z0 = Vec::Zero(n);
            for (int k = 0; k < layout_.n_traded; ++k)
                z0[layout_.q_index(k)] = 0.5 * (q_lower_[k] + q_upper_[k]);
            for (int i = 0; i < layout_.n_exposed; ++i) {
                double inflow = 0.0;
                for (int k = 0; k < layout_.n_traded; ++k)
                    if (trade_node_[k] == i) inflow += z0[layout_.q_index(k)];
                z0[layout_.x_index(i)] = inflow - fixed_outflow_[i];
            }
            initial_primal_ = z0;
        } else if (initial_primal_.size() != n) {
            throw StructuralError("initial primal length mismatch");
        }
        finalized_ = true;
    }

    bool finalized() const { return finalized_; }

    void require_primal(const Vec& z) const {
        if (z.size() != layout_.total())
            throw StructuralError("primal vector length " + std::to_string(z.size()) +
                                  " does not match layout total " +
                                  std::to_string(layout_.total()));
    }

    void require_point(const PrimalDualPoint& p) const {
        require_primal(p.primal);
        if (p.mu_lower.size() != layout_.n_traded || p.mu_upper.size() != layout_.n_traded ||
            p.lambda.size() != layout_.n_exposed ||
            p.nu_e.size() != num_equalities() || p.nu_i.size() != num_inequalities())
            throw StructuralError("dual vector lengths do not match problem families");
    }

    PrimalDualPoint zero_point() const {
        PrimalDualPoint p;
        p.primal = initial_primal_;
        p.mu_lower = Vec::Zero(layout_.n_traded);
        p.mu_upper = Vec::Zero(layout_.n_traded);
        p.lambda = Vec::Zero(layout_.n_exposed);
        p.nu_e = Vec::Zero(num_equalities());
        p.nu_i = Vec::Zero(num_inequalities());
        return p;
    }

private:
    VariableLayout layout_;
    Vec q_lower_, q_upper_, fixed_outflow_;
    std::vector<int> trade_node_;
    Expr objective_;
    std::vector<Expr> h_rows_, g_rows_;
    std::array<ConstraintFamily, kNumFamilies> families_;
    Vec initial_primal_;
    bool finalized_ = false;
};

/// Residuals of all five families plus the objective at one primal point.
struct ConstraintValues {
    std::array<Vec, kNumFamilies> residuals;
    double objective = 0.0;

    const Vec& of(FamilyKind k) const { return residuals[static_cast<int>(k)]; }

    double max_equality_violation() const {
        double m = 0.0;
        for (FamilyKind k : {FamilyKind::Conservation, FamilyKind::SystemEquality}) {
            const Vec& r = of(k);
            if (r.size() > 0) m = std::max(m, r.cwiseAbs().maxCoeff());
        }
        return m;
    }
    double max_inequality_violation() const {
        double m = 0.0;
        for (FamilyKind k : {FamilyKind::NominationLower, FamilyKind::NominationUpper,
                             FamilyKind::SystemInequality}) {
            const Vec& r = of(k);
            if (r.size() > 0) m = std::max(m, r.maxCoeff());
        }
        return std::max(m, 0.0);
    }
    bool feasible(double tol) const {
        return max_equality_violation() <= tol && max_inequality_violation() <= tol;
    }
};

inline ConstraintValues evaluate(const NlpProblem& problem, const Vec& primal,
                                 EvalMode mode = EvalMode::Exact) {
    problem.require_primal(primal);
    ConstraintValues v;
    for (int f = 0; f < kNumFamilies; ++f)
        v.residuals[f] = problem.families()[f].residual(primal, mode);
    v.objective = problem.objective().value(primal, mode);
    if (!std::isfinite(v.objective)) throw NumericDomainError("non-finite objective value");
    return v;
}

/// The three block gradients of the Lagrangian
///   L = c + mu_lo'(q_lo - q) + mu_hi'(q - q_hi) + lambda'(x - Pq + d)
///       + nu_e' H + nu_i' G.
struct LagrangianBlocks {
    Vec grad_q, grad_x, grad_y;
    double max_norm() const {
        double m = 0.0;
        for (const Vec* v : {&grad_q, &grad_x, &grad_y})
            if (v->size() > 0) m = std::max(m, v->cwiseAbs().maxCoeff());
        return m;
    }
};

inline Vec lagrangian_gradient_flat(const NlpProblem& problem, const PrimalDualPoint& point,
                                    EvalMode mode = EvalMode::Exact) {
    problem.require_point(point);
    const Vec& z = point.primal;
    Vec g = Vec::Zero(problem.layout().total());
    problem.objective().add_gradient(z, 1.0, g, mode);
    for (const auto& fam : problem.families()) {
        const Vec& dual = point.dual(fam.kind);
        for (int i = 0; i < fam.count(); ++i)
            if (dual[i] != 0.0) fam.rows[i].add_gradient(z, dual[i], g, mode);
    }
    for (int i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i]))
            throw NumericDomainError("non-finite Lagrangian gradient entry");
    return g;
}

inline LagrangianBlocks lagrangian_gradient(const NlpProblem& problem,
                                            const PrimalDualPoint& point,
                                            EvalMode mode = EvalMode::Exact) {
    const Vec g = lagrangian_gradient_flat(problem, point, mode);
    const auto& L = problem.layout();
    LagrangianBlocks b;
    b.grad_q = g.segment(L.q_offset(), L.n_traded);
    b.grad_x = g.segment(L.x_offset(), L.n_exposed);
    b.grad_y = g.segment(L.y_offset(), L.n_dependent);
    return b;
}

/// Appends full symmetric triplets of
///   obj_weight * Hess(objective) + sum over families of dual-weighted
///   constraint row Hessians.
inline void add_lagrangian_hessian(const NlpProblem& problem, const PrimalDualPoint& point,
                                   double obj_weight, std::vector<Triplet>& out,
                                   EvalMode mode = EvalMode::Exact) {
    const Vec& z = point.primal;
    problem.objective().add_hessian(z, obj_weight, out, mode);
    for (const auto& fam : problem.families()) {
        const Vec& dual = point.dual(fam.kind);
        for (int i = 0; i < fam.count(); ++i)
            if (dual[i] != 0.0) fam.rows[i].add_hessian(z, dual[i], out, mode);
    }
}

}  // namespace flowmarket
