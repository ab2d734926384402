#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "flowmarket/simplex.hpp"
#include "flowmarket/star.hpp"

namespace flowmarket {

// Everything here recomputes from the problem definition and never trusts
// solver internals.

struct KktReport {
    double stationarity_q = 0.0;
    double stationarity_x = 0.0;
    double stationarity_y = 0.0;
    double primal_feasibility = 0.0;
    double complementarity = 0.0;
    double dual_sign_violation = 0.0;  // max(0, -most negative mu or nu_i)
    double tol = 1e-6;
    bool pass = false;
};

inline KktReport kkt_residuals(const NlpProblem& problem, const PrimalDualPoint& point,
                               double tol = 1e-6) {
    problem.require_point(point);
    KktReport r;
    r.tol = tol;
    const auto blocks = lagrangian_gradient(problem, point, EvalMode::Exact);
    r.stationarity_q = blocks.grad_q.size() ? blocks.grad_q.cwiseAbs().maxCoeff() : 0.0;
    r.stationarity_x = blocks.grad_x.size() ? blocks.grad_x.cwiseAbs().maxCoeff() : 0.0;
    r.stationarity_y = blocks.grad_y.size() ? blocks.grad_y.cwiseAbs().maxCoeff() : 0.0;
    const auto vals = evaluate(problem, point.primal, EvalMode::Exact);
    r.primal_feasibility =
        std::max(vals.max_equality_violation(), vals.max_inequality_violation());
    double comp = 0.0;
    for (FamilyKind k : {FamilyKind::NominationLower, FamilyKind::NominationUpper,
                         FamilyKind::SystemInequality}) {
        const Vec& res = vals.of(k);
        const Vec& dual = point.dual(k);
        for (int i = 0; i < res.size(); ++i)
            comp = std::max(comp, std::abs(res[i] * dual[i]));
    }
    r.complementarity = comp;
    r.dual_sign_violation = std::max(0.0, -point.dual_sign_violation());
    r.pass = std::max({r.stationarity_q, r.stationarity_x, r.stationarity_y}) <= tol &&
             r.primal_feasibility <= tol && r.complementarity <= tol &&
             r.dual_sign_violation <= tol;
    return r;
}

struct MfcqCertificate {
    int equality_rows = 0;
    int equality_rank = 0;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    bool rank_ok = false;
    int active_inequalities = 0;
    double t_star = 0.0;
    Vec delta;  // strict-decrease direction over (x, y)
    bool holds = false;
    bool conclusive = true;
    std::string note;
};

/// Constraint-qualification certificate at a primal point:
/// (i) the system equality Jacobian over (x, y) has full row rank by a
///     singular-value margin (conservation rows always have full rank in x
///     through their distinct unit columns and are excluded), and
/// (ii) a direction delta with grad g_i' delta <= -t for every active
///      inequality and grad h_j' delta = 0, found by maximizing t with
///      |delta|_inf <= 1, has t* above the direction tolerance.
inline MfcqCertificate mfcq_certificate(const NlpProblem& problem, const Vec& primal,
                                        double active_tol = 1e-6, double rank_tol = 1e-8,
                                        double direction_tol = 1e-8) {
    problem.require_primal(primal);
    MfcqCertificate cert;
    const auto& L = problem.layout();
    const int n_xy = L.n_exposed + L.n_dependent;
    const auto& heq = problem.family(FamilyKind::SystemEquality);
    const auto& gin = problem.family(FamilyKind::SystemInequality);
    cert.equality_rows = heq.count();

    Mat Jh_xy;
    if (heq.count() > 0) {
        const Mat Jh = Mat(heq.jacobian(primal, L.total(), EvalMode::Exact));
        Jh_xy = Jh.rightCols(n_xy);
        Eigen::JacobiSVD<Mat> svd(Jh_xy);
        const Vec sv = svd.singularValues();
        cert.sigma_max = sv.size() ? sv[0] : 0.0;
        cert.sigma_min = sv.size() ? sv[sv.size() - 1] : 0.0;
        int rank = 0;
        for (int i = 0; i < sv.size(); ++i)
            if (sv[i] >= rank_tol * std::max(cert.sigma_max, 1e-300)) ++rank;
        cert.equality_rank = rank;
        cert.rank_ok = heq.count() <= n_xy && rank == heq.count();
    } else {
        cert.rank_ok = true;
    }

    const Vec g = gin.residual(primal, EvalMode::Exact);
    std::vector<int> active;
    for (int i = 0; i < g.size(); ++i)
        if (g[i] >= -active_tol) active.push_back(i);
    cert.active_inequalities = static_cast<int>(active.size());

    // LP over (delta, t): max t s.t. Jg_active delta + t <= 0, Jh delta = 0,
    // |delta|_inf <= 1, t <= 1
    const int nv = n_xy + 1;
    LpProblem lp;
    lp.c = Vec::Zero(nv);
    lp.c[n_xy] = -1.0;
    lp.lb = Vec::Constant(nv, -1.0);
    lp.ub = Vec::Constant(nv, 1.0);
    lp.lb[n_xy] = -std::numeric_limits<double>::infinity();
    lp.A_eq = Mat::Zero(heq.count(), nv);
    if (heq.count() > 0) lp.A_eq.leftCols(n_xy) = Jh_xy;
    lp.b_eq = Vec::Zero(heq.count());
    lp.A_le = Mat::Zero(static_cast<int>(active.size()), nv);
    lp.b_le = Vec::Zero(static_cast<int>(active.size()));
    if (!active.empty()) {
        const Mat Jg = Mat(gin.jacobian(primal, L.total(), EvalMode::Exact));
        for (size_t r = 0; r < active.size(); ++r) {
            lp.A_le.row(static_cast<int>(r)).segment(0, n_xy) =
                Jg.row(active[r]).tail(n_xy);
            lp.A_le(static_cast<int>(r), n_xy) = 1.0;
        }
    }
    try {
        const LpSolution s = solve_lp(lp);
        if (s.status != LpSolution::Status::Optimal) {
            cert.conclusive = false;
            cert.note = "direction LP did not reach an optimum";
            return cert;
        }
        cert.t_star = s.x[n_xy];
        cert.delta = s.x.segment(0, n_xy);
    } catch (const std::exception& e) {
        cert.conclusive = false;
        cert.note = std::string("direction LP failed: ") + e.what();
        return cert;
    }
    cert.holds = cert.rank_ok && cert.t_star > direction_tol;
    return cert;
}

struct RevenueReport {
    double revenue = 0.0;              // -lambda' x
    double revenue_via_outflow = 0.0;  // lambda' (d - P q)
    Vec price;                         // lambda
    Vec net_inflow;                    // x
    double rent_system_inequality = 0.0;  // nu_i' grad_x G x
    double rent_system_equality = 0.0;    // nu_e' grad_x H x
    double tol_rev = 0.0;
    bool adequate = false;
};

inline RevenueReport revenue(const NlpProblem& problem, const PrimalDualPoint& point) {
    problem.require_point(point);
    const auto& L = problem.layout();
    RevenueReport r;
    r.net_inflow = point.primal.segment(L.x_offset(), L.n_exposed);
    r.price = point.lambda;
    r.revenue = -point.lambda.dot(r.net_inflow);
    Vec inflow = Vec::Zero(L.n_exposed);  // P q
    for (int k = 0; k < L.n_traded; ++k)
        inflow[problem.trade_node()[k]] += point.primal[L.q_index(k)];
    r.revenue_via_outflow = point.lambda.dot(problem.fixed_outflow() - inflow);
    auto x_rent = [&](FamilyKind kind, const Vec& dual) {
        const auto& fam = problem.family(kind);
        if (fam.count() == 0) return 0.0;
        const SpMat J = fam.jacobian(point.primal, L.total(), EvalMode::Exact);
        Vec row_dot = J.middleCols(L.x_offset(), L.n_exposed) * r.net_inflow;
        return dual.dot(row_dot);
    };
    r.rent_system_inequality = x_rent(FamilyKind::SystemInequality, point.nu_i);
    r.rent_system_equality = x_rent(FamilyKind::SystemEquality, point.nu_e);
    r.tol_rev = 1e-6 * (1.0 + r.price.norm() * r.net_inflow.norm());
    r.adequate = r.revenue >= -r.tol_rev;
    return r;
}

struct AuditOptions {
    double kkt_tol = 1e-6;
    double active_tol = 1e-6;
    double star_tol = 1e-8;
    double step_d_tol = 1e-6;
    int star_samples = 101;
};

struct AuditReport {
    KktReport kkt;
    MfcqCertificate mfcq;
    RevenueReport revenue;
    std::optional<ScalingPath> star;
    std::optional<std::string> star_hypothesis_failure;
    std::optional<double> step_d;  // -nu_i'(grad_x G dx + grad_y G dy) along the path
    std::string verdict;
    std::vector<std::string> reasons;
    bool certified = false;
    bool inconclusive = false;
};

/// Run every certificate on a solved point and combine them: the verdict is
/// "adequate" only when the KKT residuals pass, the constraint qualification
/// holds, the star property is verified along the constructed path, and the
/// revenue is nonnegative within tolerance.
inline AuditReport adequacy_audit(const NlpProblem& problem, const PrimalDualPoint& point,
                                  const std::optional<StarCheck>& star_check,
                                  AuditOptions opt = {}) {
    AuditReport rep;
    rep.kkt = kkt_residuals(problem, point, opt.kkt_tol);
    rep.mfcq = mfcq_certificate(problem, point.primal, opt.active_tol);
    rep.revenue = revenue(problem, point);

    if (!rep.kkt.pass) {
        const double stat =
            std::max({rep.kkt.stationarity_q, rep.kkt.stationarity_x, rep.kkt.stationarity_y});
        if (stat > opt.kkt_tol) rep.reasons.push_back("stationarity");
        if (rep.kkt.primal_feasibility > opt.kkt_tol) rep.reasons.push_back("feasibility");
        if (rep.kkt.complementarity > opt.kkt_tol) rep.reasons.push_back("complementarity");
        if (rep.kkt.dual_sign_violation > opt.kkt_tol) rep.reasons.push_back("dual sign");
    }
    if (!rep.mfcq.conclusive) {
        rep.inconclusive = true;
        rep.reasons.push_back("constraint qualification inconclusive: " + rep.mfcq.note);
    } else if (!rep.mfcq.holds) {
        rep.reasons.push_back("constraint qualification");
    }

    bool star_ok = false;
    bool hypothesis_ok = false;
    if (star_check) {
        const auto failure = star_check->hypothesis(point.primal);
        if (failure) {
            rep.star_hypothesis_failure = failure;
        } else {
            hypothesis_ok = true;
            rep.star = star_check->run(point.primal);
            star_ok = rep.star->feasible_all(opt.star_tol);
            if (!star_ok) rep.reasons.push_back("star property");
            const Vec delta = star_check->direction_at_one(point.primal);
            const auto& gin = problem.family(FamilyKind::SystemInequality);
            if (gin.count() > 0) {
                const SpMat Jg =
                    gin.jacobian(point.primal, problem.layout().total(), EvalMode::Exact);
                rep.step_d = -point.nu_i.dot(Jg * delta);
            } else {
                rep.step_d = 0.0;
            }
        }
    } else {
        rep.inconclusive = true;
        rep.reasons.push_back("no scaling construction registered for this formulation");
    }
    if (!rep.revenue.adequate) rep.reasons.push_back("revenue");

    if (star_check && rep.star_hypothesis_failure) {
        rep.verdict = "hypothesis not satisfied; adequacy not certified";
    } else if (rep.inconclusive) {
        rep.verdict = "inconclusive";
    } else if (rep.kkt.pass && rep.mfcq.holds && hypothesis_ok && star_ok &&
               rep.revenue.adequate) {
        rep.certified = true;
        rep.verdict = "adequate";
    } else {
        rep.verdict = "failed";
    }
    return rep;
}

}  // namespace flowmarket
