#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "flowmarket/problem.hpp"

namespace flowmarket {

struct SolverOptions {
    double tol_kkt = 1e-8;
    int max_iter = 200;
    double initial_barrier = 0.1;
    double barrier_reduction = 0.2;   // in (0,1)
    double fraction_to_boundary = 0.995;
    double regularization_floor = 1e-10;
    enum class Init { Flat, Warm };
    Init initialization = Init::Flat;
    PrimalDualPoint warm_start;

    void validate() const {
        if (!(tol_kkt > 0) || max_iter <= 0 || !(initial_barrier > 0) ||
            !(barrier_reduction > 0 && barrier_reduction < 1) ||
            !(fraction_to_boundary > 0 && fraction_to_boundary < 1) ||
            !(regularization_floor > 0))
            throw BuildError("invalid solver options");
    }
};

struct IterationRecord {
    int iteration;
    double stationarity;
    double feasibility;
    double complementarity;
};

struct SolveOutcome {
    enum class Status { Optimal, MaxIter, Infeasible, NumericFailure };
    Status status = Status::NumericFailure;
    PrimalDualPoint point;
    int iterations = 0;
    std::vector<IterationRecord> kkt_residual_history;
    double objective = 0.0;
    std::string message;
};

inline const char* status_name(SolveOutcome::Status s) {
    switch (s) {
        case SolveOutcome::Status::Optimal: return "optimal";
        case SolveOutcome::Status::MaxIter: return "max_iter";
        case SolveOutcome::Status::Infeasible: return "infeasible";
        case SolveOutcome::Status::NumericFailure: return "numeric_failure";
    }
    return "?";
}

/// Slack handling for the system inequalities: each row g_j <= 0 becomes the
/// equality g_j + s_j = 0 with s_j kept strictly positive by the barrier. The
/// dual of the slacked row equals nu_i of the original row.
struct SlackForm {
    static Vec initial_slack(const NlpProblem& problem, const Vec& primal,
                             EvalMode mode = EvalMode::Exact, double floor = 1e-2) {
        const Vec g = problem.family(FamilyKind::SystemInequality).residual(primal, mode);
        Vec s(g.size());
        for (int j = 0; j < g.size(); ++j) s[j] = std::max(-g[j], floor);
        return s;
    }
};

/// Primal-dual interior-point method with a monotone barrier schedule,
/// exact second derivatives, sparse LDL^T KKT solves with inertia
/// correction, and an l1-penalty Armijo line search. Deterministic.
class InteriorPointSolver {
public:
    InteriorPointSolver(const NlpProblem& problem, SolverOptions options)
        : P_(problem), opt_(options) {
        opt_.validate();
        if (!P_.finalized()) throw BuildError("problem must be finalized before solving");
        setup_indices();
    }

    SolveOutcome solve() {
        SolveOutcome out;
        init_iterates();
        double mu = opt_.initial_barrier;
        const double mu_min = opt_.tol_kkt / 10.0;
        mode_ = has_smoothing_ ? EvalMode::Smoothed : EvalMode::Exact;
        int ls_failures = 0;
        double rho = 1.0;  // merit penalty, raised above the dual norm

        for (int iter = 0; iter <= opt_.max_iter; ++iter) {
            Evaluation ev = evaluate_all();
            const double e_stat = ev.stat_inf;
            const double e_feas = ev.feas_inf;
            const double e_comp = ev.comp_inf;
            out.kkt_residual_history.push_back({iter, e_stat, e_feas, e_comp});
            out.iterations = iter;

            if (e_stat <= opt_.tol_kkt && e_feas <= opt_.tol_kkt && e_comp <= opt_.tol_kkt) {
                if (mode_ == EvalMode::Smoothed) {
                    // converged on the smoothed model: finish on the exact one
                    mode_ = EvalMode::Exact;
                    continue;
                }
                out.status = SolveOutcome::Status::Optimal;
                finalize_point(out);
                return out;
            }
            if (iter == opt_.max_iter) break;

            // monotone barrier schedule
            const double e_mu = std::max({ev.stat_inf, ev.slack_feas_inf, comp_mu_inf(ev, mu)});
            if (e_mu <= mu && mu > mu_min)
                mu = std::max(mu_min, opt_.barrier_reduction * mu);

            Step step;
            if (!compute_step(ev, mu, step)) {
                out.status = SolveOutcome::Status::NumericFailure;
                out.message = "KKT system singular after maximal regularization";
                finalize_point(out);
                return out;
            }

            // raise the penalty above the post-step dual norm
            double dual_norm = 0.0;
            for (int i = 0; i < m_total_; ++i)
                dual_norm = std::max(dual_norm, std::abs(nu_[i] + step.dnu[i]));
            rho = std::max(rho, 1.1 * dual_norm + 0.1);

            const double alpha_p_max = primal_boundary_step(step);
            const double alpha_d = dual_boundary_step(step);

            double alpha = alpha_p_max;
            const double phi0 = merit(z_, s_, mu, rho);
            const double d_est = merit_slope(ev, step, mu, rho);
            bool accepted = false;
            if (d_est >= -1e-14 * (1.0 + std::abs(phi0))) {
                accepted = true;  // no descent predicted: near-converged dual move
            } else {
                for (int bt = 0; bt < 40; ++bt) {
                    Vec z_try = z_;
                    for (int i = 0; i < n_free_; ++i) z_try[free_idx_[i]] += alpha * step.dz[i];
                    Vec s_try = s_ + alpha * step.ds;
                    const double phi = merit(z_try, s_try, mu, rho);
                    if (phi <= phi0 + 1e-4 * alpha * d_est + 1e-12 * (1.0 + std::abs(phi0))) {
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
            }
            if (!accepted) {
                ++ls_failures;
                if (ls_failures >= 8) {
                    out.status = ev.feas_inf > 1e-6 ? SolveOutcome::Status::Infeasible
                                                    : SolveOutcome::Status::NumericFailure;
                    out.message = ev.feas_inf > 1e-6
                                      ? "line search stalled with infeasible constraints"
                                      : "line search stalled";
                    finalize_point(out);
                    return out;
                }
            } else {
                ls_failures = 0;
            }

            for (int i = 0; i < n_free_; ++i) z_[free_idx_[i]] += alpha * step.dz[i];
            s_ += alpha * step.ds;
            nu_ += alpha_d * step.dnu;
            for (int t = 0; t < n_qfree_; ++t) {
                mu_lo_[t] += alpha_d * step.dmu_lo[t];
                mu_hi_[t] += alpha_d * step.dmu_hi[t];
            }
        }
        out.status = SolveOutcome::Status::MaxIter;
        finalize_point(out);
        return out;
    }

private:
    const NlpProblem& P_;
    SolverOptions opt_;
    EvalMode mode_ = EvalMode::Exact;
    bool has_smoothing_ = false;

    std::vector<int> free_idx_;      // free primal indices (full coordinates)
    std::vector<int> free_of_full_;  // full index -> free position or -1
    std::vector<int> fixed_q_;       // traded indices with q_lower == q_upper
    std::vector<int> qfree_k_;       // traded index of each free bound pair
    std::vector<int> qfree_pos_;     // free position of each free traded var
    int n_free_ = 0, n_qfree_ = 0;
    int m_c_ = 0, m_h_ = 0, m_g_ = 0, m_total_ = 0;

    Vec z_;      // full primal
    Vec s_;      // slacks for system inequalities
    Vec nu_;     // stacked duals (lambda, nu_e, nu_i)
    Vec mu_lo_, mu_hi_;  // bound duals for free traded vars

    struct Step {
        Vec dz, ds, dnu, dmu_lo, dmu_hi;
    };

    struct Evaluation {
        Vec grad_f;          // full objective gradient
        Vec r_c, r_h, r_g;   // family residuals (r_g unslacked)
        SpMat J_c, J_h, J_g; // free-column Jacobians
        Vec stat_free;       // dual stationarity over free vars
        double stat_inf = 0, feas_inf = 0, comp_inf = 0, slack_feas_inf = 0;
        Vec glo, ghi;        // bound gaps of free traded vars
    };

    double comp_mu_inf(const Evaluation& ev, double mu) const {
        double m = 0.0;
        for (int t = 0; t < n_qfree_; ++t) {
            m = std::max(m, std::abs(ev.glo[t] * mu_lo_[t] - mu));
            m = std::max(m, std::abs(ev.ghi[t] * mu_hi_[t] - mu));
        }
        for (int j = 0; j < m_g_; ++j)
            m = std::max(m, std::abs(s_[j] * nu_[m_c_ + m_h_ + j] - mu));
        return m;
    }

    void setup_indices() {
        const auto& L = P_.layout();
        const int n = L.total();
        free_of_full_.assign(n, -1);
        for (int k = 0; k < L.n_traded; ++k)
            if (P_.q_lower()[k] == P_.q_upper()[k]) fixed_q_.push_back(k);
        std::vector<bool> is_fixed(n, false);
        for (int k : fixed_q_) is_fixed[L.q_index(k)] = true;
        for (int i = 0; i < n; ++i) {
            if (is_fixed[i]) continue;
            free_of_full_[i] = static_cast<int>(free_idx_.size());
            free_idx_.push_back(i);
        }
        n_free_ = static_cast<int>(free_idx_.size());
        for (int k = 0; k < L.n_traded; ++k) {
            if (P_.q_lower()[k] == P_.q_upper()[k]) continue;
            qfree_k_.push_back(k);
            qfree_pos_.push_back(free_of_full_[L.q_index(k)]);
        }
        n_qfree_ = static_cast<int>(qfree_k_.size());
        m_c_ = P_.family(FamilyKind::Conservation).count();
        m_h_ = P_.num_equalities();
        m_g_ = P_.num_inequalities();
        m_total_ = m_c_ + m_h_ + m_g_;
        for (const auto& row : P_.family(FamilyKind::SystemEquality).rows)
            for (const auto& t : row.ssq)
                if (t.eps > 0.0) has_smoothing_ = true;
        for (const auto& row : P_.family(FamilyKind::SystemInequality).rows)
            for (const auto& t : row.ssq)
                if (t.eps > 0.0) has_smoothing_ = true;
    }

    void init_iterates() {
        const auto& L = P_.layout();
        z_ = (opt_.initialization == SolverOptions::Init::Warm && opt_.warm_start.primal.size())
                 ? opt_.warm_start.primal
                 : P_.initial_primal();
        P_.require_primal(z_);
        for (int k : fixed_q_) z_[L.q_index(k)] = P_.q_lower()[k];
        for (int t = 0; t < n_qfree_; ++t) {
            const int k = qfree_k_[t];
            const double lo = P_.q_lower()[k], hi = P_.q_upper()[k];
            const double margin = 0.01 * (hi - lo);
            z_[L.q_index(k)] = std::clamp(z_[L.q_index(k)], lo + margin, hi - margin);
        }
        s_ = SlackForm::initial_slack(P_, z_, mode_);
        nu_ = Vec::Zero(m_total_);
        const double mu0 = opt_.initial_barrier;
        for (int j = 0; j < m_g_; ++j)
            nu_[m_c_ + m_h_ + j] = std::clamp(mu0 / s_[j], 1e-6, 1e6);
        mu_lo_ = Vec::Zero(n_qfree_);
        mu_hi_ = Vec::Zero(n_qfree_);
        for (int t = 0; t < n_qfree_; ++t) {
            const int k = qfree_k_[t];
            const double glo = z_[L.q_index(k)] - P_.q_lower()[k];
            const double ghi = P_.q_upper()[k] - z_[L.q_index(k)];
            mu_lo_[t] = std::clamp(mu0 / glo, 1e-6, 1e6);
            mu_hi_[t] = std::clamp(mu0 / ghi, 1e-6, 1e6);
        }
        if (opt_.initialization == SolverOptions::Init::Warm) {
            const auto& w = opt_.warm_start;
            if (w.lambda.size() == m_c_ && w.nu_e.size() == m_h_ && w.nu_i.size() == m_g_) {
                nu_.segment(0, m_c_) = w.lambda;
                nu_.segment(m_c_, m_h_) = w.nu_e;
                for (int j = 0; j < m_g_; ++j)
                    nu_[m_c_ + m_h_ + j] = std::max(w.nu_i[j], 1e-6);
            }
        }
    }

    SpMat free_columns(const SpMat& J) const {
        std::vector<Triplet> trips;
        for (int k = 0; k < J.outerSize(); ++k)
            for (SpMat::InnerIterator it(J, k); it; ++it) {
                const int fc = free_of_full_[it.col()];
                if (fc >= 0) trips.emplace_back(it.row(), fc, it.value());
            }
        SpMat out(J.rows(), n_free_);
        out.setFromTriplets(trips.begin(), trips.end());
        return out;
    }

    Evaluation evaluate_all() {
        const auto& L = P_.layout();
        Evaluation ev;
        ev.r_c = P_.family(FamilyKind::Conservation).residual(z_, mode_);
        ev.r_h = P_.family(FamilyKind::SystemEquality).residual(z_, mode_);
        ev.r_g = P_.family(FamilyKind::SystemInequality).residual(z_, mode_);
        const int n = L.total();
        ev.J_c = free_columns(P_.family(FamilyKind::Conservation).jacobian(z_, n, mode_));
        ev.J_h = free_columns(P_.family(FamilyKind::SystemEquality).jacobian(z_, n, mode_));
        ev.J_g = free_columns(P_.family(FamilyKind::SystemInequality).jacobian(z_, n, mode_));
        ev.grad_f = Vec::Zero(n);
        P_.objective().add_gradient(z_, 1.0, ev.grad_f, mode_);

        // dual stationarity over free coordinates
        Vec stat = Vec::Zero(n_free_);
        for (int i = 0; i < n_free_; ++i) stat[i] = ev.grad_f[free_idx_[i]];
        stat += ev.J_c.transpose() * nu_.segment(0, m_c_);
        stat += ev.J_h.transpose() * nu_.segment(m_c_, m_h_);
        stat += ev.J_g.transpose() * nu_.segment(m_c_ + m_h_, m_g_);
        for (int t = 0; t < n_qfree_; ++t)
            stat[qfree_pos_[t]] += -mu_lo_[t] + mu_hi_[t];
        ev.stat_free = stat;
        ev.stat_inf = n_free_ ? stat.cwiseAbs().maxCoeff() : 0.0;

        double feas = 0.0;
        if (m_c_) feas = std::max(feas, ev.r_c.cwiseAbs().maxCoeff());
        if (m_h_) feas = std::max(feas, ev.r_h.cwiseAbs().maxCoeff());
        for (int j = 0; j < m_g_; ++j) feas = std::max(feas, std::max(ev.r_g[j], 0.0));
        ev.feas_inf = feas;

        double sfeas = feas;
        for (int j = 0; j < m_g_; ++j) sfeas = std::max(sfeas, std::abs(ev.r_g[j] + s_[j]));
        ev.slack_feas_inf = sfeas;

        ev.glo = Vec(n_qfree_);
        ev.ghi = Vec(n_qfree_);
        double comp = 0.0;
        for (int t = 0; t < n_qfree_; ++t) {
            const int k = qfree_k_[t];
            ev.glo[t] = z_[L.q_index(k)] - P_.q_lower()[k];
            ev.ghi[t] = P_.q_upper()[k] - z_[L.q_index(k)];
            comp = std::max(comp, std::abs(ev.glo[t] * mu_lo_[t]));
            comp = std::max(comp, std::abs(ev.ghi[t] * mu_hi_[t]));
        }
        for (int j = 0; j < m_g_; ++j) {
            const double nu_i = nu_[m_c_ + m_h_ + j];
            comp = std::max(comp, std::abs(s_[j] * nu_i));
            comp = std::max(comp, std::abs(ev.r_g[j] * nu_i));
        }
        ev.comp_inf = comp;
        return ev;
    }

    bool compute_step(const Evaluation& ev, double mu, Step& step) {
        const int dim = n_free_ + m_g_ + m_total_;
        std::vector<Triplet> base;

        // Lagrangian Hessian over free coordinates
        {
            PrimalDualPoint pt;
            pt.primal = z_;
            pt.mu_lower = Vec::Zero(P_.layout().n_traded);
            pt.mu_upper = Vec::Zero(P_.layout().n_traded);
            pt.lambda = nu_.segment(0, m_c_);
            pt.nu_e = nu_.segment(m_c_, m_h_);
            pt.nu_i = nu_.segment(m_c_ + m_h_, m_g_);
            std::vector<Triplet> htrips;
            add_lagrangian_hessian(P_, pt, 1.0, htrips, mode_);
            for (const auto& t : htrips) {
                const int r = free_of_full_[t.row()], c = free_of_full_[t.col()];
                if (r >= 0 && c >= 0) base.emplace_back(r, c, t.value());
            }
        }
        for (int t = 0; t < n_qfree_; ++t) {
            const double sigma = mu_lo_[t] / ev.glo[t] + mu_hi_[t] / ev.ghi[t];
            base.emplace_back(qfree_pos_[t], qfree_pos_[t], sigma);
        }
        for (int j = 0; j < m_g_; ++j) {
            const double nu_i = nu_[m_c_ + m_h_ + j];
            base.emplace_back(n_free_ + j, n_free_ + j, nu_i / s_[j]);
        }
        auto add_jac = [&](const SpMat& J, int row_offset) {
            for (int k = 0; k < J.outerSize(); ++k)
                for (SpMat::InnerIterator it(J, k); it; ++it) {
                    const int kr = n_free_ + m_g_ + row_offset + static_cast<int>(it.row());
                    base.emplace_back(kr, static_cast<int>(it.col()), it.value());
                    base.emplace_back(static_cast<int>(it.col()), kr, it.value());
                }
        };
        add_jac(ev.J_c, 0);
        add_jac(ev.J_h, m_c_);
        add_jac(ev.J_g, m_c_ + m_h_);
        for (int j = 0; j < m_g_; ++j) {
            const int kr = n_free_ + m_g_ + m_c_ + m_h_ + j;
            base.emplace_back(kr, n_free_ + j, 1.0);
            base.emplace_back(n_free_ + j, kr, 1.0);
        }

        // RHS
        Vec rhs = Vec::Zero(dim);
        {
            Vec r1 = ev.stat_free;
            for (int t = 0; t < n_qfree_; ++t)
                r1[qfree_pos_[t]] += -mu / ev.glo[t] + mu / ev.ghi[t] + mu_lo_[t] - mu_hi_[t];
            for (int i = 0; i < n_free_; ++i) rhs[i] = -r1[i];
            for (int j = 0; j < m_g_; ++j)
                rhs[n_free_ + j] = -(nu_[m_c_ + m_h_ + j] - mu / s_[j]);
            for (int i = 0; i < m_c_; ++i) rhs[n_free_ + m_g_ + i] = -ev.r_c[i];
            for (int i = 0; i < m_h_; ++i) rhs[n_free_ + m_g_ + m_c_ + i] = -ev.r_h[i];
            for (int j = 0; j < m_g_; ++j)
                rhs[n_free_ + m_g_ + m_c_ + m_h_ + j] = -(ev.r_g[j] + s_[j]);
        }

        // factor with inertia correction; primal regularization grows x10
        double delta_p = 0.0, delta_d = 0.0;
        Vec sol;
        for (int attempt = 0; attempt < 22; ++attempt) {
            std::vector<Triplet> trips = base;
            if (delta_p > 0.0)
                for (int i = 0; i < n_free_ + m_g_; ++i) trips.emplace_back(i, i, delta_p);
            for (int i = 0; i < m_total_; ++i) {
                const int kr = n_free_ + m_g_ + i;
                trips.emplace_back(kr, kr, -std::max(delta_d, 1e-30));
            }
            SpMat K(dim, dim);
            K.setFromTriplets(trips.begin(), trips.end());
            Eigen::SimplicialLDLT<SpMat> ldlt;
            ldlt.compute(K);
            bool ok = ldlt.info() == Eigen::Success;
            if (ok) {
                const Vec D = ldlt.vectorD();
                int pos = 0, neg = 0, zero = 0;
                for (int i = 0; i < D.size(); ++i) {
                    if (!std::isfinite(D[i]) || std::abs(D[i]) < 1e-300)
                        ++zero;
                    else if (D[i] > 0)
                        ++pos;
                    else
                        ++neg;
                }
                ok = zero == 0 && pos == n_free_ + m_g_ && neg == m_total_;
                if (ok) {
                    sol = ldlt.solve(rhs);
                    ok = sol.allFinite();
                    if (ok) {
                        // iterative refinement: the wide dynamic range of the
                        // barrier diagonals makes a single solve too noisy
                        const double target = 1e-11 * (1.0 + rhs.cwiseAbs().maxCoeff());
                        double err = std::numeric_limits<double>::infinity();
                        for (int ref = 0; ref < 10 && ok; ++ref) {
                            const Vec resid = rhs - K * sol;
                            err = resid.cwiseAbs().maxCoeff();
                            if (err <= target) break;
                            sol += ldlt.solve(resid);
                            ok = sol.allFinite();
                        }
                        ok = ok && err <= 1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff());
                    }
                }
            }
            if (ok) break;
            delta_d = opt_.regularization_floor * 0.01;
            delta_p = delta_p == 0.0 ? opt_.regularization_floor : delta_p * 10.0;
            if (delta_p > 1e8) return false;
            sol.resize(0);
        }
        if (sol.size() == 0) return false;

        step.dz = sol.segment(0, n_free_);
        step.ds = sol.segment(n_free_, m_g_);
        step.dnu = sol.segment(n_free_ + m_g_, m_total_);
        step.dmu_lo = Vec(n_qfree_);
        step.dmu_hi = Vec(n_qfree_);
        for (int t = 0; t < n_qfree_; ++t) {
            const double dq = step.dz[qfree_pos_[t]];
            step.dmu_lo[t] = mu / ev.glo[t] - mu_lo_[t] - (mu_lo_[t] / ev.glo[t]) * dq;
            step.dmu_hi[t] = mu / ev.ghi[t] - mu_hi_[t] + (mu_hi_[t] / ev.ghi[t]) * dq;
        }
        return true;
    }

    double primal_boundary_step(const Step& step) const {
        const double tau = opt_.fraction_to_boundary;
        const auto& L = P_.layout();
        double alpha = 1.0;
        for (int t = 0; t < n_qfree_; ++t) {
            const int k = qfree_k_[t];
            const double dq = step.dz[qfree_pos_[t]];
            const double glo = z_[L.q_index(k)] - P_.q_lower()[k];
            const double ghi = P_.q_upper()[k] - z_[L.q_index(k)];
            if (dq < 0.0) alpha = std::min(alpha, -tau * glo / dq);
            if (dq > 0.0) alpha = std::min(alpha, tau * ghi / dq);
        }
        for (int j = 0; j < m_g_; ++j)
            if (step.ds[j] < 0.0) alpha = std::min(alpha, -tau * s_[j] / step.ds[j]);
        return alpha;
    }

    double dual_boundary_step(const Step& step) const {
        const double tau = opt_.fraction_to_boundary;
        double alpha = 1.0;
        for (int t = 0; t < n_qfree_; ++t) {
            if (step.dmu_lo[t] < 0.0) alpha = std::min(alpha, -tau * mu_lo_[t] / step.dmu_lo[t]);
            if (step.dmu_hi[t] < 0.0) alpha = std::min(alpha, -tau * mu_hi_[t] / step.dmu_hi[t]);
        }
        for (int j = 0; j < m_g_; ++j) {
            const double nu_i = nu_[m_c_ + m_h_ + j];
            if (step.dnu[m_c_ + m_h_ + j] < 0.0)
                alpha = std::min(alpha, -tau * nu_i / step.dnu[m_c_ + m_h_ + j]);
        }
        return alpha;
    }

    double merit(const Vec& z, const Vec& s, double mu, double rho) const {
        const auto& L = P_.layout();
        double phi = P_.objective().value(z, mode_);
        for (int t = 0; t < n_qfree_; ++t) {
            const int k = qfree_k_[t];
            const double glo = z[L.q_index(k)] - P_.q_lower()[k];
            const double ghi = P_.q_upper()[k] - z[L.q_index(k)];
            if (glo <= 0.0 || ghi <= 0.0) return std::numeric_limits<double>::infinity();
            phi -= mu * (std::log(glo) + std::log(ghi));
        }
        for (int j = 0; j < m_g_; ++j) {
            if (s[j] <= 0.0) return std::numeric_limits<double>::infinity();
            phi -= mu * std::log(s[j]);
        }
        const Vec rc = P_.family(FamilyKind::Conservation).residual(z, mode_);
        const Vec rh = P_.family(FamilyKind::SystemEquality).residual(z, mode_);
        const Vec rg = P_.family(FamilyKind::SystemInequality).residual(z, mode_);
        double pen = rc.cwiseAbs().sum() + rh.cwiseAbs().sum();
        for (int j = 0; j < m_g_; ++j) pen += std::abs(rg[j] + s[j]);
        return phi + rho * pen;
    }

    double merit_slope(const Evaluation& ev, const Step& step, double mu, double rho) const {
        double d = 0.0;
        for (int i = 0; i < n_free_; ++i) d += ev.grad_f[free_idx_[i]] * step.dz[i];
        for (int t = 0; t < n_qfree_; ++t) {
            const double dq = step.dz[qfree_pos_[t]];
            d += -mu * dq / ev.glo[t] + mu * dq / ev.ghi[t];
        }
        for (int j = 0; j < m_g_; ++j) d -= mu * step.ds[j] / s_[j];
        double pen = ev.r_c.cwiseAbs().sum() + ev.r_h.cwiseAbs().sum();
        for (int j = 0; j < m_g_; ++j) pen += std::abs(ev.r_g[j] + s_[j]);
        return d - rho * pen;
    }

    void finalize_point(SolveOutcome& out) {
        const auto& L = P_.layout();
        PrimalDualPoint pt;
        pt.primal = z_;
        pt.lambda = nu_.segment(0, m_c_);
        pt.nu_e = nu_.segment(m_c_, m_h_);
        pt.nu_i = nu_.segment(m_c_ + m_h_, m_g_);
        pt.mu_lower = Vec::Zero(L.n_traded);
        pt.mu_upper = Vec::Zero(L.n_traded);
        for (int t = 0; t < n_qfree_; ++t) {
            pt.mu_lower[qfree_k_[t]] = mu_lo_[t];
            pt.mu_upper[qfree_k_[t]] = mu_hi_[t];
        }
        if (!fixed_q_.empty()) {
            // recover the free multiplier of pinned nominations from
            // stationarity and split it by sign
            Vec g = Vec::Zero(L.total());
            P_.objective().add_gradient(z_, 1.0, g, mode_);
            for (FamilyKind k : {FamilyKind::Conservation, FamilyKind::SystemEquality,
                                 FamilyKind::SystemInequality}) {
                const auto& fam = P_.family(k);
                const Vec& dual = pt.dual(k);
                for (int i = 0; i < fam.count(); ++i)
                    if (dual[i] != 0.0) fam.rows[i].add_gradient(z_, dual[i], g, mode_);
            }
            for (int k : fixed_q_) {
                const double r = g[L.q_index(k)];
                pt.mu_lower[k] = std::max(r, 0.0);
                pt.mu_upper[k] = std::max(-r, 0.0);
            }
        }
        out.point = pt;
        out.objective = P_.objective().value(z_, EvalMode::Exact);
    }
};

inline SolveOutcome solve(const NlpProblem& problem, SolverOptions options = {}) {
    return InteriorPointSolver(problem, options).solve();
}

}  // namespace flowmarket
