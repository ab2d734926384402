#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace flowmarket {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct StructuralError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericDomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BuildError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Smoothed evaluation replaces phi*|phi| terms by the C^2 form
/// phi*sqrt(phi^2 + eps); Exact keeps the C^1 original.
enum class EvalMode { Exact, Smoothed };

struct LinearTerm {
    int var;
    double coef;
};

// coef * z[a] * z[b]  (a == b gives coef * z[a]^2)
struct QuadTerm {
    int a, b;
    double coef;
};

// coef * z[va] * z[vb] * cos(z[ta] - z[tb])  (or sin)
struct TrigTerm {
    int va, vb, ta, tb;
    double coef;
    bool is_sin;
};

// coef * z[var] * |z[var]|, optionally smoothed with parameter eps
struct SignedSquareTerm {
    int var;
    double coef;
    double eps = 0.0;
};

/// A scalar expression: constant + linear + quadratic + trigonometric +
/// signed-square terms. Used both for constraint rows and objectives.
/// The set of referenced variables is fixed at build time, so Jacobian
/// sparsity patterns never change between evaluations.
struct Expr {
    double constant = 0.0;
    std::vector<LinearTerm> lin;
    std::vector<QuadTerm> quad;
    std::vector<TrigTerm> trig;
    std::vector<SignedSquareTerm> ssq;

    Expr& add_constant(double c) {
        constant += c;
        return *this;
    }
    Expr& add_linear(int var, double coef) {
        lin.push_back({var, coef});
        return *this;
    }
    Expr& add_quad(int a, int b, double coef) {
        quad.push_back({a, b, coef});
        return *this;
    }
    Expr& add_cos(int va, int vb, int ta, int tb, double coef) {
        trig.push_back({va, vb, ta, tb, coef, false});
        return *this;
    }
    Expr& add_sin(int va, int vb, int ta, int tb, double coef) {
        trig.push_back({va, vb, ta, tb, coef, true});
        return *this;
    }
    Expr& add_signed_square(int var, double coef, double eps = 0.0) {
        ssq.push_back({var, coef, eps});
        return *this;
    }

    bool has_variables() const {
        for (const auto& t : lin)
            if (t.coef != 0.0) return true;
        for (const auto& t : quad)
            if (t.coef != 0.0) return true;
        for (const auto& t : trig)
            if (t.coef != 0.0) return true;
        for (const auto& t : ssq)
            if (t.coef != 0.0) return true;
        return false;
    }

    int max_var_index() const {
        int m = -1;
        for (const auto& t : lin) m = std::max(m, t.var);
        for (const auto& t : quad) m = std::max(m, std::max(t.a, t.b));
        for (const auto& t : trig)
            m = std::max(m, std::max(std::max(t.va, t.vb), std::max(t.ta, t.tb)));
        for (const auto& t : ssq) m = std::max(m, t.var);
        return m;
    }

    double value(const Vec& z, EvalMode mode = EvalMode::Exact) const {
        double v = constant;
        for (const auto& t : lin) v += t.coef * z[t.var];
        for (const auto& t : quad) v += t.coef * z[t.a] * z[t.b];
        for (const auto& t : trig) {
            const double u = z[t.ta] - z[t.tb];
            v += t.coef * z[t.va] * z[t.vb] * (t.is_sin ? std::sin(u) : std::cos(u));
        }
        for (const auto& t : ssq) {
            const double p = z[t.var];
            if (mode == EvalMode::Smoothed && t.eps > 0.0)
                v += t.coef * p * std::sqrt(p * p + t.eps);
            else
                v += t.coef * p * std::abs(p);
        }
        return v;
    }

    /// g += w * gradient(z). Dense accumulation into a full-size vector.
    void add_gradient(const Vec& z, double w, Vec& g,
                      EvalMode mode = EvalMode::Exact) const {
        for (const auto& t : lin) g[t.var] += w * t.coef;
        for (const auto& t : quad) {
            g[t.a] += w * t.coef * z[t.b];
            g[t.b] += w * t.coef * z[t.a];
        }
        for (const auto& t : trig) {
            const double u = z[t.ta] - z[t.tb];
            const double T = t.is_sin ? std::sin(u) : std::cos(u);
            const double Tp = t.is_sin ? std::cos(u) : -std::sin(u);
            const double A = z[t.va], B = z[t.vb];
            g[t.va] += w * t.coef * B * T;
            g[t.vb] += w * t.coef * A * T;
            g[t.ta] += w * t.coef * A * B * Tp;
            g[t.tb] -= w * t.coef * A * B * Tp;
        }
        for (const auto& t : ssq) {
            const double p = z[t.var];
            double d;
            if (mode == EvalMode::Smoothed && t.eps > 0.0) {
                const double r = std::sqrt(p * p + t.eps);
                d = (2.0 * p * p + t.eps) / r;
            } else {
                d = 2.0 * std::abs(p);
            }
            g[t.var] += w * t.coef * d;
        }
    }

    /// Jacobian-row triplets for this expression as constraint row `row`.
    /// Emits one entry per term slot so the sparsity pattern is
    /// evaluation-independent.
    void add_jacobian_row(const Vec& z, int row, std::vector<Triplet>& out,
                          EvalMode mode = EvalMode::Exact) const {
        for (const auto& t : lin) out.emplace_back(row, t.var, t.coef);
        for (const auto& t : quad) {
            out.emplace_back(row, t.a, t.coef * z[t.b]);
            out.emplace_back(row, t.b, t.coef * z[t.a]);
        }
        for (const auto& t : trig) {
            const double u = z[t.ta] - z[t.tb];
            const double T = t.is_sin ? std::sin(u) : std::cos(u);
            const double Tp = t.is_sin ? std::cos(u) : -std::sin(u);
            const double A = z[t.va], B = z[t.vb];
            out.emplace_back(row, t.va, t.coef * B * T);
            out.emplace_back(row, t.vb, t.coef * A * T);
            out.emplace_back(row, t.ta, t.coef * A * B * Tp);
            out.emplace_back(row, t.tb, -t.coef * A * B * Tp);
        }
        for (const auto& t : ssq) {
            const double p = z[t.var];
            double d;
            if (mode == EvalMode::Smoothed && t.eps > 0.0) {
                const double r = std::sqrt(p * p + t.eps);
                d = (2.0 * p * p + t.eps) / r;
            } else {
                d = 2.0 * std::abs(p);
            }
            out.emplace_back(row, t.var, t.coef * d);
        }
    }

    /// out += w * Hessian(z), emitted as full symmetric triplets.
    void add_hessian(const Vec& z, double w, std::vector<Triplet>& out,
                     EvalMode mode = EvalMode::Exact) const {
        if (w == 0.0) return;
        for (const auto& t : quad) {
            out.emplace_back(t.a, t.b, w * t.coef);
            out.emplace_back(t.b, t.a, w * t.coef);
        }
        for (const auto& t : trig) {
            const double u = z[t.ta] - z[t.tb];
            const double T = t.is_sin ? std::sin(u) : std::cos(u);
            const double Tp = t.is_sin ? std::cos(u) : -std::sin(u);
            const double Tpp = -T;
            const double A = z[t.va], B = z[t.vb];
            const double c = w * t.coef;
            out.emplace_back(t.va, t.vb, c * T);
            out.emplace_back(t.vb, t.va, c * T);
            out.emplace_back(t.va, t.ta, c * B * Tp);
            out.emplace_back(t.ta, t.va, c * B * Tp);
            out.emplace_back(t.va, t.tb, -c * B * Tp);
            out.emplace_back(t.tb, t.va, -c * B * Tp);
            out.emplace_back(t.vb, t.ta, c * A * Tp);
            out.emplace_back(t.ta, t.vb, c * A * Tp);
            out.emplace_back(t.vb, t.tb, -c * A * Tp);
            out.emplace_back(t.tb, t.vb, -c * A * Tp);
            out.emplace_back(t.ta, t.ta, c * A * B * Tpp);
            out.emplace_back(t.tb, t.tb, c * A * B * Tpp);
            out.emplace_back(t.ta, t.tb, -c * A * B * Tpp);
            out.emplace_back(t.tb, t.ta, -c * A * B * Tpp);
        }
        for (const auto& t : ssq) {
            const double p = z[t.var];
            double h;
            if (mode == EvalMode::Smoothed && t.eps > 0.0) {
                const double r2 = p * p + t.eps;
                h = p * (2.0 * p * p + 3.0 * t.eps) / (r2 * std::sqrt(r2));
            } else {
                h = 2.0 * (p > 0.0 ? 1.0 : (p < 0.0 ? -1.0 : 0.0));
            }
            out.emplace_back(t.var, t.var, w * t.coef * h);
        }
    }

    bool is_linear() const { return quad.empty() && trig.empty() && ssq.empty(); }
};

}  // namespace flowmarket
