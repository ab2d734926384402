#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "flowmarket/problem.hpp"
#include "support/oracles.hpp"

using namespace flowmarket;

namespace {

// one traded entry per exposed node, no system constraints
NlpProblem trivial_problem(double d, double qlo, double qhi) {
    NlpProblem p(1, 1, 0);
    p.set_bounds(Vec::Constant(1, qlo), Vec::Constant(1, qhi));
    p.set_fixed_outflow(Vec::Constant(1, d));
    Expr cost;
    cost.add_linear(p.layout().q_index(0), 1.0);
    p.set_objective(cost);
    p.finalize();
    return p;
}

// small nonlinear problem touching every term type:
//   q in [0.5, 2], x = q - d, y = (y0, y1, y2)
//   H: x*y0 - y1 = 0,  y0 - y1 - 0.3*y2*|y2| = 0,  y0*y0 - 2 + y0*y1*cos(y2-0) ... (trig uses two angle slots)
NlpProblem nonlinear_fixture() {
    NlpProblem p(1, 1, 3);
    p.set_bounds(Vec::Constant(1, 0.5), Vec::Constant(1, 2.0));
    p.set_fixed_outflow(Vec::Constant(1, 0.25));
    const auto& L = p.layout();
    const int x0 = L.x_index(0), y0 = L.y_index(0), y1 = L.y_index(1), y2 = L.y_index(2);
    Expr h1;
    h1.add_quad(x0, y0, 1.0).add_linear(y1, -1.0);
    p.add_equality(h1);
    Expr h2;
    h2.add_linear(y0, 1.0).add_linear(y1, -1.0).add_signed_square(y2, -0.3, 1e-8);
    p.add_equality(h2);
    Expr g1;  // y0^2 + y0*y1*cos(y2 - y1) - 4 <= 0
    g1.add_quad(y0, y0, 1.0).add_cos(y0, y1, y2, y1, 1.0).add_constant(-4.0);
    p.add_inequality(g1);
    Expr g2;  // sin coupling: y0*y2*sin(y1-y2) - 1 <= 0
    g2.add_sin(y0, y2, y1, y2, 1.0).add_constant(-1.0);
    p.add_inequality(g2);
    Expr cost;
    cost.add_linear(L.q_index(0), 3.0).add_linear(y2, 0.5).add_constant(-0.5);
    p.set_objective(cost);
    p.finalize();
    return p;
}

}  // namespace

TEST_CASE("conservation residual matches the flow balance identity") {
    {
        NlpProblem p = trivial_problem(0.0, -1.0, 1.0);
        Vec z = Vec::Zero(2);
        auto v = evaluate(p, z);
        CHECK(v.of(FamilyKind::Conservation)[0] == 0.0);
        CHECK(v.feasible(1e-8));
    }
    {
        NlpProblem p = trivial_problem(5.0, 0.0, 10.0);
        Vec z(2);
        z << 5.0, 0.0;  // q=5, x=0
        auto v = evaluate(p, z);
        CHECK(v.of(FamilyKind::Conservation)[0] == 0.0);
        z << 3.0, 0.0;  // q=3, x=0 -> residual x - q + d = 2
        auto w = evaluate(p, z);
        CHECK(w.of(FamilyKind::Conservation)[0] == Catch::Approx(2.0));
        CHECK_FALSE(w.feasible(1e-8));
    }
}

TEST_CASE("evaluate rejects malformed input") {
    NlpProblem p = trivial_problem(0.0, 0.0, 1.0);
    CHECK_THROWS_AS(evaluate(p, Vec::Zero(5)), StructuralError);

    NlpProblem nl = nonlinear_fixture();
    Vec z = Vec::Zero(nl.layout().total());
    z[nl.layout().y_index(0)] = 1e308;
    z[nl.layout().y_index(1)] = 1e308;
    CHECK_THROWS_AS(evaluate(nl, z), NumericDomainError);
}

TEST_CASE("constant constraint rows are rejected at build time") {
    NlpProblem p(1, 1, 0);
    p.set_bounds(Vec::Zero(1), Vec::Ones(1));
    p.set_fixed_outflow(Vec::Zero(1));
    Expr zero_row;
    zero_row.add_constant(1.0);
    p.add_inequality(zero_row);
    CHECK_THROWS_AS(p.finalize(), BuildError);

    NlpProblem p2(1, 1, 0);
    p2.set_bounds(Vec::Ones(1), Vec::Zero(1));  // crossed bounds
    p2.set_fixed_outflow(Vec::Zero(1));
    CHECK_THROWS_AS(p2.finalize(), BuildError);

    // pinned nomination q_lower == q_upper is allowed
    NlpProblem p3(1, 1, 0);
    p3.set_bounds(Vec::Ones(1), Vec::Ones(1));
    p3.set_fixed_outflow(Vec::Zero(1));
    CHECK_NOTHROW(p3.finalize());
}

TEST_CASE("lagrangian gradient blocks") {
    SECTION("only the objective survives with zero duals") {
        NlpProblem p = nonlinear_fixture();
        PrimalDualPoint pt = p.zero_point();
        pt.primal = Vec::Constant(p.layout().total(), 0.7);
        auto b = lagrangian_gradient(p, pt);
        CHECK(b.grad_q[0] == Catch::Approx(3.0));
        CHECK(b.grad_x.cwiseAbs().maxCoeff() == 0.0);
        CHECK(b.grad_y[0] == 0.0);
        CHECK(b.grad_y[2] == Catch::Approx(0.5));
    }
    SECTION("bound-constrained LP stationarity at the hand-worked point") {
        // min q s.t. q >= 1: at q = 1 with mu_lower = 1 the q-gradient vanishes
        NlpProblem p = trivial_problem(0.0, 1.0, 2.0);
        PrimalDualPoint pt = p.zero_point();
        pt.primal << 1.0, 1.0;
        pt.mu_lower[0] = 1.0;
        auto b = lagrangian_gradient(p, pt);
        CHECK(b.grad_q[0] == Catch::Approx(0.0).margin(1e-15));
    }
}

TEST_CASE("analytic Jacobians match central differences") {
    NlpProblem p = nonlinear_fixture();
    const int n = p.layout().total();
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.4, 1.6);
    for (int trial = 0; trial < 100; ++trial) {
        Vec z(n);
        for (int i = 0; i < n; ++i) z[i] = u(rng);
        for (const auto& fam : p.families()) {
            CHECK(fmtest::max_rel_jacobian_error(fam, z, n, EvalMode::Exact) < 1e-6);
            CHECK(fmtest::max_rel_jacobian_error(fam, z, n, EvalMode::Smoothed) < 1e-6);
        }
        Vec gfd = fmtest::fd_objective_gradient(p, z);
        Vec gan = Vec::Zero(n);
        p.objective().add_gradient(z, 1.0, gan);
        CHECK((gfd - gan).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("conservation family is exactly linear") {
    NlpProblem p = nonlinear_fixture();
    const int n = p.layout().total();
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Vec z(n), dz(n);
    for (int i = 0; i < n; ++i) {
        z[i] = u(rng);
        dz[i] = u(rng);
    }
    const auto& cons = p.family(FamilyKind::Conservation);
    const Vec r0 = cons.residual(z);
    const Vec r1 = cons.residual(z + dz);
    const Vec jd = cons.jacobian(z, n) * dz;
    CHECK((r1 - r0 - jd).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("Jacobian sparsity pattern is evaluation independent") {
    NlpProblem p = nonlinear_fixture();
    const int n = p.layout().total();
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.2, 2.5);
    auto pattern_of = [&](const Vec& z) {
        std::set<std::pair<int, int>> pat;
        for (const auto& fam : p.families()) {
            SpMat J = fam.jacobian(z, n);
            for (int k = 0; k < J.outerSize(); ++k)
                for (SpMat::InnerIterator it(J, k); it; ++it)
                    pat.insert({static_cast<int>(it.row()), static_cast<int>(it.col())});
        }
        return pat;
    };
    Vec z0(n);
    for (int i = 0; i < n; ++i) z0[i] = u(rng);
    const auto base = pattern_of(z0);
    for (int trial = 0; trial < 10; ++trial) {
        Vec z(n);
        for (int i = 0; i < n; ++i) z[i] = u(rng);
        CHECK(pattern_of(z) == base);
    }
}

TEST_CASE("lagrangian hessian matches finite differences of the gradient") {
    NlpProblem p = nonlinear_fixture();
    const int n = p.layout().total();
    PrimalDualPoint pt = p.zero_point();
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(0.4, 1.4);
    for (int i = 0; i < n; ++i) pt.primal[i] = u(rng);
    pt.mu_lower[0] = 0.3;
    pt.mu_upper[0] = 0.1;
    pt.lambda[0] = -0.8;
    pt.nu_e << 0.5, -0.7;
    pt.nu_i << 0.2, 0.9;

    std::vector<Triplet> trips;
    add_lagrangian_hessian(p, pt, 1.0, trips, EvalMode::Smoothed);
    SpMat H(n, n);
    H.setFromTriplets(trips.begin(), trips.end());
    Mat Hd = Mat(H);
    CHECK((Hd - Hd.transpose()).cwiseAbs().maxCoeff() < 1e-12);

    const double h = 1e-6;
    PrimalDualPoint pp = pt, pm = pt;
    for (int j = 0; j < n; ++j) {
        pp.primal[j] = pt.primal[j] + h;
        pm.primal[j] = pt.primal[j] - h;
        Vec gp = lagrangian_gradient_flat(p, pp, EvalMode::Smoothed);
        Vec gm = lagrangian_gradient_flat(p, pm, EvalMode::Smoothed);
        Vec col = (gp - gm) / (2 * h);
        CHECK((col - Hd.col(j)).cwiseAbs().maxCoeff() < 1e-5);
        pp.primal[j] = pt.primal[j];
        pm.primal[j] = pt.primal[j];
    }
}
