#include <catch2/catch_amalgamated.hpp>

#include "flowmarket/audit.hpp"
#include "flowmarket/ipm.hpp"
#include "support/cases.hpp"
#include "support/mfcq_oracle.hpp"

using namespace flowmarket;

namespace {

NlpProblem one_var_lp() {
    NlpProblem p(1, 1, 0);
    p.set_bounds(Vec::Constant(1, 1.0), Vec::Constant(1, 2.0));
    p.set_fixed_outflow(Vec::Zero(1));
    Expr cost;
    cost.add_linear(p.layout().q_index(0), 1.0);
    p.set_objective(cost);
    p.finalize();
    return p;
}

}  // namespace

TEST_CASE("kkt_residuals on the hand-worked bound LP") {
    NlpProblem p = one_var_lp();
    PrimalDualPoint pt = p.zero_point();
    pt.primal << 1.0, 1.0;
    pt.mu_lower[0] = 1.0;  // binds the lower nomination; lambda stays zero
    auto rep = kkt_residuals(p, pt, 1e-6);
    CHECK(rep.pass);
    CHECK(rep.stationarity_q == 0.0);
    CHECK(rep.primal_feasibility == 0.0);
    CHECK(rep.complementarity == 0.0);

    SECTION("perturbing a dual by 0.1 shows up as stationarity 0.1") {
        pt.lambda[0] = 0.1;
        auto bad = kkt_residuals(p, pt, 1e-6);
        CHECK_FALSE(bad.pass);
        const double stat =
            std::max({bad.stationarity_q, bad.stationarity_x, bad.stationarity_y});
        CHECK(stat == Catch::Approx(0.1));
    }
    SECTION("negative dual is a sign violation") {
        pt.mu_upper[0] = -0.5;
        auto bad = kkt_residuals(p, pt, 1e-6);
        CHECK_FALSE(bad.pass);
        CHECK(bad.dual_sign_violation == Catch::Approx(0.5));
    }
}

TEST_CASE("solver output passes the audit KKT check") {
    auto model = build_dc_opf(fmtest::dc_3bus_congested());
    auto out = solve(model.problem);
    REQUIRE(out.status == SolveOutcome::Status::Optimal);
    auto rep = kkt_residuals(model.problem, out.point, 1e-6);
    CHECK(rep.pass);
}

TEST_CASE("MFCQ certificate hand examples") {
    SECTION("interior point with independent equalities gives t* = 1") {
        NlpProblem p(1, 1, 1);
        p.set_bounds(Vec::Zero(1), Vec::Ones(1));
        p.set_fixed_outflow(Vec::Zero(1));
        Expr h;  // x - y = 0
        h.add_linear(p.layout().x_index(0), 1.0).add_linear(p.layout().y_index(0), -1.0);
        p.add_equality(h);
        Expr g;  // x - 10 <= 0, inactive at the origin
        g.add_linear(p.layout().x_index(0), 1.0).add_constant(-10.0);
        p.add_inequality(g);
        p.finalize();
        Vec z = Vec::Zero(3);
        auto cert = mfcq_certificate(p, z);
        CHECK(cert.rank_ok);
        CHECK(cert.active_inequalities == 0);
        CHECK(cert.t_star == Catch::Approx(1.0));
        CHECK(cert.holds);
    }
    SECTION("x <= 0 and -x <= 0 both active kill the strict direction") {
        NlpProblem p(1, 1, 0);
        p.set_bounds(Vec::Zero(1), Vec::Ones(1));
        p.set_fixed_outflow(Vec::Zero(1));
        Expr g1, g2;
        g1.add_linear(p.layout().x_index(0), 1.0);
        g2.add_linear(p.layout().x_index(0), -1.0);
        p.add_inequality(g1);
        p.add_inequality(g2);
        p.finalize();
        Vec z = Vec::Zero(2);
        auto cert = mfcq_certificate(p, z);
        CHECK(cert.t_star == Catch::Approx(0.0).margin(1e-12));
        CHECK_FALSE(cert.holds);
    }
}

TEST_CASE("MFCQ certificate agrees with the dense test oracle") {
    SECTION("solved gas case") {
        auto model = build_ogf(fmtest::gas_3junction());
        auto out = solve(model.problem);
        REQUIRE(out.status == SolveOutcome::Status::Optimal);
        auto cert = mfcq_certificate(model.problem, out.point.primal);
        auto oracle = fmtest::dense_mfcq_of(model.problem, out.point.primal);
        CHECK(cert.holds);
        CHECK(oracle.holds);
        CHECK(cert.equality_rank == oracle.rank);
        CHECK(std::abs(cert.t_star - oracle.t_star) < 1e-8);
        CHECK(std::abs(cert.sigma_min - oracle.sigma_min) < 1e-8 * (1 + oracle.sigma_max));
    }
    SECTION("solved DC case") {
        auto model = build_dc_opf(fmtest::dc_3bus_congested());
        auto out = solve(model.problem);
        REQUIRE(out.status == SolveOutcome::Status::Optimal);
        auto cert = mfcq_certificate(model.problem, out.point.primal);
        auto oracle = fmtest::dense_mfcq_of(model.problem, out.point.primal);
        CHECK(cert.holds == oracle.holds);
        CHECK(cert.equality_rank == oracle.rank);
        CHECK(std::abs(cert.t_star - oracle.t_star) < 1e-8);
    }
}

TEST_CASE("revenue arithmetic") {
    SECTION("direct formula") {
        NlpProblem p(2, 2, 0);
        p.set_bounds(Vec::Zero(2), Vec::Constant(2, 10.0));
        p.set_fixed_outflow(Vec::Zero(2));
        p.finalize();
        PrimalDualPoint pt = p.zero_point();
        pt.primal << 0.0, 0.0, 3.0, -4.0;  // q, x
        pt.lambda << 1.0, 2.0;
        auto rep = revenue(p, pt);
        CHECK(rep.revenue == Catch::Approx(5.0));  // -(1*3 + 2*(-4))
    }
    SECTION("uniform prices and balanced market give zero revenue") {
        NlpProblem p(2, 2, 0);
        p.set_bounds(Vec::Zero(2), Vec::Constant(2, 10.0));
        p.set_fixed_outflow(Vec::Zero(2));
        p.finalize();
        PrimalDualPoint pt = p.zero_point();
        pt.primal << 0.0, 0.0, 2.5, -2.5;
        pt.lambda << 3.0, 3.0;
        auto rep = revenue(p, pt);
        CHECK(rep.revenue == Catch::Approx(0.0).margin(1e-15));
    }
}

TEST_CASE("congestion rent identity on the congested triangle") {
    auto model = build_dc_opf(fmtest::dc_3bus_congested());
    auto out = solve(model.problem);
    REQUIRE(out.status == SolveOutcome::Status::Optimal);
    auto rep = revenue(model.problem, out.point);
    CHECK(rep.revenue > 1e-6);  // congested case collects rent
    double rent = 0.0;
    const auto& L = model.problem.layout();
    for (int e = 0; e < model.idx.n_lines; ++e) {
        const int a = model.data.node_index(model.data.lines[e].from);
        const int b = model.data.node_index(model.data.lines[e].to);
        const double flow = out.point.primal[L.y_index(model.idx.flow(e))];
        rent += (out.point.lambda[b] - out.point.lambda[a]) * flow;
    }
    CHECK(rep.revenue == Catch::Approx(rent).margin(1e-8));
    // the two revenue formulas agree when conservation residuals vanish
    CHECK(std::abs(rep.revenue - rep.revenue_via_outflow) < 1e-10);
    // stationarity splits revenue into the per-family rents
    CHECK(rep.revenue ==
          Catch::Approx(rep.rent_system_equality + rep.rent_system_inequality).margin(1e-7));
}

TEST_CASE("full adequacy audit on the congested triangle") {
    auto model = build_dc_opf(fmtest::dc_3bus_congested());
    auto out = solve(model.problem);
    REQUIRE(out.status == SolveOutcome::Status::Optimal);
    auto rep = adequacy_audit(model.problem, out.point, star_check_dc(model));
    CHECK(rep.certified);
    CHECK(rep.verdict == "adequate");
    CHECK(rep.star.has_value());
    CHECK(rep.star->max_violation <= 1e-12);
    REQUIRE(rep.step_d.has_value());
    CHECK(*rep.step_d >= -1e-6);

    SECTION("corrupted duals fail with reason stationarity") {
        auto bad = out.point;
        bad.lambda[0] += 0.5;
        auto rep2 = adequacy_audit(model.problem, bad, star_check_dc(model));
        CHECK_FALSE(rep2.certified);
        CHECK(rep2.verdict == "failed");
        REQUIRE_FALSE(rep2.reasons.empty());
        CHECK(rep2.reasons[0] == "stationarity");
    }
}

TEST_CASE("audit without a registered star construction is inconclusive") {
    NlpProblem p = one_var_lp();
    PrimalDualPoint pt = p.zero_point();
    pt.primal << 1.0, 1.0;
    pt.mu_lower[0] = 1.0;
    auto rep = adequacy_audit(p, pt, std::nullopt);
    CHECK(rep.inconclusive);
    CHECK(rep.verdict == "inconclusive");
}
