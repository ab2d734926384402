#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowmarket/power.hpp"  // CaseKind
#include "flowmarket/problem.hpp"

namespace flowmarket {

// Smoothing parameter for phi*|phi| inside the solver; audits and star
// verification always evaluate the exact form.
constexpr double kWeymouthSmoothingEps = 1e-8;

struct GasSupply {
    double q_min = 0.0;
    double q_max = 0.0;
    double price = 0.0;
};

struct GasJunction {
    std::string id;
    double withdrawal = 0.0;  // fixed outflow d_i
    std::optional<GasSupply> supply;
    double pi_min = 0.0;  // squared-pressure box
    double pi_max = 0.0;
};

struct GasCompressor {
    double max_ratio = 1.0;  // must be > 1
    double cost = 0.0;       // linear cost per unit of (ratio - 1)
};

struct GasPipe {
    std::string from, to;
    double resistance = 0.0;  // Weymouth beta
    double pi_min = 0.0;      // inlet squared-pressure box
    double pi_max = 0.0;
    std::optional<GasCompressor> compressor;
};

/// Declarative gas network. Squared pressures and resistances are stored in
/// nominal-pressure-squared units (scaling happens at parse time).
struct GasCase {
    std::string name;
    double nominal_pressure = 1.0;
    std::vector<GasJunction> junctions;
    std::vector<GasPipe> pipes;
    std::optional<Vec> known_solution;

    int junction_index(const std::string& id) const {
        for (size_t i = 0; i < junctions.size(); ++i)
            if (junctions[i].id == id) return static_cast<int>(i);
        throw BuildError("unknown junction id " + id);
    }

    void validate() const {
        if (junctions.empty()) throw BuildError("case has no junctions");
        std::map<std::string, int> seen;
        for (const auto& j : junctions) {
            if (++seen[j.id] > 1) throw BuildError("duplicate junction id " + j.id);
            if (!(0 < j.pi_min && j.pi_min < j.pi_max))
                throw BuildError("junction " + j.id + " needs 0 < pi_min < pi_max");
            if (j.supply && j.supply->q_min > j.supply->q_max)
                throw BuildError("junction " + j.id + " has q_min > q_max");
        }
        for (const auto& e : pipes) {
            junction_index(e.from);
            junction_index(e.to);
            if (e.from == e.to) throw BuildError("pipe from " + e.from + " to itself");
            if (e.resistance <= 0)
                throw BuildError("pipe " + e.from + "-" + e.to + " needs resistance > 0");
            if (!(0 < e.pi_min && e.pi_min < e.pi_max))
                throw BuildError("pipe " + e.from + "-" + e.to + " needs 0 < pi_min < pi_max");
            if (e.compressor && e.compressor->max_ratio <= 1.0)
                throw BuildError("compressor on " + e.from + "-" + e.to +
                                 " needs max_ratio > 1");
        }
        std::vector<int> mark(junctions.size(), 0);
        std::vector<int> stack{0};
        mark[0] = 1;
        while (!stack.empty()) {
            int i = stack.back();
            stack.pop_back();
            for (const auto& e : pipes) {
                const int a = junction_index(e.from), b = junction_index(e.to);
                for (int other : {a == i ? b : -1, b == i ? a : -1})
                    if (other >= 0 && !mark[other]) {
                        mark[other] = 1;
                        stack.push_back(other);
                    }
            }
        }
        for (size_t i = 0; i < junctions.size(); ++i)
            if (!mark[i])
                throw BuildError("network is disconnected at junction " + junctions[i].id);
    }
};

/// Index map of the gas model.
///   q -> supplies (one per bidding junction), x -> net junction inflows,
///   y -> (nodal squared pressures, inlet-end pipe pressures, outlet-end pipe
///        pressures, pipe flows, compression ratios of compressor pipes)
/// Ratios exist only on compressor pipes; plain pipes are coupled with
/// identity rows.
/// H rows: flow balance (J), Weymouth (E), inlet coupling (E),
/// outlet coupling (E).
/// G rows: pipe box lower/upper (E each), nodal box lower/upper (J each),
/// ratio lower/upper (C each).
struct OgfIndex {
    int n_junctions = 0, n_pipes = 0, n_compressors = 0, n_supplies = 0;
    std::vector<int> supply_junction;    // traded k -> junction
    std::vector<int> compressor_pipe;    // c -> pipe
    std::vector<int> compressor_of_pipe; // pipe -> c or -1

    int pi_node(int i) const { return i; }
    int pi_from(int e) const { return n_junctions + e; }
    int pi_to(int e) const { return n_junctions + n_pipes + e; }
    int flow(int e) const { return n_junctions + 2 * n_pipes + e; }
    int ratio(int c) const { return n_junctions + 3 * n_pipes + c; }
    int n_dependent() const { return n_junctions + 3 * n_pipes + n_compressors; }

    int row_balance(int i) const { return i; }
    int row_weymouth(int e) const { return n_junctions + e; }
    int row_inlet(int e) const { return n_junctions + n_pipes + e; }
    int row_outlet(int e) const { return n_junctions + 2 * n_pipes + e; }
    int row_pipe_lower(int e) const { return e; }
    int row_pipe_upper(int e) const { return n_pipes + e; }
    int row_node_lower(int i) const { return 2 * n_pipes + i; }
    int row_node_upper(int i) const { return 2 * n_pipes + n_junctions + i; }
    int row_ratio_lower(int c) const { return 2 * n_pipes + 2 * n_junctions + c; }
    int row_ratio_upper(int c) const {
        return 2 * n_pipes + 2 * n_junctions + n_compressors + c;
    }
};

struct OgfModel {
    GasCase data;
    OgfIndex idx;
    NlpProblem problem;
};

inline OgfModel build_ogf(const GasCase& c, double smoothing_eps = kWeymouthSmoothingEps) {
    c.validate();
    const int nj = static_cast<int>(c.junctions.size());
    const int np = static_cast<int>(c.pipes.size());

    OgfIndex ix;
    ix.n_junctions = nj;
    ix.n_pipes = np;
    ix.compressor_of_pipe.assign(np, -1);
    for (int e = 0; e < np; ++e)
        if (c.pipes[e].compressor) {
            ix.compressor_of_pipe[e] = static_cast<int>(ix.compressor_pipe.size());
            ix.compressor_pipe.push_back(e);
        }
    ix.n_compressors = static_cast<int>(ix.compressor_pipe.size());
    for (int i = 0; i < nj; ++i)
        if (c.junctions[i].supply) ix.supply_junction.push_back(i);
    ix.n_supplies = static_cast<int>(ix.supply_junction.size());

    OgfModel model{c, ix, NlpProblem(ix.n_supplies, nj, ix.n_dependent())};
    NlpProblem& p = model.problem;
    const auto& L = p.layout();

    Vec qlo(ix.n_supplies), qhi(ix.n_supplies);
    Expr cost;
    for (int k = 0; k < ix.n_supplies; ++k) {
        const auto& s = *c.junctions[ix.supply_junction[k]].supply;
        qlo[k] = s.q_min;
        qhi[k] = s.q_max;
        cost.add_linear(L.q_index(k), s.price);
    }
    for (int cdx = 0; cdx < ix.n_compressors; ++cdx) {
        const auto& comp = *c.pipes[ix.compressor_pipe[cdx]].compressor;
        if (comp.cost != 0.0) {
            cost.add_linear(L.y_index(ix.ratio(cdx)), comp.cost);
            cost.add_constant(-comp.cost);
        }
    }
    p.set_bounds(qlo, qhi);
    p.set_trade_node(ix.supply_junction);
    p.set_objective(cost);
    Vec d(nj);
    for (int i = 0; i < nj; ++i) d[i] = c.junctions[i].withdrawal;
    p.set_fixed_outflow(d);

    std::vector<Expr> balance(nj);
    for (int i = 0; i < nj; ++i) balance[i].add_linear(L.x_index(i), -1.0);
    for (int e = 0; e < np; ++e) {
        const int a = c.junction_index(c.pipes[e].from);
        const int b = c.junction_index(c.pipes[e].to);
        balance[a].add_linear(L.y_index(ix.flow(e)), 1.0);
        balance[b].add_linear(L.y_index(ix.flow(e)), -1.0);
    }
    for (int i = 0; i < nj; ++i) p.add_equality(std::move(balance[i]));
    // Weymouth: pi_from - pi_to - beta * phi|phi| = 0
    for (int e = 0; e < np; ++e) {
        Expr wey;
        wey.add_linear(L.y_index(ix.pi_from(e)), 1.0)
            .add_linear(L.y_index(ix.pi_to(e)), -1.0)
            .add_signed_square(L.y_index(ix.flow(e)), -c.pipes[e].resistance, smoothing_eps);
        p.add_equality(std::move(wey));
    }
    // inlet coupling: compressor boosts squared pressure multiplicatively
    for (int e = 0; e < np; ++e) {
        const int a = c.junction_index(c.pipes[e].from);
        Expr in;
        if (ix.compressor_of_pipe[e] >= 0) {
            const int cdx = ix.compressor_of_pipe[e];
            in.add_quad(L.y_index(ix.pi_node(a)), L.y_index(ix.ratio(cdx)), 1.0)
                .add_linear(L.y_index(ix.pi_from(e)), -1.0);
        } else {
            in.add_linear(L.y_index(ix.pi_node(a)), 1.0)
                .add_linear(L.y_index(ix.pi_from(e)), -1.0);
        }
        p.add_equality(std::move(in));
    }
    for (int e = 0; e < np; ++e) {
        const int b = c.junction_index(c.pipes[e].to);
        Expr outc;
        outc.add_linear(L.y_index(ix.pi_node(b)), 1.0)
            .add_linear(L.y_index(ix.pi_to(e)), -1.0);
        p.add_equality(std::move(outc));
    }

    for (int e = 0; e < np; ++e) {
        Expr lo;
        lo.add_constant(c.pipes[e].pi_min).add_linear(L.y_index(ix.pi_from(e)), -1.0);
        p.add_inequality(std::move(lo));
    }
    for (int e = 0; e < np; ++e) {
        Expr hi;
        hi.add_constant(-c.pipes[e].pi_max).add_linear(L.y_index(ix.pi_from(e)), 1.0);
        p.add_inequality(std::move(hi));
    }
    for (int i = 0; i < nj; ++i) {
        Expr lo;
        lo.add_constant(c.junctions[i].pi_min).add_linear(L.y_index(ix.pi_node(i)), -1.0);
        p.add_inequality(std::move(lo));
    }
    for (int i = 0; i < nj; ++i) {
        Expr hi;
        hi.add_constant(-c.junctions[i].pi_max).add_linear(L.y_index(ix.pi_node(i)), 1.0);
        p.add_inequality(std::move(hi));
    }
    for (int cdx = 0; cdx < ix.n_compressors; ++cdx) {
        const auto& comp = *c.pipes[ix.compressor_pipe[cdx]].compressor;
        Expr lo, hi;
        lo.add_constant(1.0).add_linear(L.y_index(ix.ratio(cdx)), -1.0);
        hi.add_constant(-comp.max_ratio).add_linear(L.y_index(ix.ratio(cdx)), 1.0);
        p.add_inequality(std::move(lo));
        p.add_inequality(std::move(hi));
    }

    Vec z0 = Vec::Zero(L.total());
    for (int k = 0; k < ix.n_supplies; ++k) z0[L.q_index(k)] = 0.5 * (qlo[k] + qhi[k]);
    for (int i = 0; i < nj; ++i) {
        double inflow = 0.0;
        for (int k = 0; k < ix.n_supplies; ++k)
            if (ix.supply_junction[k] == i) inflow += z0[L.q_index(k)];
        z0[L.x_index(i)] = inflow - d[i];
    }
    for (int i = 0; i < nj; ++i)
        z0[L.y_index(ix.pi_node(i))] = 0.5 * (c.junctions[i].pi_min + c.junctions[i].pi_max);
    for (int e = 0; e < np; ++e) {
        z0[L.y_index(ix.pi_from(e))] = 0.5 * (c.pipes[e].pi_min + c.pipes[e].pi_max);
        const int b = c.junction_index(c.pipes[e].to);
        z0[L.y_index(ix.pi_to(e))] = z0[L.y_index(ix.pi_node(b))];
    }
    for (int cdx = 0; cdx < ix.n_compressors; ++cdx)
        z0[L.y_index(ix.ratio(cdx))] = 1.0;
    p.set_initial_primal(z0);
    p.finalize();
    return model;
}

/// Resistance from pipe physical parameters: beta = a^2 lambda L / (A^2 D)
/// with cross-section A = pi D^2 / 4.
inline double pipe_resistance(double wave_speed, double friction, double length,
                              double diameter) {
    const double area = M_PI * diameter * diameter / 4.0;
    return wave_speed * wave_speed * friction * length / (area * area * diameter);
}

}  // namespace flowmarket
