#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowmarket/problem.hpp"

namespace flowmarket {

enum class CaseKind { PowerDc, PowerAc, Gas };

inline const char* case_kind_name(CaseKind k) {
    switch (k) {
        case CaseKind::PowerDc: return "power_dc";
        case CaseKind::PowerAc: return "power_ac";
        case CaseKind::Gas: return "gas";
    }
    return "?";
}

struct PowerNode {
    std::string id;
    double load_p = 0.0;
    double load_q = 0.0;   // AC only
    double v_min = 0.0;    // AC only
    double v_max = 0.0;    // AC only
    bool has_v_bounds = false;
};

struct PowerGenerator {
    std::string node;
    double max_p = 0.0;
    double cost_p = 0.0;
    double max_q = 0.0;   // AC only
    double min_q = 0.0;   // AC only; 0 unless the case overrides
    double cost_q = 0.0;  // AC only
};

struct PowerLine {
    std::string from, to;
    double reactance = 0.0;  // DC: theta_i - theta_j = Z * flow
    double limit = 0.0;      // DC flow bound
    double g = 0.0;          // AC series conductance
    double b = 0.0;          // AC series susceptance
    double b_sh = 0.0;       // AC shunt susceptance
    double s_max = 0.0;      // AC apparent power bound
};

/// Declarative power network description. Quantities are per-unit on
/// base_mva; reports convert back to physical units.
struct PowerCase {
    std::string name;
    CaseKind kind = CaseKind::PowerDc;
    double base_mva = 1.0;
    std::vector<PowerNode> nodes;
    std::vector<PowerGenerator> generators;
    std::vector<PowerLine> lines;
    std::string reference;  // node id; empty selects the lowest node id
    std::optional<Vec> known_solution;

    int node_index(const std::string& id) const {
        for (size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].id == id) return static_cast<int>(i);
        throw BuildError("unknown node id " + id);
    }

    int reference_index() const {
        if (!reference.empty()) return node_index(reference);
        int best = 0;
        for (size_t i = 1; i < nodes.size(); ++i)
            if (nodes[i].id < nodes[best].id) best = static_cast<int>(i);
        return best;
    }

    void validate() const {
        if (nodes.empty()) throw BuildError("case has no nodes");
        std::map<std::string, int> seen;
        for (const auto& n : nodes)
            if (++seen[n.id] > 1) throw BuildError("duplicate node id " + n.id);
        std::map<std::string, int> gens_at;
        for (const auto& g : generators) {
            node_index(g.node);
            if (++gens_at[g.node] > 1)
                throw BuildError("multiple generators at node " + g.node +
                                 "; aggregate them into one");
            if (g.max_p < 0) throw BuildError("generator at " + g.node + " has negative max_p");
        }
        for (const auto& l : lines) {
            node_index(l.from);
            node_index(l.to);
            if (l.from == l.to) throw BuildError("line from " + l.from + " to itself");
        }
        if (!reference.empty()) node_index(reference);
        // connectivity
        std::vector<int> mark(nodes.size(), 0);
        std::vector<int> stack{0};
        mark[0] = 1;
        while (!stack.empty()) {
            int i = stack.back();
            stack.pop_back();
            for (const auto& l : lines) {
                const int a = node_index(l.from), b = node_index(l.to);
                for (int other : {a == i ? b : -1, b == i ? a : -1})
                    if (other >= 0 && !mark[other]) {
                        mark[other] = 1;
                        stack.push_back(other);
                    }
            }
        }
        for (size_t i = 0; i < nodes.size(); ++i)
            if (!mark[i]) throw BuildError("network is disconnected at node " + nodes[i].id);
        if (kind == CaseKind::PowerDc) {
            for (const auto& l : lines) {
                if (l.reactance <= 0)
                    throw BuildError("line " + l.from + "-" + l.to + " needs reactance > 0");
                if (l.limit <= 0)
                    throw BuildError("line " + l.from + "-" + l.to + " needs a positive limit");
            }
        } else if (kind == CaseKind::PowerAc) {
            for (const auto& n : nodes) {
                if (!n.has_v_bounds)
                    throw BuildError("node " + n.id + " is missing voltage bounds");
                if (!(0 < n.v_min && n.v_min < n.v_max))
                    throw BuildError("node " + n.id + " needs 0 < v_min < v_max");
            }
            for (const auto& l : lines)
                if (l.s_max <= 0)
                    throw BuildError("line " + l.from + "-" + l.to + " needs s_max > 0");
            for (const auto& g : generators)
                if (g.min_q > g.max_q)
                    throw BuildError("generator at " + g.node + " has min_q > max_q");
        }
    }
};

/// Index map of the DC model's variable blocks and constraint rows.
///   q -> generator production, x -> net injections,
///   y -> (angles, line flows)
/// H rows: nodal balance (n), Ohm's law (m), reference angle (1).
/// G rows per line e: 2e is flow - cap <= 0, 2e+1 is -flow - cap <= 0.
struct DcIndex {
    int n_nodes = 0, n_lines = 0, n_gens = 0;
    int ref_node = 0;
    int theta(int i) const { return i; }
    int flow(int e) const { return n_nodes + e; }
    int row_balance(int i) const { return i; }
    int row_ohm(int e) const { return n_nodes + e; }
    int row_ref() const { return n_nodes + n_lines; }
    int row_flow_upper(int e) const { return 2 * e; }
    int row_flow_lower(int e) const { return 2 * e + 1; }
};

struct DcModel {
    PowerCase data;
    DcIndex idx;
    NlpProblem problem;
};

inline DcModel build_dc_opf(const PowerCase& c) {
    if (c.kind != CaseKind::PowerDc)
        throw BuildError(std::string("case kind ") + case_kind_name(c.kind) +
                         " incompatible with model dc");
    c.validate();
    const int n = static_cast<int>(c.nodes.size());
    const int m = static_cast<int>(c.lines.size());
    const int ng = static_cast<int>(c.generators.size());

    DcModel model{c, DcIndex{n, m, ng, c.reference_index()}, NlpProblem(ng, n, n + m)};
    NlpProblem& p = model.problem;
    const auto& L = p.layout();
    const DcIndex& ix = model.idx;

    Vec qlo = Vec::Zero(ng), qhi(ng);
    std::vector<int> tnode(ng);
    Expr cost;
    for (int k = 0; k < ng; ++k) {
        qhi[k] = c.generators[k].max_p;
        tnode[k] = c.node_index(c.generators[k].node);
        cost.add_linear(L.q_index(k), c.generators[k].cost_p);
    }
    p.set_bounds(qlo, qhi);
    p.set_trade_node(tnode);
    p.set_objective(cost);
    Vec d(n);
    for (int i = 0; i < n; ++i) d[i] = c.nodes[i].load_p;
    p.set_fixed_outflow(d);

    // nodal balance: sum of signed flows - injection = 0
    std::vector<Expr> balance(n);
    for (int i = 0; i < n; ++i) balance[i].add_linear(L.x_index(i), -1.0);
    for (int e = 0; e < m; ++e) {
        const int a = c.node_index(c.lines[e].from);
        const int b = c.node_index(c.lines[e].to);
        balance[a].add_linear(L.y_index(ix.flow(e)), 1.0);
        balance[b].add_linear(L.y_index(ix.flow(e)), -1.0);
    }
    for (int i = 0; i < n; ++i) p.add_equality(std::move(balance[i]));
    // Ohm's law: theta_i - theta_j - Z * flow = 0
    for (int e = 0; e < m; ++e) {
        const int a = c.node_index(c.lines[e].from);
        const int b = c.node_index(c.lines[e].to);
        Expr ohm;
        ohm.add_linear(L.y_index(ix.theta(a)), 1.0)
            .add_linear(L.y_index(ix.theta(b)), -1.0)
            .add_linear(L.y_index(ix.flow(e)), -c.lines[e].reactance);
        p.add_equality(std::move(ohm));
    }
    Expr ref;
    ref.add_linear(L.y_index(ix.theta(ix.ref_node)), 1.0);
    p.add_equality(std::move(ref));
    // flow limits as two one-sided rows
    for (int e = 0; e < m; ++e) {
        Expr up, lo;
        up.add_linear(L.y_index(ix.flow(e)), 1.0).add_constant(-c.lines[e].limit);
        lo.add_linear(L.y_index(ix.flow(e)), -1.0).add_constant(-c.lines[e].limit);
        p.add_inequality(std::move(up));
        p.add_inequality(std::move(lo));
    }

    Vec z0 = Vec::Zero(L.total());
    for (int k = 0; k < ng; ++k) z0[L.q_index(k)] = 0.5 * qhi[k];
    for (int i = 0; i < n; ++i) {
        double inflow = 0.0;
        for (int k = 0; k < ng; ++k)
            if (tnode[k] == i) inflow += z0[L.q_index(k)];
        z0[L.x_index(i)] = inflow - d[i];
    }
    p.set_initial_primal(z0);
    p.finalize();
    return model;
}

/// Index map of the AC model.
///   q -> (active production, reactive production) per generator,
///   x -> (net active injections, net reactive injections) per node,
///   y -> (voltage magnitudes, angles, active line flows, reactive line flows)
/// H rows: p balance (n), q balance (n), p line flow (m), q line flow (m),
/// reference angle (1). G rows: apparent-power limits (m), voltage lower (n),
/// voltage upper (n).
struct AcIndex {
    int n_nodes = 0, n_lines = 0, n_gens = 0;
    int ref_node = 0;
    int q_pg(int k) const { return k; }
    int q_qg(int k) const { return n_gens + k; }
    int x_p(int i) const { return i; }
    int x_q(int i) const { return n_nodes + i; }
    int v(int i) const { return i; }
    int theta(int i) const { return n_nodes + i; }
    int pl(int e) const { return 2 * n_nodes + e; }
    int ql(int e) const { return 2 * n_nodes + n_lines + e; }
    int row_p_balance(int i) const { return i; }
    int row_q_balance(int i) const { return n_nodes + i; }
    int row_p_flow(int e) const { return 2 * n_nodes + e; }
    int row_q_flow(int e) const { return 2 * n_nodes + n_lines + e; }
    int row_ref() const { return 2 * n_nodes + 2 * n_lines; }
    int row_apparent(int e) const { return e; }
    int row_v_lower(int i) const { return n_lines + i; }
    int row_v_upper(int i) const { return n_lines + n_nodes + i; }
};

struct AcModel {
    PowerCase data;
    AcIndex idx;
    NlpProblem problem;
};

inline AcModel build_ac_opf(const PowerCase& c) {
    if (c.kind != CaseKind::PowerAc)
        throw BuildError(std::string("case kind ") + case_kind_name(c.kind) +
                         " incompatible with model ac");
    c.validate();
    const int n = static_cast<int>(c.nodes.size());
    const int m = static_cast<int>(c.lines.size());
    const int ng = static_cast<int>(c.generators.size());

    AcModel model{c, AcIndex{n, m, ng, c.reference_index()},
                  NlpProblem(2 * ng, 2 * n, 2 * n + 2 * m)};
    NlpProblem& p = model.problem;
    const auto& L = p.layout();
    const AcIndex& ix = model.idx;

    Vec qlo(2 * ng), qhi(2 * ng);
    std::vector<int> tnode(2 * ng);
    Expr cost;
    for (int k = 0; k < ng; ++k) {
        const auto& g = c.generators[k];
        const int i = c.node_index(g.node);
        qlo[ix.q_pg(k)] = 0.0;
        qhi[ix.q_pg(k)] = g.max_p;
        qlo[ix.q_qg(k)] = g.min_q;
        qhi[ix.q_qg(k)] = g.max_q;
        tnode[ix.q_pg(k)] = ix.x_p(i);
        tnode[ix.q_qg(k)] = ix.x_q(i);
        cost.add_linear(L.q_index(ix.q_pg(k)), g.cost_p);
        cost.add_linear(L.q_index(ix.q_qg(k)), g.cost_q);
    }
    p.set_bounds(qlo, qhi);
    p.set_trade_node(tnode);
    p.set_objective(cost);
    Vec d(2 * n);
    for (int i = 0; i < n; ++i) {
        d[ix.x_p(i)] = c.nodes[i].load_p;
        d[ix.x_q(i)] = c.nodes[i].load_q;
    }
    p.set_fixed_outflow(d);

    std::vector<Expr> pbal(n), qbal(n);
    for (int i = 0; i < n; ++i) {
        pbal[i].add_linear(L.x_index(ix.x_p(i)), -1.0);
        qbal[i].add_linear(L.x_index(ix.x_q(i)), -1.0);
    }
    for (int e = 0; e < m; ++e) {
        const int a = c.node_index(c.lines[e].from);
        const int b = c.node_index(c.lines[e].to);
        pbal[a].add_linear(L.y_index(ix.pl(e)), 1.0);
        pbal[b].add_linear(L.y_index(ix.pl(e)), -1.0);
        qbal[a].add_linear(L.y_index(ix.ql(e)), 1.0);
        qbal[b].add_linear(L.y_index(ix.ql(e)), -1.0);
    }
    for (int i = 0; i < n; ++i) p.add_equality(std::move(pbal[i]));
    for (int i = 0; i < n; ++i) p.add_equality(std::move(qbal[i]));
    for (int e = 0; e < m; ++e) {
        const auto& l = c.lines[e];
        const int a = c.node_index(l.from);
        const int b = c.node_index(l.to);
        const int va = L.y_index(ix.v(a)), vb = L.y_index(ix.v(b));
        const int ta = L.y_index(ix.theta(a)), tb = L.y_index(ix.theta(b));
        Expr pf;  // g vi^2 - g vi vj cos - b vi vj sin - pl = 0
        pf.add_quad(va, va, l.g)
            .add_cos(va, vb, ta, tb, -l.g)
            .add_sin(va, vb, ta, tb, -l.b)
            .add_linear(L.y_index(ix.pl(e)), -1.0);
        p.add_equality(std::move(pf));
    }
    for (int e = 0; e < m; ++e) {
        const auto& l = c.lines[e];
        const int a = c.node_index(l.from);
        const int b = c.node_index(l.to);
        const int va = L.y_index(ix.v(a)), vb = L.y_index(ix.v(b));
        const int ta = L.y_index(ix.theta(a)), tb = L.y_index(ix.theta(b));
        Expr qf;  // -(b + b_sh/2) vi^2 + b vi vj cos - g vi vj sin - ql = 0
        qf.add_quad(va, va, -(l.b + 0.5 * l.b_sh))
            .add_cos(va, vb, ta, tb, l.b)
            .add_sin(va, vb, ta, tb, -l.g)
            .add_linear(L.y_index(ix.ql(e)), -1.0);
        p.add_equality(std::move(qf));
    }
    Expr ref;
    ref.add_linear(L.y_index(ix.theta(ix.ref_node)), 1.0);
    p.add_equality(std::move(ref));

    for (int e = 0; e < m; ++e) {
        const auto& l = c.lines[e];
        Expr ap;  // pl^2 + ql^2 - s_max^2 <= 0
        ap.add_quad(L.y_index(ix.pl(e)), L.y_index(ix.pl(e)), 1.0)
            .add_quad(L.y_index(ix.ql(e)), L.y_index(ix.ql(e)), 1.0)
            .add_constant(-l.s_max * l.s_max);
        p.add_inequality(std::move(ap));
    }
    for (int i = 0; i < n; ++i) {
        Expr lo;  // v_min - v <= 0
        lo.add_constant(c.nodes[i].v_min).add_linear(L.y_index(ix.v(i)), -1.0);
        p.add_inequality(std::move(lo));
    }
    for (int i = 0; i < n; ++i) {
        Expr hi;  // v - v_max <= 0
        hi.add_constant(-c.nodes[i].v_max).add_linear(L.y_index(ix.v(i)), 1.0);
        p.add_inequality(std::move(hi));
    }

    Vec z0 = Vec::Zero(L.total());
    for (int k = 0; k < 2 * ng; ++k) z0[L.q_index(k)] = 0.5 * (qlo[k] + qhi[k]);
    for (int i = 0; i < 2 * n; ++i) {
        double inflow = 0.0;
        for (int k = 0; k < 2 * ng; ++k)
            if (tnode[k] == i) inflow += z0[L.q_index(k)];
        z0[L.x_index(i)] = inflow - d[i];
    }
    for (int i = 0; i < n; ++i) z0[L.y_index(ix.v(i))] = 1.0;
    p.set_initial_primal(z0);
    p.finalize();
    return model;
}

}  // namespace flowmarket
