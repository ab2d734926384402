#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flowmarket/gas.hpp"
#include "flowmarket/power.hpp"

namespace flowmarket {

enum class Formulation { DC, OGF, AC };

inline const char* formulation_name(Formulation f) {
    switch (f) {
        case Formulation::DC: return "dc";
        case Formulation::OGF: return "ogf";
        case Formulation::AC: return "ac";
    }
    return "?";
}

enum class StarMode { GSS, LSS };

struct StarSample {
    double s;
    double violation;
};

/// A family of system points indexed by s, with per-sample feasibility
/// violations measured over the system constraint rows only (conservation
/// and nomination rows concern the market set and are excluded).
struct ScalingPath {
    Formulation formulation = Formulation::DC;
    StarMode mode = StarMode::GSS;
    std::vector<StarSample> samples;
    double max_violation = 0.0;
    std::optional<double> epsilon_star;  // LSS only
    std::optional<double> pi_c;          // OGF only

    bool feasible_all(double tol = 1e-8) const {
        for (const auto& s : samples)
            if (s.violation > tol) return false;
        return !samples.empty();
    }
};

/// Infinity-norm violation of the system set rows H(x,y) = 0, G(x,y) <= 0 at
/// a primal point, with the exact (unsmoothed) evaluators.
inline double system_violation(const NlpProblem& p, const Vec& z) {
    double m = 0.0;
    const Vec rh = p.family(FamilyKind::SystemEquality).residual(z, EvalMode::Exact);
    if (rh.size()) m = std::max(m, rh.cwiseAbs().maxCoeff());
    const Vec rg = p.family(FamilyKind::SystemInequality).residual(z, EvalMode::Exact);
    for (int i = 0; i < rg.size(); ++i) m = std::max(m, std::max(rg[i], 0.0));
    return m;
}

/// DC scaling: (p, theta, flows) -> s * (p, theta, flows). Linearity and
/// homogeneity keep every system row satisfied exactly.
inline Vec dc_scale_point(const DcModel& model, const Vec& primal, double s) {
    model.problem.require_primal(primal);
    const auto& L = model.problem.layout();
    Vec z = primal;
    z.segment(L.x_offset(), L.n_exposed) *= s;
    z.segment(L.y_offset(), L.n_dependent) *= s;
    return z;
}

/// Midpoint of the intersection of all nodal and pipe squared-pressure
/// boxes; empty intersection yields nullopt.
inline std::optional<double> find_common_pressure(const GasCase& c) {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (const auto& j : c.junctions) {
        lo = std::max(lo, j.pi_min);
        hi = std::min(hi, j.pi_max);
    }
    for (const auto& e : c.pipes) {
        lo = std::max(lo, e.pi_min);
        hi = std::min(hi, e.pi_max);
    }
    if (lo > hi) return std::nullopt;
    return 0.5 * (lo + hi);
}

/// Gas scaling toward the common pressure point pi_c:
///   pi^s    = pi_c + s^2 (pi - pi_c)        (nodes and both pipe ends)
///   alpha^s = pi_from^s / pi_node^s          (compressor pipes)
///   phi^s   = s phi,  x^s = s x
inline Vec ogf_scale_point(const OgfModel& model, const Vec& primal, double s, double pi_c) {
    model.problem.require_primal(primal);
    const auto& L = model.problem.layout();
    const OgfIndex& ix = model.idx;
    Vec z = primal;
    z.segment(L.x_offset(), L.n_exposed) *= s;
    const double s2 = s * s;
    auto interp = [&](int yidx) {
        const double base = primal[L.y_index(yidx)];
        z[L.y_index(yidx)] = pi_c + s2 * (base - pi_c);
    };
    for (int i = 0; i < ix.n_junctions; ++i) interp(ix.pi_node(i));
    for (int e = 0; e < ix.n_pipes; ++e) {
        interp(ix.pi_from(e));
        interp(ix.pi_to(e));
        z[L.y_index(ix.flow(e))] = s * primal[L.y_index(ix.flow(e))];
    }
    for (int cdx = 0; cdx < ix.n_compressors; ++cdx) {
        const int e = ix.compressor_pipe[cdx];
        const int a = model.data.junction_index(model.data.pipes[e].from);
        const double denom = z[L.y_index(ix.pi_node(a))];
        if (!(denom > 0.0))
            throw NumericDomainError("scaled nodal squared pressure is not positive");
        z[L.y_index(ix.ratio(cdx))] = z[L.y_index(ix.pi_from(e))] / denom;
    }
    return z;
}

/// AC scaling: injections and line flows scale by s, voltage magnitudes by
/// sqrt(s), angles unchanged. Voltage boxes are not preserved by the map and
/// are checked by the caller.
inline Vec ac_scale_point(const AcModel& model, const Vec& primal, double s) {
    model.problem.require_primal(primal);
    const auto& L = model.problem.layout();
    const AcIndex& ix = model.idx;
    Vec z = primal;
    z.segment(L.x_offset(), L.n_exposed) *= s;
    const double rs = std::sqrt(s);
    for (int i = 0; i < ix.n_nodes; ++i) z[L.y_index(ix.v(i))] *= rs;
    for (int e = 0; e < ix.n_lines; ++e) {
        z[L.y_index(ix.pl(e))] *= s;
        z[L.y_index(ix.ql(e))] *= s;
    }
    return z;
}

namespace detail {
inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}
}  // namespace detail

/// Registered star-shape construction for one formulation: a hypothesis
/// gate, the sweep/bisection runner, and the scaling direction at s = 1
/// (q-block zero) used by the proof-chain audit.
struct StarCheck {
    Formulation formulation = Formulation::DC;
    StarMode mode = StarMode::GSS;
    std::function<std::optional<std::string>(const Vec&)> hypothesis;
    std::function<ScalingPath(const Vec&)> run;
    std::function<Vec(const Vec&)> direction_at_one;
};

inline StarCheck star_check_dc(const DcModel& model, int samples = 101) {
    StarCheck c;
    c.formulation = Formulation::DC;
    c.mode = StarMode::GSS;
    c.hypothesis = [](const Vec&) { return std::optional<std::string>{}; };
    c.run = [&model, samples](const Vec& primal) {
        ScalingPath path;
        path.formulation = Formulation::DC;
        path.mode = StarMode::GSS;
        for (double s : detail::linspace(0.0, 1.0, samples)) {
            const Vec z = dc_scale_point(model, primal, s);
            const double v = system_violation(model.problem, z);
            path.samples.push_back({s, v});
            path.max_violation = std::max(path.max_violation, v);
        }
        return path;
    };
    c.direction_at_one = [&model](const Vec& primal) {
        const auto& L = model.problem.layout();
        Vec d = Vec::Zero(L.total());
        d.segment(L.x_offset(), L.n_exposed) = -primal.segment(L.x_offset(), L.n_exposed);
        d.segment(L.y_offset(), L.n_dependent) = -primal.segment(L.y_offset(), L.n_dependent);
        return d;
    };
    return c;
}

inline StarCheck star_check_ogf(const OgfModel& model, int samples = 101) {
    StarCheck c;
    c.formulation = Formulation::OGF;
    c.mode = StarMode::GSS;
    c.hypothesis = [&model](const Vec&) -> std::optional<std::string> {
        if (!find_common_pressure(model.data))
            return "no common admissible squared pressure across junction and pipe boxes";
        return std::nullopt;
    };
    c.run = [&model, samples](const Vec& primal) {
        ScalingPath path;
        path.formulation = Formulation::OGF;
        path.mode = StarMode::GSS;
        const auto pc = find_common_pressure(model.data);
        if (!pc) return path;  // hypothesis gate reports the reason
        path.pi_c = *pc;
        for (double s : detail::linspace(0.0, 1.0, samples)) {
            const Vec z = ogf_scale_point(model, primal, s, *pc);
            const double v = system_violation(model.problem, z);
            path.samples.push_back({s, v});
            path.max_violation = std::max(path.max_violation, v);
        }
        return path;
    };
    c.direction_at_one = [&model](const Vec& primal) {
        const auto& L = model.problem.layout();
        const OgfIndex& ix = model.idx;
        const auto pc = find_common_pressure(model.data);
        const double pi_c = pc.value_or(0.0);
        Vec d = Vec::Zero(L.total());
        d.segment(L.x_offset(), L.n_exposed) = -primal.segment(L.x_offset(), L.n_exposed);
        auto dpress = [&](int yidx) {
            d[L.y_index(yidx)] = -2.0 * (primal[L.y_index(yidx)] - pi_c);
        };
        for (int i = 0; i < ix.n_junctions; ++i) dpress(ix.pi_node(i));
        for (int e = 0; e < ix.n_pipes; ++e) {
            dpress(ix.pi_from(e));
            dpress(ix.pi_to(e));
            d[L.y_index(ix.flow(e))] = -primal[L.y_index(ix.flow(e))];
        }
        for (int cdx = 0; cdx < ix.n_compressors; ++cdx) {
            const int e = ix.compressor_pipe[cdx];
            const int a = model.data.junction_index(model.data.pipes[e].from);
            const double pi_i = primal[L.y_index(ix.pi_node(a))];
            const double pi_ij = primal[L.y_index(ix.pi_from(e))];
            // d/ds of alpha^s at s = 1 is 2 pi_c (pi_ij - pi_i) / pi_i^2
            d[L.y_index(ix.ratio(cdx))] = -2.0 * pi_c * (pi_ij - pi_i) / (pi_i * pi_i);
        }
        return d;
    };
    return c;
}

inline StarCheck star_check_ac(const AcModel& model, int window_samples = 21,
                               double bisect_tol = 1e-4, double feas_tol = 1e-8) {
    StarCheck c;
    c.formulation = Formulation::AC;
    c.mode = StarMode::LSS;
    c.hypothesis = [&model](const Vec& primal) -> std::optional<std::string> {
        const auto& L = model.problem.layout();
        for (int i = 0; i < model.idx.n_nodes; ++i) {
            const double v = primal[L.y_index(model.idx.v(i))];
            const double margin = v - model.data.nodes[i].v_min;
            if (margin <= 1e-6)
                return "voltage lower bound binding at node " + model.data.nodes[i].id;
        }
        return std::nullopt;
    };
    c.run = [&model, window_samples, bisect_tol, feas_tol](const Vec& primal) {
        ScalingPath path;
        path.formulation = Formulation::AC;
        path.mode = StarMode::LSS;
        auto window_ok = [&](double eps, ScalingPath* record) {
            bool ok = true;
            for (double s : detail::linspace(1.0 - eps, 1.0, window_samples)) {
                const Vec z = ac_scale_point(model, primal, s);
                const double v = system_violation(model.problem, z);
                if (record) {
                    record->samples.push_back({s, v});
                    record->max_violation = std::max(record->max_violation, v);
                }
                if (v > feas_tol) ok = false;
            }
            return ok;
        };
        double lo = 0.0, hi = 1.0;
        if (window_ok(1.0, nullptr)) {
            lo = 1.0;
        } else {
            while (hi - lo > bisect_tol) {
                const double mid = 0.5 * (lo + hi);
                if (window_ok(mid, nullptr))
                    lo = mid;
                else
                    hi = mid;
            }
        }
        path.epsilon_star = lo;
        window_ok(lo, &path);
        return path;
    };
    c.direction_at_one = [&model](const Vec& primal) {
        const auto& L = model.problem.layout();
        const AcIndex& ix = model.idx;
        Vec d = Vec::Zero(L.total());
        d.segment(L.x_offset(), L.n_exposed) = -primal.segment(L.x_offset(), L.n_exposed);
        for (int i = 0; i < ix.n_nodes; ++i)
            d[L.y_index(ix.v(i))] = -0.5 * primal[L.y_index(ix.v(i))];
        for (int e = 0; e < ix.n_lines; ++e) {
            d[L.y_index(ix.pl(e))] = -primal[L.y_index(ix.pl(e))];
            d[L.y_index(ix.ql(e))] = -primal[L.y_index(ix.ql(e))];
        }
        return d;
    };
    return c;
}

inline ScalingPath verify_star(const DcModel& model, const Vec& primal, int samples = 101) {
    return star_check_dc(model, samples).run(primal);
}
inline ScalingPath verify_star(const OgfModel& model, const Vec& primal, int samples = 101) {
    return star_check_ogf(model, samples).run(primal);
}
inline ScalingPath verify_star(const AcModel& model, const Vec& primal, int samples = 21) {
    return star_check_ac(model, samples).run(primal);
}

}  // namespace flowmarket
