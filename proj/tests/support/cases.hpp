#pragma once

// Shared fixture cases for the test suites.

#include "flowmarket/gas.hpp"
#include "flowmarket/power.hpp"

namespace fmtest {

using namespace flowmarket;

inline PowerCase dc_2bus() {
    PowerCase c;
    c.name = "dc_2bus";
    c.kind = CaseKind::PowerDc;
    c.nodes = {{"b1", 0.0}, {"b2", 5.0}};
    c.generators = {{"b1", 10.0, 1.0}};
    c.lines = {{"b1", "b2", 1.0, 10.0}};
    return c;
}

// Triangle with a cheap generator behind a tight line; congestion splits
// the nodal prices.
inline PowerCase dc_3bus_congested() {
    PowerCase c;
    c.name = "dc_3bus";
    c.kind = CaseKind::PowerDc;
    c.nodes = {{"b1", 0.0}, {"b2", 3.0}, {"b3", 3.0}};
    c.generators = {{"b1", 10.0, 1.0}, {"b3", 10.0, 5.0}};
    PowerLine l12{"b1", "b2", 1.0, 2.0};
    PowerLine l23{"b2", "b3", 1.0, 10.0};
    PowerLine l13{"b1", "b3", 1.0, 10.0};
    c.lines = {l12, l23, l13};
    return c;
}

inline GasCase gas_3junction() {
    GasCase c;
    c.name = "gas_3junction";
    GasJunction a{"j1", 0.0, GasSupply{0.0, 2.0, 1.0}, 1.0, 9.0};
    GasJunction b{"j2", 0.0, std::nullopt, 1.0, 9.0};
    GasJunction d{"j3", 0.0, GasSupply{-1.5, 0.0, 8.0}, 1.0, 9.0};
    c.junctions = {a, b, d};
    GasPipe p1{"j1", "j2", 1.0, 1.0, 12.0, GasCompressor{1.8, 0.05}};
    GasPipe p2{"j2", "j3", 1.0, 1.0, 9.0, std::nullopt};
    c.pipes = {p1, p2};
    return c;
}

inline PowerCase ac_2bus() {
    PowerCase c;
    c.name = "ac_2bus";
    c.kind = CaseKind::PowerAc;
    PowerNode n1{"b1", 0.0, 0.0, 0.9, 1.1, true};
    PowerNode n2{"b2", 0.4, 0.1, 0.9, 1.1, true};
    c.nodes = {n1, n2};
    PowerGenerator g{"b1", 2.0, 1.0, 1.0, 0.0, 0.2};
    c.generators = {g};
    PowerLine l;
    l.from = "b1";
    l.to = "b2";
    l.g = 0.0;
    l.b = -5.0;
    l.b_sh = 0.0;
    l.s_max = 1.5;
    c.lines = {l};
    return c;
}

}  // namespace fmtest
