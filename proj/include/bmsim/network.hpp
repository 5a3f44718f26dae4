#pragma once

#include "bmsim/systems.hpp"

#include <vector>

namespace bmsim {

/// One converter node of a DC network (buck or boost depending on which list
/// of DcNetworkSpec it sits in).
struct NetworkNode {
    Real L = 0;      // henry
    Real C = 0;      // farad
    Real G = 0;      // siemens
    Real Vs = 0;     // volt
    Real Vstar = 0;  // desired node voltage, volt
};

/// Resistive-inductive line between two nodes (1-based endpoints).
struct NetworkLine {
    int from = 0;
    int to = 0;
    Real R = 0;  // ohm
    Real L = 0;  // henry
};

struct DcNetworkSpec {
    std::vector<NetworkNode> buck_nodes;   // node indices 1 .. n_alpha
    std::vector<NetworkNode> boost_nodes;  // node indices n_alpha+1 .. n
    std::vector<NetworkLine> lines;
};

/// Node-edge incidence matrix: +1 at the from-end, -1 at the to-end.
Mat incidence_from_edges(const std::vector<std::pair<int, int>>& edges, int n);

/// Kron-reduced network in switched Brayton-Moser form together with the
/// block bookkeeping needed by controllers and audits. State ordering is
/// I = (I_alpha, I_beta, I_line), V = (V_alpha, V_beta); one switching channel
/// per converter node.
struct AssembledNetwork {
    SwitchedRlcSystem sys;
    Eigen::Index n_alpha = 0;
    Eigen::Index n_beta = 0;
    Eigen::Index n_lines = 0;
    Mat D;        // n x m incidence
    Vec Vstar;    // per node
};

AssembledNetwork assemble_dc_network(const DcNetworkSpec& spec);

/// Lemma-4 output: [ dI_alpha o Vs_alpha ; dI_beta o V_beta - dV_beta o I_beta ].
Vec network_output_ydc(const AssembledNetwork& net, const CircuitState& s, const Vec& dI,
                       const Vec& dV);

/// Steady state (Ibar, ubar) holding every node at its Vstar: Newton on the
/// stacked feasibility residual, seeded with per-node isolated closed forms.
Setpoint network_setpoint(const AssembledNetwork& net);

}  // namespace bmsim
