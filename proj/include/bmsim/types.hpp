#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace bmsim {

using Real = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };
struct InvalidParams : Error { using Error::Error; };
struct SingularSystem : Error { using Error::Error; };
struct NoFeasibleInput : Error { using Error::Error; };
struct MultipleRoots : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct UnknownPreset : Error { using Error::Error; };
struct NonFiniteState : Error { using Error::Error; };
struct EventOffGrid : Error { using Error::Error; };
struct InvalidEdge : Error { using Error::Error; };
struct DisconnectedGraph : Error { using Error::Error; };
struct InvalidTarget : Error { using Error::Error; };
struct NonPsdResult : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct SchemaMismatch : Error { using Error::Error; };

/// Currents through the inductors and voltages across the capacitors.
struct CircuitState {
    Vec I;  // ampere, size sigma
    Vec V;  // volt, size rho
};

/// State of the time-extended dynamics: plant state, its derivative, and
/// the integrated control input (u_s for RLC, duty cycle(s) for s-RLC).
struct ExtendedState {
    Vec I;
    Vec V;
    Vec dI;  // A/s
    Vec dV;  // V/s
    Vec u;   // control value(s), one entry per channel
};

/// Steady state (Ibar, Vstar) together with the constant input that holds it.
struct Setpoint {
    Vec Ibar;
    Vec Vstar;
    Vec ubar;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidParams(msg);
}

}  // namespace bmsim
