#pragma once

#include "bmsim/systems.hpp"

#include <functional>
#include <string>
#include <vector>

namespace bmsim {

enum class ConverterKind { buck, boost, buckboost, cuk };

std::string to_string(ConverterKind k);
ConverterKind converter_kind_from_string(const std::string& name);

/// Component values of one converter. For the Cuk converter L,C are the
/// input-side pair (L1, C1) and L2, C2 the output-side pair; the load G sits
/// across the output capacitor.
struct ConverterParams {
    ConverterKind kind = ConverterKind::buck;
    Real L = 0;   // henry
    Real C = 0;   // farad
    Real G = 0;   // siemens
    Real Vs = 0;  // volt
    Real L2 = 0;  // Cuk only
    Real C2 = 0;  // Cuk only
};

/// Maps a converter onto the switched Brayton-Moser form.
SwitchedRlcSystem make_converter(const ConverterParams& p);

/// Closed-form steady state for the regulated output voltage (V2star for the
/// Cuk converter, which must be negative). Residual against srlc_dynamics is
/// verified to 1e-9.
Setpoint converter_setpoint(const ConverterParams& p, Real vstar);

/// Scalar integrating-factor choice: m(I,V) nonzero on its domain and gamma
/// with d(gamma)/dt = m * y along trajectories.
struct GammaChoice {
    std::string name;
    std::function<Real(Real I, Real V)> m;
    std::function<Real(Real I, Real V)> gamma;  // absent for the identity row
    bool has_gamma = false;
};

/// The five boost rows: m=1; m=1/V^2, g=I/V; m=1/I^2, g=-V/I;
/// m=1/(V^2+I^2), g=atan(I/V); m=1/(IV), g=ln(I/V).
std::vector<GammaChoice> boost_gamma_catalogue();

/// Buck rows: the output y = dI*Vs admits any nonzero constant as the
/// integrating factor. "identity" is m = 1, gamma = I*Vs; buck_gamma_scaled
/// gives m = scale, gamma = scale*I*Vs.
std::vector<GammaChoice> buck_gamma_catalogue(Real Vs);
GammaChoice buck_gamma_scaled(Real Vs, Real scale);

/// Looks up a gamma choice by name for the given converter; "scaled" (buck)
/// uses the supplied scale.
GammaChoice gamma_choice(const ConverterParams& p, const std::string& name, Real scale = 1.0);

}  // namespace bmsim
