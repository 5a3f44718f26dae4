#pragma once

#include "bmsim/bm_core.hpp"
#include "bmsim/converters.hpp"

#include <string>
#include <utility>
#include <variant>

namespace bmsim {

struct Gains {
    Real kd = 0;
    Real ki = 0;
    Real mu = 0;  // exogenous passive input, zero in every stability statement

    Gains() = default;
    Gains(Real kd_, Real ki_, Real mu_ = 0) : kd(kd_), ki(ki_), mu(mu_) {
        require(kd > 0 && ki > 0, "controller gains kd, ki must be positive");
    }
};

// --- the six control laws ---

/// upsilon_s = mu_s - ki B^T (I - Ibar) - kd y_s, with y_s = B^T dI.
Vec output_shaping_rlc(const RlcSystem& sys, const ExtendedState& e, const Setpoint& sp,
                       const Gains& g, const Vec& mus);
Vec output_shaping_rlc(const RlcSystem& sys, const ExtendedState& e, const Setpoint& sp,
                       const Gains& g);

/// Derivative-free form: u_s = -(ki phi + kd B^T I), dphi = -mu_s/ki + B^T (I - Ibar).
/// Returns (u_s, dphi).
std::pair<Vec, Vec> output_shaping_rlc_alt(const RlcSystem& sys, const CircuitState& s,
                                           const Vec& phi, const Setpoint& sp, const Gains& g,
                                           const Vec& mus);

/// upsilon = m (mu - ki (gamma - gamma_star) - kd dgamma), dgamma = m*y.
Real output_shaping_srlc(const SwitchedRlcSystem& sys, const ExtendedState& e,
                         const GammaChoice& gc, Real gamma_star, const Gains& g);

/// upsilon_s = (1/kd) (mu_s - ki (u_s - ubar_s) - y_s).
Vec input_shaping_rlc(const RlcSystem& sys, const ExtendedState& e, const Setpoint& sp,
                      const Gains& g, const Vec& mus);
Vec input_shaping_rlc(const RlcSystem& sys, const ExtendedState& e, const Setpoint& sp,
                      const Gains& g);

/// upsilon = (1/kd) (mu - ki (u - ubar) - y), single switch.
Real input_shaping_srlc(const SwitchedRlcSystem& sys, const ExtendedState& e,
                        const Setpoint& sp, const Gains& g);

/// du = -Kd^-1 (Ki (u - ubar) + y), componentwise with diagonal gains; the
/// per-channel output y reproduces y_DC for assembled networks.
Vec network_input_shaping(const SwitchedRlcSystem& sys, const ExtendedState& e, const Vec& ubar,
                          const Vec& kd, const Vec& ki);

// --- shaped storage functions, used by the Lyapunov audits ---

Real shaped_storage_output_rlc(const RlcSystem& sys, const ExtendedState& e, const Setpoint& sp,
                               const Gains& g);
Real shaped_storage_output_srlc(const SwitchedRlcSystem& sys, const ExtendedState& e,
                                const GammaChoice& gc, Real gamma_star, const Gains& g);
Real shaped_storage_input_rlc(const RlcSystem& sys, const ExtendedState& e, const Setpoint& sp,
                              const Gains& g);
Real shaped_storage_input_srlc(const SwitchedRlcSystem& sys, const ExtendedState& e,
                               const Setpoint& sp, const Gains& g);
Real shaped_storage_network(const SwitchedRlcSystem& sys, const ExtendedState& e,
                            const Vec& ubar, const Vec& ki);

// --- controller objects for closed-loop simulation ---

struct OutputShapingSrlcController {
    Gains gains;
    GammaChoice choice;
    Real gamma_star = 0;
};

struct InputShapingSrlcController {
    Gains gains;
    Real ubar = 0;
};

struct NetworkInputShapingController {
    Vec kd, ki, ubar;
};

using SrlcController = std::variant<OutputShapingSrlcController, InputShapingSrlcController,
                                    NetworkInputShapingController>;

/// Control rate upsilon for the extended closed loop.
Vec controller_rate(const SrlcController& c, const SwitchedRlcSystem& sys,
                    const ExtendedState& e);
/// Shaped storage S_d for the same controller.
Real controller_shaped_storage(const SrlcController& c, const SwitchedRlcSystem& sys,
                               const ExtendedState& e);

// --- figure presets ---

struct ControllerPreset {
    std::string name;            // fig5, fig6, fig7, fig8, network4
    std::string method;          // output_shaping | input_shaping
    ConverterKind kind = ConverterKind::buck;  // unused for network4
    bool network = false;
    Real kd = 0, ki = 0;         // converter presets
    Real kd_buck = 0, ki_buck = 0, kd_boost = 0, ki_boost = 0;  // network preset
    std::string gamma_name;      // output shaping only
    Real gamma_scale = 1.0;      // integrating-factor normalization
};

/// Gains and method exactly as in the named figure caption; throws
/// UnknownPreset otherwise.
ControllerPreset controller_preset(const std::string& name);

}  // namespace bmsim
