#pragma once

#include "bmsim/controllers.hpp"
#include "bmsim/systems.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace bmsim {

/// Load step G[node] += dG applied at a fixed time on the integration grid.
struct LoadStepEvent {
    Real time = 0;
    Eigen::Index node = 0;
    Real dG = 0;
};

/// Returns the system with the load step applied; PSD is re-checked.
SwitchedRlcSystem apply_event(const SwitchedRlcSystem& sys, const LoadStepEvent& ev);

/// Voltage-convergence expectation for one inter-event segment.
struct AuditSegmentSpec {
    Vec expected_voltage;                // per capacitor node; defaults to Vstar
    Real band = 0.5;                     // volts
    std::optional<Real> settle_within;   // seconds from segment start
    bool expected_is_default = true;     // false when declared in the scenario file
};

struct Scenario {
    SwitchedRlcSystem system;
    SrlcController controller;
    Setpoint setpoint;
    Real dt = 1e-6;
    Real t_end = 0;
    CircuitState initial;                // dI, dV are derived from the plant
    Vec u0;
    std::vector<LoadStepEvent> events;   // strictly increasing times on the grid
    int record_every = 1;
    bool saturate_duty = false;
    std::vector<AuditSegmentSpec> audit_segments;  // events.size()+1 entries
};

/// Uniform-grid record of one run. Per-sample matrices are stored row-major
/// (sample index first).
struct Trajectory {
    Eigen::Index sigma = 0, rho = 0, nu = 0;  // nu = control channels
    Real dt = 0;                              // recording interval
    std::vector<Real> t;
    std::vector<Real> I, V, u, dI, dV;
    std::vector<Real> S, Sd, supply;
    std::vector<Real> ctrl;                   // controller output (not serialized)
    std::vector<std::size_t> event_rows;
    std::size_t saturation_count = 0;
    Real first_saturation_time = -1;

    std::size_t rows() const { return t.size(); }

    Eigen::Map<const Vec> I_row(std::size_t k) const { return {&I[k * sigma], sigma}; }
    Eigen::Map<const Vec> V_row(std::size_t k) const { return {&V[k * rho], rho}; }
    Eigen::Map<const Vec> u_row(std::size_t k) const { return {&u[k * nu], nu}; }
    Eigen::Map<const Vec> dI_row(std::size_t k) const { return {&dI[k * sigma], sigma}; }
    Eigen::Map<const Vec> dV_row(std::size_t k) const { return {&dV[k * rho], rho}; }
};

/// Classical fixed-step RK4 over the extended closed loop. Events are applied
/// exactly at grid times (EventOffGrid otherwise); dI, dV are re-derived from
/// the plant whenever the system changes. Deterministic: identical scenarios
/// produce bit-identical trajectories.
Trajectory integrate(const Scenario& sc);

/// Generic fixed-step RK4 driver used by tests and oracles: advances z through
/// f(t, z, dz) and records every record_every-th state (plus the initial one).
std::vector<Vec> rk4_path(const std::function<void(Real, const Vec&, Vec&)>& f, Vec z0, Real dt,
                          std::size_t steps, std::size_t record_every = 1);

/// Consistent derivative initialization (dI, dV) = plant field at (I, V, u).
std::pair<Vec, Vec> derive_consistent_derivatives(const SwitchedRlcSystem& sys,
                                                  const CircuitState& s, const Vec& u);

/// Cumulative per-segment systems: the scenario system followed by the system
/// after each distinct event time (coincident times collapse into one entry).
std::vector<SwitchedRlcSystem> segment_systems(const Scenario& sc);

}  // namespace bmsim
