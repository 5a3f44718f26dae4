#include "bmsim/sim.hpp"

#include "bmsim/bm_core.hpp"

#include <cmath>
#include <cstddef>

namespace bmsim {

SwitchedRlcSystem apply_event(const SwitchedRlcSystem& sys, const LoadStepEvent& ev) {
    if (ev.node < 0 || ev.node >= sys.rho())
        throw InvalidTarget("load step targets a nonexistent node");
    Mat G = sys.G();
    G(ev.node, ev.node) += ev.dG;
    return sys.with_load(std::move(G));
}

std::pair<Vec, Vec> derive_consistent_derivatives(const SwitchedRlcSystem& sys,
                                                  const CircuitState& s, const Vec& u) {
    return srlc_dynamics(sys, s, u);
}

namespace {

struct SparseEntry {
    Eigen::Index r, c;
    Real v;
};

std::vector<SparseEntry> sparsify(const Mat& m) {
    std::vector<SparseEntry> out;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            if (m(r, c) != 0.0) out.push_back({r, c, m(r, c)});
    return out;
}

/// Allocation-free right-hand side of the extended closed loop
/// z = (I, V, dI, dV, u).
class ClosedLoopRhs {
public:
    ClosedLoopRhs(const Scenario& sc) : ctl_(&sc.controller) {
        sigma_ = sc.system.sigma();
        rho_ = sc.system.rho();
        nu_ = sc.system.switches();
        gamma_.resize(sigma_, rho_);
        bvs_.resize(sigma_);
        wI_.resize(sigma_);
        wV_.resize(rho_);
        y_.resize(nu_);
        ups_.resize(nu_);
        set_system(&sc.system);
    }

    Eigen::Index dim() const { return 2 * (sigma_ + rho_) + nu_; }
    Eigen::Index sigma() const { return sigma_; }
    Eigen::Index rho() const { return rho_; }
    Eigen::Index nu() const { return nu_; }
    const SwitchedRlcSystem& system() const { return *sys_; }

    void set_system(const SwitchedRlcSystem* sys) {
        sys_ = sys;
        b0vs_ = sys_->B0() * sys_->Vs();
        dG_.clear();
        dbvs_.clear();
        for (Eigen::Index k = 0; k < nu_; ++k) {
            dG_.push_back(sparsify(sys_->dGamma(k)));
            dbvs_.push_back(sys_->dB(k) * sys_->Vs());
        }
    }

    // Views into a state vector.
    auto I(const Vec& z) const { return z.segment(0, sigma_); }
    auto V(const Vec& z) const { return z.segment(sigma_, rho_); }
    auto dI(const Vec& z) const { return z.segment(sigma_ + rho_, sigma_); }
    auto dV(const Vec& z) const { return z.segment(2 * sigma_ + rho_, rho_); }
    auto u(const Vec& z) const { return z.segment(2 * (sigma_ + rho_), nu_); }
    auto u(Vec& z) const { return z.segment(2 * (sigma_ + rho_), nu_); }

    /// Per-channel output y and the controller rate upsilon at state z.
    void eval_ports(const Vec& z) {
        const auto zI = I(z);
        const auto zV = V(z);
        const auto zdI = dI(z);
        const auto zdV = dV(z);
        for (Eigen::Index k = 0; k < nu_; ++k) {
            Real yk = zdI.dot(dbvs_[static_cast<std::size_t>(k)]);
            for (const auto& e : dG_[static_cast<std::size_t>(k)])
                yk += e.v * (zdV[e.c] * zI[e.r] - zdI[e.r] * zV[e.c]);
            y_[k] = yk;
        }
        const auto zu = u(z);
        if (const auto* os = std::get_if<OutputShapingSrlcController>(ctl_)) {
            const Real m = os->choice.m(zI[0], zV[0]);
            const Real gamma = os->choice.has_gamma ? os->choice.gamma(zI[0], zV[0]) : 0.0;
            const Real dgamma = m * y_[0];
            ups_[0] = m * (os->gains.mu - os->gains.ki * (gamma - os->gamma_star) -
                           os->gains.kd * dgamma);
        } else if (const auto* is = std::get_if<InputShapingSrlcController>(ctl_)) {
            ups_[0] = (is->gains.mu - is->gains.ki * (zu[0] - is->ubar) - y_[0]) / is->gains.kd;
        } else {
            const auto& nc = std::get<NetworkInputShapingController>(*ctl_);
            for (Eigen::Index k = 0; k < nu_; ++k)
                ups_[k] = -(nc.ki[k] * (zu[k] - nc.ubar[k]) + y_[k]) / nc.kd[k];
        }
    }

    const Vec& upsilon() const { return ups_; }
    const Vec& output() const { return y_; }

    void operator()(Real /*t*/, const Vec& z, Vec& dz) {
        const auto zI = I(z);
        const auto zV = V(z);
        const auto zdI = dI(z);
        const auto zdV = dV(z);
        const auto zu = u(z);

        gamma_ = sys_->Gamma0();
        bvs_ = b0vs_;
        for (Eigen::Index k = 0; k < nu_; ++k) {
            for (const auto& e : dG_[static_cast<std::size_t>(k)])
                gamma_(e.r, e.c) += zu[k] * e.v;
            bvs_ += zu[k] * dbvs_[static_cast<std::size_t>(k)];
        }
        eval_ports(z);

        // plant block
        wI_.noalias() = sys_->R() * zI;
        wI_.noalias() += gamma_ * zV;
        wI_ -= bvs_;
        solve_L_inplace(wI_);
        dz.segment(0, sigma_) = -wI_;
        wV_.noalias() = gamma_.transpose() * zI;
        wV_.noalias() -= sys_->G() * zV;
        solve_C_inplace(wV_);
        dz.segment(sigma_, rho_) = wV_;

        // variational block
        wI_.noalias() = sys_->R() * zdI;
        wI_.noalias() += gamma_ * zdV;
        wV_.noalias() = gamma_.transpose() * zdI;
        wV_.noalias() -= sys_->G() * zdV;
        for (Eigen::Index k = 0; k < nu_; ++k) {
            const Real uk = ups_[k];
            if (uk == 0.0) continue;
            for (const auto& e : dG_[static_cast<std::size_t>(k)]) {
                wI_[e.r] += uk * e.v * zV[e.c];
                wV_[e.c] += uk * e.v * zI[e.r];
            }
            wI_ -= uk * dbvs_[static_cast<std::size_t>(k)];
        }
        solve_L_inplace(wI_);
        dz.segment(sigma_ + rho_, sigma_) = -wI_;
        solve_C_inplace(wV_);
        dz.segment(2 * sigma_ + rho_, rho_) = wV_;

        dz.segment(2 * (sigma_ + rho_), nu_) = ups_;
    }

    Real krasovskii(const Vec& z) {
        wI_.noalias() = sys_->L() * dI(z);
        wV_.noalias() = sys_->C() * dV(z);
        return 0.5 * (dI(z).dot(wI_) + dV(z).dot(wV_));
    }

    Real shaped_storage(const Vec& z) {
        const Real S = krasovskii(z);
        if (const auto* os = std::get_if<OutputShapingSrlcController>(ctl_)) {
            const Real gamma =
                os->choice.has_gamma ? os->choice.gamma(I(z)[0], V(z)[0]) : 0.0;
            const Real e = gamma - os->gamma_star;
            return S + 0.5 * os->gains.ki * e * e;
        }
        if (const auto* is = std::get_if<InputShapingSrlcController>(ctl_)) {
            const Real e = u(z)[0] - is->ubar;
            return S + 0.5 * is->gains.ki * e * e;
        }
        const auto& nc = std::get<NetworkInputShapingController>(*ctl_);
        Real acc = 0;
        for (Eigen::Index k = 0; k < nu_; ++k) {
            const Real e = u(z)[k] - nc.ubar[k];
            acc += nc.ki[k] * e * e;
        }
        return S + 0.5 * acc;
    }

private:
    void solve_L_inplace(Vec& v) const { sys_->lltL().solveInPlace(v); }
    void solve_C_inplace(Vec& v) const { sys_->lltC().solveInPlace(v); }

    const SwitchedRlcSystem* sys_ = nullptr;
    const SrlcController* ctl_ = nullptr;
    Eigen::Index sigma_ = 0, rho_ = 0, nu_ = 0;
    Mat gamma_;
    Vec b0vs_, bvs_, wI_, wV_, y_, ups_;
    std::vector<std::vector<SparseEntry>> dG_;
    std::vector<Vec> dbvs_;
};

std::size_t grid_index(Real time, Real dt, const char* what) {
    const auto idx = static_cast<long long>(std::llround(time / dt));
    if (idx < 0 || std::abs(static_cast<Real>(idx) * dt - time) > 1e-9 * std::max<Real>(1.0, time))
        throw EventOffGrid(std::string(what) + " does not land on the integration grid");
    return static_cast<std::size_t>(idx);
}

}  // namespace

std::vector<SwitchedRlcSystem> segment_systems(const Scenario& sc) {
    std::vector<SwitchedRlcSystem> out{sc.system};
    for (std::size_t i = 0; i < sc.events.size(); ++i) {
        SwitchedRlcSystem next = apply_event(out.back(), sc.events[i]);
        if (i > 0 && sc.events[i].time == sc.events[i - 1].time)
            out.back() = std::move(next);  // coincident: same boundary
        else
            out.push_back(std::move(next));
    }
    return out;
}

std::vector<Vec> rk4_path(const std::function<void(Real, const Vec&, Vec&)>& f, Vec z0, Real dt,
                          std::size_t steps, std::size_t record_every) {
    const Eigen::Index n = z0.size();
    Vec k1(n), k2(n), k3(n), k4(n), tmp(n);
    std::vector<Vec> out;
    out.reserve(steps / record_every + 1);
    out.push_back(z0);
    Vec z = std::move(z0);
    for (std::size_t i = 1; i <= steps; ++i) {
        const Real t = static_cast<Real>(i - 1) * dt;
        f(t, z, k1);
        tmp = z + (0.5 * dt) * k1;
        f(t + 0.5 * dt, tmp, k2);
        tmp = z + (0.5 * dt) * k2;
        f(t + 0.5 * dt, tmp, k3);
        tmp = z + dt * k3;
        f(t + dt, tmp, k4);
        z += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (i % record_every == 0) out.push_back(z);
    }
    return out;
}

Trajectory integrate(const Scenario& sc) {
    require(sc.dt > 0, "dt must be positive");
    require(sc.t_end > sc.dt, "t_end must exceed dt");
    require(sc.record_every >= 1, "record_every must be at least 1");
    const std::size_t nsteps = grid_index(sc.t_end, sc.dt, "t_end");
    require(nsteps >= 1, "need at least one step");
    require(nsteps % static_cast<std::size_t>(sc.record_every) == 0,
            "record_every must divide the step count");

    const Eigen::Index sigma = sc.system.sigma();
    const Eigen::Index rho = sc.system.rho();
    const Eigen::Index nu = sc.system.switches();
    require(sc.initial.I.size() == sigma && sc.initial.V.size() == rho,
            "initial state dimension mismatch");
    require(sc.u0.size() == nu, "initial duty dimension mismatch");

    // Event validation and per-segment systems (built up front so an invalid
    // load step fails before any integration).
    // Event validation; coincident times are allowed (several node loads can
    // step at the same instant) and collapse into one segment boundary.
    std::vector<std::size_t> event_steps;
    std::vector<SwitchedRlcSystem> segment_sys{sc.system};
    for (const auto& ev : sc.events) {
        const std::size_t idx = grid_index(ev.time, sc.dt, "event time");
        if (idx == 0 || idx >= nsteps)
            throw EventOffGrid("event time must lie strictly inside (0, t_end)");
        if (idx % static_cast<std::size_t>(sc.record_every) != 0)
            throw EventOffGrid("event time must land on a recorded sample");
        if (!event_steps.empty() && idx < event_steps.back())
            throw InvalidParams("event times must be nondecreasing");
        event_steps.push_back(idx);
        segment_sys.push_back(apply_event(segment_sys.back(), ev));
    }

    ClosedLoopRhs rhs(sc);
    rhs.set_system(&segment_sys[0]);
    const Eigen::Index dim = rhs.dim();

    Vec z(dim);
    z.segment(0, sigma) = sc.initial.I;
    z.segment(sigma, rho) = sc.initial.V;
    rhs.u(z) = sc.u0;
    auto reset_derivatives = [&]() {
        auto [d0, v0] = srlc_dynamics(rhs.system(), {z.segment(0, sigma), z.segment(sigma, rho)},
                                      z.segment(2 * (sigma + rho), nu));
        z.segment(sigma + rho, sigma) = d0;
        z.segment(2 * sigma + rho, rho) = v0;
    };
    reset_derivatives();

    const std::size_t rec = static_cast<std::size_t>(sc.record_every);
    const std::size_t nrows = nsteps / rec + 1;
    Trajectory traj;
    traj.sigma = sigma;
    traj.rho = rho;
    traj.nu = nu;
    traj.dt = sc.dt * static_cast<Real>(sc.record_every);
    traj.t.reserve(nrows);
    traj.I.reserve(nrows * static_cast<std::size_t>(sigma));
    traj.V.reserve(nrows * static_cast<std::size_t>(rho));
    traj.u.reserve(nrows * static_cast<std::size_t>(nu));
    traj.dI.reserve(nrows * static_cast<std::size_t>(sigma));
    traj.dV.reserve(nrows * static_cast<std::size_t>(rho));
    traj.S.reserve(nrows);
    traj.Sd.reserve(nrows);
    traj.supply.reserve(nrows);
    traj.ctrl.reserve(nrows * static_cast<std::size_t>(nu));

    auto record = [&](Real t) {
        traj.t.push_back(t);
        for (Eigen::Index j = 0; j < sigma; ++j) traj.I.push_back(z[j]);
        for (Eigen::Index j = 0; j < rho; ++j) traj.V.push_back(z[sigma + j]);
        for (Eigen::Index j = 0; j < nu; ++j) traj.u.push_back(z[2 * (sigma + rho) + j]);
        for (Eigen::Index j = 0; j < sigma; ++j) traj.dI.push_back(z[sigma + rho + j]);
        for (Eigen::Index j = 0; j < rho; ++j) traj.dV.push_back(z[2 * sigma + rho + j]);
        rhs.eval_ports(z);
        traj.S.push_back(rhs.krasovskii(z));
        traj.Sd.push_back(rhs.shaped_storage(z));
        traj.supply.push_back(rhs.upsilon().dot(rhs.output()));
        for (Eigen::Index j = 0; j < nu; ++j) traj.ctrl.push_back(rhs.upsilon()[j]);
    };

    record(0.0);

    Vec k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    std::size_t next_event = 0;
    for (std::size_t i = 1; i <= nsteps; ++i) {
        const Real t = static_cast<Real>(i - 1) * sc.dt;
        rhs(t, z, k1);
        tmp = z;
        tmp += (0.5 * sc.dt) * k1;
        rhs(t + 0.5 * sc.dt, tmp, k2);
        tmp = z;
        tmp += (0.5 * sc.dt) * k2;
        rhs(t + 0.5 * sc.dt, tmp, k3);
        tmp = z;
        tmp += sc.dt * k3;
        rhs(t + sc.dt, tmp, k4);
        k1 += 2.0 * k2;
        k1 += 2.0 * k3;
        k1 += k4;
        z += (sc.dt / 6.0) * k1;

        if (sc.saturate_duty) {
            auto uview = rhs.u(z);
            for (Eigen::Index j = 0; j < nu; ++j) {
                if (uview[j] < 0.0 || uview[j] > 1.0) {
                    uview[j] = std::clamp(uview[j], 0.0, 1.0);
                    if (traj.saturation_count++ == 0)
                        traj.first_saturation_time = static_cast<Real>(i) * sc.dt;
                }
            }
        }
        if (!z.allFinite())
            throw NonFiniteState("state became non-finite at t = " +
                                 std::to_string(static_cast<Real>(i) * sc.dt));

        if (i % rec == 0) record(static_cast<Real>(i) * sc.dt);

        while (next_event < event_steps.size() && i == event_steps[next_event]) {
            if (traj.event_rows.empty() || traj.event_rows.back() != i / rec)
                traj.event_rows.push_back(i / rec);
            rhs.set_system(&segment_sys[next_event + 1]);
            reset_derivatives();
            ++next_event;
        }
    }
    return traj;
}

}  // namespace bmsim
